"""Data augmentation that extrapolates the graph along its ruled directions.

The motility-map graph is linear in the shape velocity at fixed shape, so
synthetic points formed as sphere-weighted combinations of a component's
members — with the body-velocity and shape-velocity deviations scaled by
beta but the shape deviations left alone — extend the linear structure
outward without bending the shape support. Refitting on the union yields
the augmented regressor.
"""

from dataclasses import dataclass

import numpy as np

from .gaussians import mahalanobis_normalized_batch
from .gbr import GaussianBranchingRegressor
from .mixture import EmConfig
from .validation import ValidationError, check_matrix, check_seed, spawn_seeds


@dataclass(frozen=True)
class AugmentConfig:
    """Meta-parameters of the augmentation step.

    alpha sets how many synthetic points each component emits (ceil of
    alpha times its member count), beta the extrapolation factor along the
    velocity blocks, c how many members are averaged per synthetic point.
    """

    alpha: float = 1.0
    beta: float = 1.2
    c: int = 5
    K: int = 60
    seed: int = 0

    def __post_init__(self):
        if self.alpha <= 0 or self.beta <= 0:
            raise ValidationError("alpha and beta must be > 0")
        if self.c < 1:
            raise ValidationError("c must be a positive integer")
        if self.K < 1:
            raise ValidationError("K must be >= 1")
        check_seed(self.seed)


def sphere_weights(c, rng):
    """A point drawn uniformly from the unit sphere in c dimensions."""
    if c < 1:
        raise ValidationError("c must be >= 1")
    while True:
        raw = rng.standard_normal(c)
        norm2 = float(raw @ raw)
        if norm2 > 1e-300:
            return raw / np.sqrt(norm2)


def assign_members(Z, model):
    """Member index sets C_k: points within unit normalized Mahalanobis
    distance of component k. Points may belong to several sets or none."""
    Z = check_matrix(Z, shape=(None, model.n_tot_), name="Z")
    n_tot = model.n_tot_
    members = []
    for g in model.components_:
        m = mahalanobis_normalized_batch(Z, g, n_tot)
        members.append(np.flatnonzero(m <= 1.0))
    return members


def synthesize(points, mu, ns, cfg, rng):
    """Synthetic graph points for one component.

    ``points`` are the member rows (canonical ordering (r, rdot, vb)),
    ``mu`` the component mean. Produces ceil(alpha * N_k) points, or none
    when fewer than c members are available. The r block is combined with
    unit sphere weights only; the rdot and vb blocks are additionally
    scaled by beta.
    """
    points = np.asarray(points, dtype=float)
    n_k = points.shape[0]
    n_tot = points.shape[1] if points.ndim == 2 else 0
    if n_k < cfg.c:
        return np.empty((0, n_tot))
    scale = np.ones(n_tot)
    scale[ns:] = cfg.beta  # rdot and vb blocks
    n_new = int(np.ceil(cfg.alpha * n_k))
    dev = points - mu
    out = np.empty((n_new, n_tot))
    for j in range(n_new):
        picks = rng.integers(n_k, size=cfg.c)
        b = sphere_weights(cfg.c, rng)
        out[j] = mu + scale * (b @ dev[picks])
    return out


class RuledSurfaceAugmenter:
    """Fits a base branching regressor and synthesizes extrapolated points.

    Parameters
    ----------
    ns : int
        Shape dimension; fixes the (r, rdot, vb) block split of the inputs.
    cfg : AugmentConfig
    em : EmConfig, optional
        Mixture settings for the base fit; defaults to cfg's K and seed.

    Attributes
    ----------
    base_ : the regressor fitted on the raw points.
    members_ : per-component member index arrays.
    """

    def __init__(self, ns, cfg: AugmentConfig, em: EmConfig = None):
        self.ns = ns
        self.cfg = cfg
        self.em = em if em is not None else EmConfig(K=cfg.K, seed=cfg.seed)
        if self.em.K != cfg.K:
            raise ValidationError("em.K must match cfg.K")

    def fit(self, X, y):
        base_seed, self._synth_seed, self._refit_seed = spawn_seeds(self.cfg.seed, 3)
        em = self.em
        self.base_ = GaussianBranchingRegressor(
            n_components=em.K, max_iter=em.max_iter, tol=em.tol,
            cov_floor=em.cov_floor, n_init=em.n_init, seed=base_seed,
        ).fit(X, y)
        self._Z = np.hstack([np.asarray(X, dtype=float),
                             np.atleast_2d(np.asarray(y, dtype=float).T).T])
        self.members_ = assign_members(self._Z, self.base_)
        return self

    def augment(self):
        """Synthetic points only, with their source component ids.

        Per-component random streams are derived from (seed, k), so the
        result does not depend on evaluation order.
        """
        if not hasattr(self, "base_"):
            raise ValidationError("augmenter must be fitted first")
        comp_seeds = spawn_seeds(self._synth_seed, len(self.members_))
        chunks, comp_ids = [], []
        for k, idx in enumerate(self.members_):
            rng = np.random.default_rng(comp_seeds[k])
            syn = synthesize(self._Z[idx], self.base_.mixture_.means_[k],
                             self.ns, self.cfg, rng)
            if syn.shape[0]:
                chunks.append(syn)
                comp_ids.append(np.full(syn.shape[0], k))
        if not chunks:
            return np.empty((0, self._Z.shape[1])), np.empty(0, dtype=int)
        return np.vstack(chunks), np.concatenate(comp_ids)

    def fit_augment(self, X, y):
        """Fit, then return the augmented point set and row provenance
        (-1 for original rows, component id for synthetic ones)."""
        self.fit(X, y)
        syn, comp_ids = self.augment()
        Z_all = np.vstack([self._Z, syn])
        provenance = np.concatenate([
            np.full(self._Z.shape[0], -1, dtype=int), comp_ids,
        ])
        return Z_all, provenance


def build_agbr(dataset, cfg: AugmentConfig, em: EmConfig = None):
    """Augmented branching regressor: fit, synthesize, refit with the same K.

    Returns (model, augmenter); the augmenter retains the base fit and the
    synthetic provenance inputs.
    """
    X, y = dataset.graph_arrays()
    aug = RuledSurfaceAugmenter(dataset.ns, cfg, em)
    Z_all, _ = aug.fit_augment(X, y)
    dim_in = 2 * dataset.ns
    em = aug.em
    model = GaussianBranchingRegressor(
        n_components=em.K, max_iter=em.max_iter, tol=em.tol,
        cov_floor=em.cov_floor, n_init=em.n_init, seed=aug._refit_seed,
    ).fit(Z_all[:, :dim_in], Z_all[:, dim_in:])
    return model, aug


def export_augmented_csv(path, dataset, Z_syn, comp_ids, schema):
    """Write original samples plus synthetic graph points with provenance.

    Original rows carry all schema columns; synthetic rows exist only in
    graph space, so their time/pose/phase cells stay blank.
    """
    import csv as _csv

    ns = dataset.ns
    shape_cols = list(schema["shape"])
    vel_cols = schema.get("shape_vel") or [f"d_{c}" for c in shape_cols]
    vb_cols = schema.get("body_vel") or ["vx", "vy", "omega"]
    header = [schema["time"]] + shape_cols + list(vel_cols) + list(vb_cols)
    pose_cols = schema.get("pose")
    if pose_cols is not None:
        header += list(pose_cols)
    phase_col = schema.get("phase")
    if phase_col is not None:
        header.append(phase_col)
    header.append("provenance")

    def fmt(v):
        return repr(float(v))

    with open(path, "w", newline="") as fh:
        writer = _csv.writer(fh)
        writer.writerow(header)
        for tr in dataset.trajectories:
            if tr.rdot is None or tr.vb is None:
                raise ValidationError("dataset must carry rdot and vb")
            for i in range(len(tr)):
                row = [fmt(tr.t[i])]
                row += [fmt(v) for v in tr.r[i]]
                row += [fmt(v) for v in tr.rdot[i]]
                row += [fmt(v) for v in tr.vb[i]]
                if pose_cols is not None:
                    row += [fmt(v) for v in tr.pose[i]] if tr.pose is not None else [""] * 3
                if phase_col is not None:
                    row.append(fmt(tr.phase[i]) if tr.phase is not None else "")
                row.append("original")
                writer.writerow(row)
        for z, k in zip(Z_syn, comp_ids):
            row = [""]
            row += [fmt(v) for v in z[:ns]]
            row += [fmt(v) for v in z[ns:2 * ns]]
            row += [fmt(v) for v in z[2 * ns:]]
            if pose_cols is not None:
                row += [""] * 3
            if phase_col is not None:
                row.append("")
            row.append(f"synthetic:{int(k)}")
            writer.writerow(row)
