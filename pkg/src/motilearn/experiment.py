"""Experiment protocol: fit models, reconstruct test trajectories, score.

Every run is a pure function of (config, seed, data): outputs carry no
timestamps, files are written in a fixed order with shortest-round-trip
floats, and a manifest records the config hash, seed, code version, and
dataset hashes so equal manifests imply byte-equal outputs.
"""

import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .augment import AugmentConfig, RuledSurfaceAugmenter, build_agbr
from .baselines import GeometricVelocityModel, PhaseVelocityModel
from .data import (Dataset, derive_velocities, export_csv, ingest_csv_many,
                   segment_strides)
from .evaluation import ksde, zscore_loss
from .gbr import GaussianBranchingRegressor
from .mixture import EmConfig
from .se2 import PoseSE2, integrate, stride_displacements
from .serialize import model_to_document, save_model
from .synth import GaitParams, constant_spec, curvature_spec, gait_family, \
    gen_kinematic, gen_variety, merge_datasets
from .validation import ValidationError, check_seed, spawn_seeds

MODEL_NAMES = ("phase", "geometric", "gbr", "agbr")

#: stable per-model seed streams regardless of which models a run requests
_MODEL_SEED_SLOT = {name: i for i, name in enumerate(MODEL_NAMES)}


class StageError(RuntimeError):
    """A pipeline stage failed; partial outputs have been removed."""

    def __init__(self, stage, cause):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass(frozen=True)
class BaselineConfig:
    n_bins: int = 24
    fourier_order: int = 7


@dataclass(frozen=True)
class RunConfig:
    """Everything a run needs; mirrors the JSON config file."""

    seed: int = 0
    models: tuple = ("phase", "geometric", "gbr", "agbr")
    em: EmConfig = field(default_factory=lambda: EmConfig(K=40))
    augment_alpha: float = 1.0
    augment_beta: float = 1.2
    augment_c: int = 5
    baseline: BaselineConfig = field(default_factory=BaselineConfig)
    schema: dict = None
    train: object = None          # list of CSV paths or a generator spec dict
    test: object = None
    out: str = "results"
    #: weight of the observed previous output fed back into the branching
    #: models during evaluation; 0 = purely self-fed
    observer_gain: float = 1.0

    def __post_init__(self):
        check_seed(self.seed)
        models = tuple(self.models)
        for name in models:
            if name not in MODEL_NAMES:
                raise ValidationError(
                    f"unknown model {name!r}; choose from {MODEL_NAMES}")
        if len(set(models)) != len(models):
            raise ValidationError("duplicate model names")
        object.__setattr__(self, "models", models)
        if not 0.0 <= self.observer_gain <= 1.0:
            raise ValidationError("observer_gain must lie in [0, 1]")

    @classmethod
    def from_dict(cls, doc, overrides=None):
        doc = dict(doc)
        doc.update(overrides or {})
        em = doc.get("em", {})
        aug = doc.get("augment", {})
        baseline = doc.get("baseline", {})
        models = doc.get("models")
        if models is None:
            models = [doc["model"]] if "model" in doc else list(MODEL_NAMES)
        try:
            return cls(
                seed=doc.get("seed", 0),
                models=tuple(models),
                em=EmConfig(K=em.get("K", 40), max_iter=em.get("max_iter", 500),
                            tol=em.get("tol", 1e-4),
                            cov_floor=em.get("cov_floor", 1e-6),
                            n_init=em.get("n_init", 3), seed=doc.get("seed", 0)),
                augment_alpha=aug.get("alpha", 1.0),
                augment_beta=aug.get("beta", 1.2),
                augment_c=aug.get("c", 5),
                baseline=BaselineConfig(
                    n_bins=baseline.get("n_bins", 24),
                    fourier_order=baseline.get("fourier_order", 7)),
                schema=doc.get("schema"),
                train=doc.get("train"),
                test=doc.get("test"),
                out=doc.get("out", "results"),
                observer_gain=doc.get("observer_gain", 1.0),
            )
        except KeyError as exc:
            raise ValidationError(f"config missing key {exc}") from None

    def canonical(self):
        """Stable JSON rendering used for hashing."""
        doc = {
            "seed": self.seed,
            "models": list(self.models),
            "em": dataclasses.asdict(self.em),
            "augment": {"alpha": self.augment_alpha, "beta": self.augment_beta,
                        "c": self.augment_c},
            "baseline": dataclasses.asdict(self.baseline),
            "schema": self.schema,
            "train": self.train,
            "test": self.test,
            "observer_gain": self.observer_gain,
        }
        return json.dumps(doc, sort_keys=True)


# ---------------------------------------------------------------------------
# Data resolution

_SPECS = {"curvature": curvature_spec}


def _build_generator_dataset(spec):
    kind = spec.get("kind", "kinematic")
    if kind == "variety":
        raise ValidationError(
            "variety data has no trajectories; use it with 'synth' only")
    if kind != "kinematic":
        raise ValidationError(f"unknown generator kind {kind!r}")
    name = spec.get("spec", "curvature")
    if name == "constant":
        system = constant_spec(np.array(spec["A0"], dtype=float))
    elif name in _SPECS:
        system = _SPECS[name]()
    else:
        raise ValidationError(f"unknown system spec {name!r}")
    if "family" in spec:
        fam = spec["family"]
        return gait_family(
            spec.get("seed", 0), system,
            n_gaits=fam.get("n_gaits", 24), n_strides=fam.get("n_strides", 2),
            amp=tuple(fam.get("amp", (0.9, 1.1))),
            freq=tuple(fam.get("freq", (0.95, 1.05))),
            dphi=tuple(fam.get("dphi", (0.5 * np.pi, 0.7 * np.pi))),
            noise=fam.get("noise", 0.03), vel_noise=fam.get("vel_noise", 0.05),
            dt=spec.get("dt", 1.0 / 120.0))
    gaits = spec.get("gaits")
    if not gaits:
        raise ValidationError(
            "generator spec needs a 'gaits' list or a 'family' section")
    seeds = spawn_seeds(spec.get("seed", 0), len(gaits))
    parts = []
    for gait_doc, seed in zip(gaits, seeds):
        gait = GaitParams(
            amplitudes=tuple(gait_doc["amplitudes"]),
            freq_hz=gait_doc.get("freq_hz", 1.0),
            dphi=gait_doc.get("dphi", np.pi),
            phase_offsets=tuple(gait_doc["phase_offsets"])
            if "phase_offsets" in gait_doc else None,
        )
        parts.append(gen_kinematic(
            system, gait, n_strides=spec.get("n_strides", 10),
            dt=spec.get("dt", 1.0 / 120.0), noise=spec.get("noise", 0.0),
            vel_noise=spec.get("vel_noise", 0.0), seed=seed))
    return merge_datasets(parts)


def resolve_dataset(source, schema):
    """Paths or a generator spec into a derived, stride-segmented dataset."""
    if source is None:
        raise ValidationError("no dataset source given")
    if isinstance(source, dict):
        return _build_generator_dataset(source)
    if isinstance(source, (str, os.PathLike)):
        source = [source]
    if schema is None:
        raise ValidationError("CSV sources need a schema mapping")
    ds = ingest_csv_many(list(source), schema)
    needs_vb = any(tr.vb is None for tr in ds.trajectories)
    ds = derive_velocities(ds, want_vb=needs_vb or any(
        tr.pose is not None for tr in ds.trajectories))
    if all(tr.phase is not None for tr in ds.trajectories):
        ds = segment_strides(ds)
    return ds


def dataset_fingerprint(source):
    h = hashlib.sha256()
    if isinstance(source, dict):
        h.update(json.dumps(source, sort_keys=True).encode())
    else:
        paths = [source] if isinstance(source, (str, os.PathLike)) else source
        for path in paths:
            with open(path, "rb") as fh:
                h.update(fh.read())
    return h.hexdigest()


# ---------------------------------------------------------------------------
# Model fitting / prediction

def _baseline_arrays(ds):
    xs, ys = [], []
    for tr in ds.trajectories:
        if tr.phase is None:
            raise ValidationError("baseline models need a phase column")
        if tr.rdot is None or tr.vb is None:
            raise ValidationError("baseline models need rdot and vb")
        xs.append(np.column_stack([tr.phase, tr.r, tr.rdot]))
        ys.append(tr.vb)
    return np.vstack(xs), np.vstack(ys)


def fit_model(name, train, cfg: RunConfig):
    """Fit one model type on the training dataset."""
    seed = spawn_seeds(cfg.seed, len(MODEL_NAMES))[_MODEL_SEED_SLOT[name]]
    if name in ("phase", "geometric"):
        X, y = _baseline_arrays(train)
        cls = PhaseVelocityModel if name == "phase" else GeometricVelocityModel
        return cls(n_bins=cfg.baseline.n_bins,
                   fourier_order=cfg.baseline.fourier_order).fit(X, y)
    em = dataclasses.replace(cfg.em, seed=seed)
    if name == "gbr":
        X, y = train.graph_arrays()
        return GaussianBranchingRegressor(
            n_components=em.K, max_iter=em.max_iter, tol=em.tol,
            cov_floor=em.cov_floor, n_init=em.n_init, seed=em.seed,
        ).fit(X, y)
    if name == "agbr":
        aug_cfg = AugmentConfig(alpha=cfg.augment_alpha, beta=cfg.augment_beta,
                                c=cfg.augment_c, K=em.K, seed=seed)
        model, _ = build_agbr(train, aug_cfg, em)
        return model
    raise ValidationError(f"unknown model {name!r}")


def predict_vb_series(name, model, tr, observer_gain=1.0):
    """Predicted body velocities along one test trajectory.

    Branching regressors start from the first observed body velocity; the
    previous-output feedback blends the observed previous body velocity
    with weight ``observer_gain`` (0 = purely self-fed). The phase-indexed
    baselines are stateless.
    """
    if tr.rdot is None:
        raise ValidationError("test trajectory lacks rdot")
    if name in ("phase", "geometric"):
        if tr.phase is None:
            raise ValidationError("baseline prediction needs phase")
        return model.predict(np.column_stack([tr.phase, tr.r, tr.rdot]))
    if tr.vb is None:
        raise ValidationError(
            "branching prediction needs the first observed vb")
    X = np.hstack([tr.r, tr.rdot])
    if observer_gain > 0.0:
        return model.predict_trajectory(X, tr.vb[0], observed=tr.vb,
                                        gain=observer_gain)
    return model.predict_trajectory(X, tr.vb[0])


def reconstruct_poses(tr, vb_series):
    g0 = PoseSE2.from_array(tr.pose[0]) if tr.pose is not None \
        else PoseSE2.identity()
    return integrate(vb_series[:-1], np.diff(tr.t), g0=g0)


# ---------------------------------------------------------------------------
# The experiment

@dataclass
class ExperimentReport:
    zscore: dict
    rmse_vb: dict
    n_strides: int
    strides: dict            # model name (or "truth") -> list of [dx, dy, dth]
    provenance: dict
    notes: list

    def to_dict(self):
        return {
            "zscore_loss": self.zscore,
            "rmse_vb": self.rmse_vb,
            "n_strides": self.n_strides,
            "strides": self.strides,
            "provenance": self.provenance,
            "notes": self.notes,
        }


def _records_to_lists(records):
    return [[rec.dx, rec.dy, rec.dtheta] for rec in records]


class _OutputTracker:
    """Tracks files created by a run so a failed stage can remove them."""

    def __init__(self, out_dir):
        self.out_dir = out_dir
        self.created = []

    def path(self, name):
        os.makedirs(self.out_dir, exist_ok=True)
        p = os.path.join(self.out_dir, name)
        self.created.append(p)
        return p

    def cleanup(self):
        for p in self.created:
            try:
                os.remove(p)
            except OSError:
                pass


def write_manifest(tracker, cfg: RunConfig, extra=None):
    doc = {
        "config_hash": hashlib.sha256(cfg.canonical().encode()).hexdigest(),
        "seed": cfg.seed,
        "version": __version__,
        "datasets": extra or {},
    }
    with open(tracker.path("manifest.json"), "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")
    return doc


def _write_csv_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(
                v if isinstance(v, str) else repr(float(v)) for v in row) + "\n")


def _emit_ksde(tracker, label, samples, notes):
    try:
        curve = ksde(samples)
    except ValidationError as exc:
        notes.append(f"ksde skipped for {label}: {exc}")
        return
    _write_csv_rows(tracker.path(f"ksde_{label}.csv"), ["grid", "density"],
                    np.column_stack([curve.grid, curve.density]))


def run_experiment(cfg: RunConfig, emit="full"):
    """Fit every requested model, reconstruct the test set, and emit the
    report into cfg.out; emit="full" also writes models and plot data,
    emit="losses" stops at the scores."""
    if emit not in ("full", "losses"):
        raise ValidationError("emit must be 'full' or 'losses'")
    tracker = _OutputTracker(cfg.out)
    stage = "init"
    try:
        stage = "load-train"
        train = resolve_dataset(cfg.train, cfg.schema)
        stage = "load-test"
        test = resolve_dataset(cfg.test, cfg.schema)
        if not test.stride_ranges:
            raise ValidationError("test set has no complete strides")
        for tr in test.trajectories:
            if tr.pose is None:
                raise ValidationError("test trajectories need poses")

        stage = "fit"
        models = {name: fit_model(name, train, cfg) for name in cfg.models}

        stage = "predict"
        vb_pred = {name: [predict_vb_series(name, model, tr, cfg.observer_gain)
                          for tr in test.trajectories]
                   for name, model in models.items()}

        stage = "evaluate"
        ranges_by_traj = {}
        for ti, a, b in test.stride_ranges:
            ranges_by_traj.setdefault(ti, []).append((a, b))
        truth_records = []
        for ti, tr in enumerate(test.trajectories):
            truth_records += stride_displacements(
                tr.poses(), ranges_by_traj.get(ti, []))
        report = ExperimentReport(
            zscore={}, rmse_vb={}, n_strides=len(truth_records),
            strides={"truth": _records_to_lists(truth_records)},
            provenance={
                "config_hash": hashlib.sha256(cfg.canonical().encode()).hexdigest(),
                "seed": cfg.seed,
                "version": __version__,
                "train": dataset_fingerprint(cfg.train),
                "test": dataset_fingerprint(cfg.test),
            },
            notes=[],
        )
        pred_records = {}
        for name in cfg.models:
            recs = []
            sq_err = []
            for ti, tr in enumerate(test.trajectories):
                series = vb_pred[name][ti]
                poses = reconstruct_poses(tr, series)
                recs += stride_displacements(poses, ranges_by_traj.get(ti, []))
                if tr.vb is not None:
                    sq_err.append((series - tr.vb) ** 2)
            pred_records[name] = recs
            report.strides[name] = _records_to_lists(recs)
            report.zscore[name] = zscore_loss(recs, truth_records)
            if sq_err:
                report.rmse_vb[name] = float(
                    np.sqrt(np.mean(np.vstack(sq_err))))

        stage = "emit"
        manifest_extra = {"train": report.provenance["train"],
                          "test": report.provenance["test"]}
        write_manifest(tracker, cfg, manifest_extra)
        if emit == "full":
            for name in sorted(models):
                save_model(models[name], tracker.path(f"model_{name}.json"))
            header = ["dx", "dy", "dtheta"]
            _write_csv_rows(tracker.path("strides_truth.csv"), header,
                            report.strides["truth"])
            for name in cfg.models:
                _write_csv_rows(tracker.path(f"strides_{name}.csv"), header,
                                report.strides[name])
            truth_arr = np.array(report.strides["truth"])
            for qi, q in enumerate(("x", "y", "theta")):
                _emit_ksde(tracker, f"pred_{q}_truth", truth_arr[:, qi],
                           report.notes)
                for name in cfg.models:
                    arr = np.array(report.strides[name])
                    _emit_ksde(tracker, f"pred_{q}_{name}", arr[:, qi],
                               report.notes)
                    _emit_ksde(tracker, f"resid_{q}_{name}",
                               arr[:, qi] - truth_arr[:, qi], report.notes)
            for ti, tr in enumerate(test.trajectories):
                marker = np.zeros(len(tr), dtype=int)
                for a, _ in ranges_by_traj.get(ti, []):
                    marker[a] = 1
                rows = []
                for i in range(len(tr)):
                    rows.append([tr.t[i], tr.pose[i, 0], tr.pose[i, 1],
                                 tr.pose[i, 2], "truth", str(int(marker[i]))])
                for name in cfg.models:
                    poses = reconstruct_poses(tr, vb_pred[name][ti])
                    for i, g in enumerate(poses):
                        rows.append([tr.t[i], g.x, g.y, g.theta, name,
                                     str(int(marker[i]))])
                _write_csv_rows(
                    tracker.path(f"traj_{ti:03d}.csv"),
                    ["t", "x", "y", "theta", "model", "stride_marker"], rows)
        with open(tracker.path("report.json"), "w") as fh:
            json.dump(report.to_dict(), fh, indent=1, sort_keys=True)
            fh.write("\n")
        return report
    except Exception as exc:
        tracker.cleanup()
        if isinstance(exc, StageError):
            raise
        raise StageError(stage, exc) from exc


# ---------------------------------------------------------------------------
# Verb helpers shared with the CLI

def synth_outputs(spec, out_dir, schema):
    """Write generator output as CSV files; returns the created paths."""
    tracker = _OutputTracker(out_dir)
    try:
        kind = spec.get("kind", "kinematic")
        if kind == "variety":
            pts = gen_variety(spec.get("n", 1000), spec.get("noise", 0.15),
                              spec.get("seed", 0))
            path = tracker.path("variety.csv")
            _write_csv_rows(path, ["x", "y"], pts)
            return [path]
        ds = _build_generator_dataset(spec)
        if schema is None:
            schema = default_schema(ds.ns)
        paths = []
        for ti, tr in enumerate(ds.trajectories):
            sub = Dataset(trajectories=(tr,))
            path = tracker.path(f"gait_{ti:03d}.csv")
            export_csv(sub, path, schema)
            paths.append(path)
        return paths
    except Exception as exc:
        tracker.cleanup()
        if isinstance(exc, (ValidationError, StageError)):
            raise
        raise StageError("synth", exc) from exc


def default_schema(ns):
    return {
        "time": "t",
        "shape": [f"r{i}" for i in range(ns)],
        "shape_vel": [f"dr{i}" for i in range(ns)],
        "pose": ["x", "y", "theta"],
        "phase": "phi",
        "body_vel": ["vx", "vy", "omega"],
    }


def augment_outputs(cfg: RunConfig, out_dir):
    """Fit the base regressor, synthesize, export augmented CSV."""
    from .augment import export_augmented_csv

    tracker = _OutputTracker(out_dir)
    try:
        train = resolve_dataset(cfg.train, cfg.schema)
        seed = spawn_seeds(cfg.seed, len(MODEL_NAMES))[_MODEL_SEED_SLOT["agbr"]]
        aug_cfg = AugmentConfig(alpha=cfg.augment_alpha, beta=cfg.augment_beta,
                                c=cfg.augment_c, K=cfg.em.K, seed=seed)
        em = dataclasses.replace(cfg.em, seed=seed)
        aug = RuledSurfaceAugmenter(train.ns, aug_cfg, em)
        X, y = train.graph_arrays()
        aug.fit(X, y)
        syn, comp_ids = aug.augment()
        schema = cfg.schema or default_schema(train.ns)
        path = tracker.path("augmented.csv")
        export_augmented_csv(path, train, syn, comp_ids, schema)
        write_manifest(tracker, cfg, {"train": dataset_fingerprint(cfg.train)})
        return path, syn.shape[0]
    except Exception as exc:
        tracker.cleanup()
        if isinstance(exc, StageError):
            raise
        raise StageError("augment", exc) from exc


def model_kind(model):
    return model_to_document(model)["kind"]
