"""Phase-indexed baseline models for body velocity.

The geometric baseline bins samples by gait phase, fits a per-bin linear
correction of body velocity in the shape and shape-velocity deviations
from the bin means, and interpolates every binned quantity over phase with
a truncated Fourier series. The phase baseline is the same model with the
corrections dropped: phase-averaged body velocity only.
"""

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .validation import ValidationError, check_matrix


@dataclass(frozen=True)
class PhaseBin:
    """Averages and first-order correction tensors for one phase bin."""

    phi_center: float
    mean_vb: np.ndarray
    mean_r: np.ndarray
    mean_rdot: np.ndarray
    B_r: np.ndarray          # (Nb, Ns)
    B_rdot: np.ndarray       # (Nb, Ns)
    count: int
    determined: bool


class FourierSeries:
    """Least-squares truncated Fourier fit of samples on [0, 2*pi).

    Fits values of any trailing shape given at a common set of phase
    points; evaluation is exactly 2*pi-periodic.
    """

    def __init__(self, order, phis, values):
        values = np.asarray(values, dtype=float)
        phis = np.asarray(phis, dtype=float)
        if 2 * order + 1 > phis.size:
            raise ValidationError(
                f"fourier order {order} needs at least {2 * order + 1} phase points"
            )
        self.order = int(order)
        self.value_shape = values.shape[1:]
        design = self._design(phis)
        flat = values.reshape(phis.size, -1)
        coeffs, *_ = np.linalg.lstsq(design, flat, rcond=None)
        self.coeffs = coeffs
        resid = design @ coeffs - flat
        self.residual_rms = float(np.sqrt(np.mean(resid**2)))

    def _design(self, phis):
        cols = [np.ones_like(phis)]
        for m in range(1, self.order + 1):
            cols.append(np.cos(m * phis))
            cols.append(np.sin(m * phis))
        return np.column_stack(cols)

    def __call__(self, phi):
        phi = np.atleast_1d(np.asarray(phi, dtype=float))
        out = self._design(phi) @ self.coeffs
        out = out.reshape(phi.shape + self.value_shape)
        return out

    def to_dict(self):
        return {
            "order": self.order,
            "value_shape": list(self.value_shape),
            "coeffs": self.coeffs.tolist(),
            "residual_rms": self.residual_rms,
        }

    @classmethod
    def from_dict(cls, doc):
        obj = cls.__new__(cls)
        obj.order = int(doc["order"])
        obj.value_shape = tuple(doc["value_shape"])
        obj.coeffs = np.array(doc["coeffs"])
        obj.residual_rms = float(doc["residual_rms"])
        return obj


class GeometricVelocityModel(BaseEstimator):
    """Phase-binned, first-order-corrected body velocity model.

    fit expects X with columns [phase, r (Ns), rdot (Ns)] and y the body
    velocities (N, Nb). Bins are uniform in phase and left-closed.

    Attributes
    ----------
    bins_ : list of PhaseBin.
    fourier_ : dict of FourierSeries keyed by quantity name.
    ns_, nb_ : block dimensions.
    """

    def __init__(self, n_bins=24, fourier_order=7):
        self.n_bins = n_bins
        self.fourier_order = fourier_order

    def fit(self, X, y):
        if self.n_bins < 1:
            raise ValidationError("n_bins must be >= 1")
        if 2 * self.fourier_order >= self.n_bins:
            raise ValidationError(
                "fourier_order must be below n_bins / 2 to avoid aliasing"
            )
        X = check_matrix(X, name="X")
        y = check_matrix(y, shape=(X.shape[0], None), name="y")
        if X.shape[1] < 3 or (X.shape[1] - 1) % 2:
            raise ValidationError("X columns must be [phase, r..., rdot...]")
        ns = (X.shape[1] - 1) // 2
        nb = y.shape[1]
        phi = X[:, 0]
        if np.any(phi < 0) or np.any(phi >= 2 * np.pi):
            raise ValidationError("phase values must lie in [0, 2*pi)")
        r = X[:, 1:1 + ns]
        rdot = X[:, 1 + ns:]

        width = 2 * np.pi / self.n_bins
        which = np.minimum((phi // width).astype(int), self.n_bins - 1)
        bins = []
        for b in range(self.n_bins):
            idx = np.flatnonzero(which == b)
            if idx.size == 0:
                raise ValidationError(
                    f"phase bin {b} is empty; use fewer bins"
                )
            mean_r = r[idx].mean(axis=0)
            mean_rdot = rdot[idx].mean(axis=0)
            mean_vb = y[idx].mean(axis=0)
            determined = idx.size >= 2 * ns + 1
            if determined:
                design = np.hstack([
                    np.ones((idx.size, 1)),
                    r[idx] - mean_r,
                    rdot[idx] - mean_rdot,
                ])
                coef, *_ = np.linalg.lstsq(design, y[idx], rcond=None)
                B_r = coef[1:1 + ns].T
                B_rdot = coef[1 + ns:].T
            else:
                B_r = np.zeros((nb, ns))
                B_rdot = np.zeros((nb, ns))
            bins.append(PhaseBin(
                phi_center=(b + 0.5) * width,
                mean_vb=mean_vb, mean_r=mean_r, mean_rdot=mean_rdot,
                B_r=B_r, B_rdot=B_rdot,
                count=int(idx.size), determined=determined,
            ))
        self.bins_ = bins
        self.ns_ = ns
        self.nb_ = nb
        centers = np.array([pb.phi_center for pb in bins])
        # the regression intercept equals mean_vb exactly (centered design),
        # so the bin average serves as v0
        stacks = {
            "v0": np.array([pb.mean_vb for pb in bins]),
            "mean_r": np.array([pb.mean_r for pb in bins]),
            "mean_rdot": np.array([pb.mean_rdot for pb in bins]),
            "B_r": np.array([pb.B_r for pb in bins]),
            "B_rdot": np.array([pb.B_rdot for pb in bins]),
        }
        self.fourier_ = {
            name: FourierSeries(self.fourier_order, centers, values)
            for name, values in stacks.items()
        }
        return self

    def _check_fitted(self):
        if not hasattr(self, "bins_"):
            raise NotFittedError("this model has not been fitted")

    def predict(self, X):
        """v0(phi) + B_r(phi) (r - mean_r(phi)) + B_rdot(phi) (rdot - mean_rdot(phi))."""
        self._check_fitted()
        X = check_matrix(X, shape=(None, 1 + 2 * self.ns_), name="X")
        phi = X[:, 0]
        r = X[:, 1:1 + self.ns_]
        rdot = X[:, 1 + self.ns_:]
        v0 = self.fourier_["v0"](phi)
        dr = r - self.fourier_["mean_r"](phi)
        drdot = rdot - self.fourier_["mean_rdot"](phi)
        B_r = self.fourier_["B_r"](phi)
        B_rdot = self.fourier_["B_rdot"](phi)
        return (v0 + np.einsum("nij,nj->ni", B_r, dr)
                + np.einsum("nij,nj->ni", B_rdot, drdot))

    def predict_phase_only(self, phi):
        """The phase baseline: interpolated phase-averaged velocity alone."""
        self._check_fitted()
        return self.fourier_["v0"](np.asarray(phi, dtype=float))

    def to_dict(self):
        self._check_fitted()
        return {
            "kind": "geometric",
            "n_bins": int(self.n_bins),
            "fourier_order": int(self.fourier_order),
            "ns": int(self.ns_),
            "nb": int(self.nb_),
            "bins": [
                {
                    "phi_center": pb.phi_center,
                    "mean_vb": pb.mean_vb.tolist(),
                    "mean_r": pb.mean_r.tolist(),
                    "mean_rdot": pb.mean_rdot.tolist(),
                    "B_r": pb.B_r.tolist(),
                    "B_rdot": pb.B_rdot.tolist(),
                    "count": pb.count,
                    "determined": pb.determined,
                }
                for pb in self.bins_
            ],
            "fourier": {name: f.to_dict() for name, f in self.fourier_.items()},
        }

    @classmethod
    def from_dict(cls, doc):
        if doc.get("kind") not in ("geometric", "phase"):
            raise ValidationError(f"not a baseline document: {doc.get('kind')!r}")
        model = cls(n_bins=doc["n_bins"], fourier_order=doc["fourier_order"])
        model.ns_ = int(doc["ns"])
        model.nb_ = int(doc["nb"])
        model.bins_ = [
            PhaseBin(
                phi_center=float(b["phi_center"]),
                mean_vb=np.array(b["mean_vb"]),
                mean_r=np.array(b["mean_r"]),
                mean_rdot=np.array(b["mean_rdot"]),
                B_r=np.array(b["B_r"]),
                B_rdot=np.array(b["B_rdot"]),
                count=int(b["count"]),
                determined=bool(b["determined"]),
            )
            for b in doc["bins"]
        ]
        model.fourier_ = {
            name: FourierSeries.from_dict(f) for name, f in doc["fourier"].items()
        }
        return model


class PhaseVelocityModel(GeometricVelocityModel):
    """The geometric model with its corrections forced to zero."""

    def predict(self, X):
        self._check_fitted()
        X = check_matrix(X, name="X")
        return self.predict_phase_only(X[:, 0])

    def to_dict(self):
        doc = super().to_dict()
        doc["kind"] = "phase"
        return doc
