"""Branch-aware Gaussian mixture regression.

Each mixture component carries a local total-least-squares slope; a query
is weighted by the joint density of (input, previous output), so when the
underlying map is multi-valued the components on the branch consistent
with the previous output dominate the blend and the prediction stays on
that branch.
"""

import numpy as np
import scipy.linalg
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .gaussians import GaussianComponent, TLS_COND_MAX, _LOG_2PI, tls_extract
from .mixture import EmConfig, GaussianMixtureEM
from .validation import ValidationError, check_matrix, check_vector

#: when log sum(c_k) falls below this, every weight has underflowed and the
#: prediction falls back to the component nearest in Mahalanobis distance
LOG_UNDERFLOW = -700.0


class GaussianBranchingRegressor(BaseEstimator):
    """Mixture-of-local-TLS regressor conditioned on the previous output.

    Parameters mirror GaussianMixtureEM; the input/output split is taken
    from the shapes passed to fit.

    Attributes
    ----------
    mixture_ : fitted GaussianMixtureEM over the joint (input, output) space.
    slopes_ : (K, dim_out, dim_in) local slopes (zero where tls_ok_ is False).
    tls_ok_ : (K,) bool; False marks components with a near-vertical tangent
        that contribute their output mean only.
    dim_in_, dim_out_ : block sizes of the joint space.
    """

    def __init__(self, n_components=8, max_iter=500, tol=1e-4, cov_floor=1e-6,
                 n_init=3, seed=0):
        self.n_components = n_components
        self.max_iter = max_iter
        self.tol = tol
        self.cov_floor = cov_floor
        self.n_init = n_init
        self.seed = seed

    def fit(self, X, y):
        X = check_matrix(np.atleast_2d(np.asarray(X, dtype=float)).T
                         if np.asarray(X).ndim == 1 else X, name="X")
        y = np.asarray(y, dtype=float)
        if y.ndim == 1:
            y = y[:, None]
        y = check_matrix(y, shape=(X.shape[0], None), name="y")
        Z = np.hstack([X, y])
        mixture = GaussianMixtureEM(
            n_components=self.n_components, max_iter=self.max_iter,
            tol=self.tol, cov_floor=self.cov_floor, n_init=self.n_init,
            seed=self.seed,
        ).fit(Z)
        self._attach(mixture, X.shape[1], y.shape[1])
        return self

    def _attach(self, mixture, dim_in, dim_out):
        self.mixture_ = mixture
        self.dim_in_ = dim_in
        self.dim_out_ = dim_out
        K = len(mixture.weights_)
        self.slopes_ = np.zeros((K, dim_out, dim_in))
        self.tls_ok_ = np.zeros(K, dtype=bool)
        comps = []
        for k, g in enumerate(mixture.components_):
            A, ok = tls_extract(g.S, dim_in, dim_out, TLS_COND_MAX)
            self.slopes_[k] = A
            self.tls_ok_[k] = ok
            comps.append(GaussianComponent(g.w, g.mu, g.S, A, ok))
        self.components_ = comps
        self._build_caches()

    def _build_caches(self):
        K = len(self.components_)
        n = self.dim_in_ + self.dim_out_
        self._mus = self.mixture_.means_
        self._logw = np.log(self.mixture_.weights_)
        self._Linv = np.empty((K, n, n))
        self._logdet = np.empty(K)
        eye = np.eye(n)
        for k, g in enumerate(self.components_):
            L = g.chol()
            self._Linv[k] = scipy.linalg.solve_triangular(L, eye, lower=True)
            self._logdet[k] = 2.0 * np.sum(np.log(np.diag(L)))
        # affine prediction = slopes @ x + offset
        self._offsets = self._mus[:, self.dim_in_:] - np.einsum(
            "koi,ki->ko", self.slopes_, self._mus[:, :self.dim_in_]
        )

    def _check_fitted(self):
        if not hasattr(self, "mixture_"):
            raise NotFittedError("this regressor has not been fitted")

    @property
    def n_tot_(self):
        return self.dim_in_ + self.dim_out_

    def _log_c_and_quad(self, Z):
        """Per-component log c_k and squared Mahalanobis for rows of Z."""
        diff = Z[:, None, :] - self._mus[None, :, :]
        W = np.einsum("kij,nkj->nki", self._Linv, diff)
        quad = np.sum(W * W, axis=2)
        log_c = self._logw[None, :] - 0.5 * (
            self.n_tot_ * _LOG_2PI + self._logdet[None, :] + quad
        )
        return log_c, quad

    def _blend(self, X, log_c, quad):
        affine = np.einsum("koi,ni->nko", self.slopes_, X) + self._offsets[None, :, :]
        peak = log_c.max(axis=1)
        with np.errstate(over="ignore"):
            shifted = np.exp(log_c - np.where(np.isfinite(peak), peak, 0.0)[:, None])
        total = shifted.sum(axis=1)
        confidence = np.where(np.isfinite(peak), peak + np.log(total), -np.inf)
        y_hat = np.empty((X.shape[0], self.dim_out_))
        usable = confidence >= LOG_UNDERFLOW
        if np.any(usable):
            w = shifted[usable] / total[usable, None]
            y_hat[usable] = np.einsum("nk,nko->no", w, affine[usable])
        if np.any(~usable):
            nearest = np.argmin(quad[~usable], axis=1)
            y_hat[~usable] = affine[~usable, nearest]
        return y_hat, confidence

    def predict(self, x, y_prev):
        """Predict one output from an input and the previous output.

        Returns (y_hat, confidence) with confidence = log sum(c_k). Never
        fails on inputs far from the data: when all weights underflow the
        nearest component (in normalized Mahalanobis distance) predicts
        alone and the low confidence reflects it.
        """
        self._check_fitted()
        x = check_vector(np.atleast_1d(np.asarray(x, dtype=float)),
                         dim=self.dim_in_, name="x")
        y_prev = check_vector(np.atleast_1d(np.asarray(y_prev, dtype=float)),
                              dim=self.dim_out_, name="y_prev")
        y_hat, conf = self.predict_batch(x[None, :], y_prev[None, :])
        return y_hat[0], float(conf[0])

    def predict_batch(self, X, Y_prev):
        """Vectorized predict over rows; returns (Y_hat, confidences)."""
        self._check_fitted()
        X = check_matrix(X, shape=(None, self.dim_in_), name="X")
        Y_prev = check_matrix(Y_prev, shape=(X.shape[0], self.dim_out_),
                              name="Y_prev")
        log_c, quad = self._log_c_and_quad(np.hstack([X, Y_prev]))
        return self._blend(X, log_c, quad)

    def predict_trajectory(self, X, y0, observed=None, gain=0.0):
        """Predict a sequence, feeding each prediction back as the next
        previous-output.

        Self-fed by default; passing ``observed`` (one row per step) blends
        it in with weight ``gain``: the next previous-output is
        (1 - gain) * prediction + gain * observation.
        """
        self._check_fitted()
        X = check_matrix(X, shape=(None, self.dim_in_), name="X")
        y0 = check_vector(np.atleast_1d(np.asarray(y0, dtype=float)),
                          dim=self.dim_out_, name="y0")
        if observed is not None:
            observed = check_matrix(observed, shape=(X.shape[0], self.dim_out_),
                                    name="observed")
        if not 0.0 <= gain <= 1.0:
            raise ValidationError("gain must lie in [0, 1]")
        y_prev = y0
        out = np.empty((X.shape[0], self.dim_out_))
        for i in range(X.shape[0]):
            log_c, quad = self._log_c_and_quad(
                np.concatenate([X[i], y_prev])[None, :])
            y_hat, _ = self._blend(X[i][None, :], log_c, quad)
            out[i] = y_hat[0]
            if observed is None:
                y_prev = out[i]
            else:
                y_prev = (1.0 - gain) * out[i] + gain * observed[i]
        return out

    def to_dict(self):
        self._check_fitted()
        doc = self.mixture_.to_dict()
        doc["kind"] = "gbr"
        doc["dim_in"] = int(self.dim_in_)
        doc["dim_out"] = int(self.dim_out_)
        for comp, A, ok in zip(doc["components"], self.slopes_, self.tls_ok_):
            comp["A"] = A.tolist()
            comp["tls_ok"] = bool(ok)
        return doc

    @classmethod
    def from_dict(cls, doc):
        if doc.get("kind") != "gbr":
            raise ValidationError(f"not a gbr document: kind={doc.get('kind')!r}")
        gdoc = dict(doc)
        gdoc["kind"] = "gmm"
        mixture = GaussianMixtureEM.from_dict(gdoc)
        model = cls(n_components=doc["K"], seed=doc.get("seed", 0))
        model._attach(mixture, int(doc["dim_in"]), int(doc["dim_out"]))
        # restore the exact stored slopes (attach recomputes them)
        model.slopes_ = np.array([c["A"] for c in doc["components"]])
        model.tls_ok_ = np.array([c["tls_ok"] for c in doc["components"]])
        model._build_caches()
        return model


def build_gbr(dataset, cfg: EmConfig):
    """Fit a branching regressor on a dataset's flattened graph points."""
    X, y = dataset.graph_arrays()
    return GaussianBranchingRegressor(
        n_components=cfg.K, max_iter=cfg.max_iter, tol=cfg.tol,
        cov_floor=cfg.cov_floor, n_init=cfg.n_init, seed=cfg.seed,
    ).fit(X, y)
