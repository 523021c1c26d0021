"""Full-covariance Gaussian mixture fitting by expectation-maximization.

The fitter is deliberately self-contained so that its behavior is pinned:
k-means++-style mean seeding from data points, global covariance as the
initial covariance, uniform initial weights, diagonal regularization scaled
to the data, reseeding of collapsed components, and a recorded
log-likelihood trace. Fits are bit-reproducible for a fixed seed and
invariant to permutations of the input points (rows are canonically sorted
before fitting).
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.special
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .gaussians import GaussianComponent, _LOG_2PI
from .validation import ValidationError, check_matrix, check_seed, spawn_seeds

#: reseed a component whose responsibility mass falls below dim + 1 points
_COLLAPSE_MARGIN = 1.0

#: give up after this many reseeds within a single EM run
_MAX_RESEEDS = 10


class FitError(RuntimeError):
    """Raised when EM cannot produce a usable mixture."""


@dataclass(frozen=True)
class EmConfig:
    """Knobs for one mixture fit; mirrors the run-config file section."""

    K: int
    max_iter: int = 500
    tol: float = 1e-4
    cov_floor: float = 1e-6
    n_init: int = 3
    seed: int = 0

    def __post_init__(self):
        if self.K < 1:
            raise ValidationError("K must be >= 1")
        if self.tol <= 0:
            raise ValidationError("tol must be > 0")
        if self.cov_floor <= 0:
            raise ValidationError("cov_floor must be > 0")
        if self.n_init < 1 or self.max_iter < 1:
            raise ValidationError("n_init and max_iter must be >= 1")


def _kmeanspp_means(X, K, rng):
    """Seed K means from data points, new points drawn with probability
    proportional to squared distance from the chosen set."""
    n = X.shape[0]
    idx = int(rng.integers(n))
    means = [X[idx]]
    d2 = np.sum((X - X[idx]) ** 2, axis=1)
    for _ in range(1, K):
        total = d2.sum()
        if total > 0.0:
            idx = int(rng.choice(n, p=d2 / total))
        else:
            idx = int(rng.integers(n))
        means.append(X[idx])
        d2 = np.minimum(d2, np.sum((X - X[idx]) ** 2, axis=1))
    return np.array(means)


def _log_gauss(X, mean, cov):
    """Rows of X under log N(mean, cov); cov must be SPD."""
    d = X.shape[1]
    L = scipy.linalg.cholesky(cov, lower=True)
    Z = scipy.linalg.solve_triangular(L, (X - mean).T, lower=True)
    logdet = 2.0 * np.sum(np.log(np.diag(L)))
    return -0.5 * (d * _LOG_2PI + logdet + np.sum(Z * Z, axis=0))


class GaussianMixtureEM(BaseEstimator):
    """Gaussian mixture density estimator with full covariances.

    Parameters
    ----------
    n_components : int
        Number of mixture components K.
    max_iter : int
        EM iteration cap per run.
    tol : float
        Relative log-likelihood improvement below which a run stops.
    cov_floor : float
        Diagonal regularization, scaled by trace(global covariance)/dim,
        added to every covariance.
    n_init : int
        Independent EM runs; the best final log-likelihood wins.
    seed : int
        Seed for all randomness (seeding and reseeding).

    Attributes
    ----------
    weights_ : (K,) mixture weights, summing to 1.
    means_ : (K, D) component means.
    covariances_ : (K, D, D) regularized component covariances.
    components_ : list of GaussianComponent.
    loglik_trace_ : per-iteration log-likelihoods of the winning run,
        non-decreasing; restarts if a collapsed component was reseeded.
    n_tot_ : data dimension D.
    """

    def __init__(self, n_components=1, max_iter=500, tol=1e-4, cov_floor=1e-6,
                 n_init=3, seed=0):
        self.n_components = n_components
        self.max_iter = max_iter
        self.tol = tol
        self.cov_floor = cov_floor
        self.n_init = n_init
        self.seed = seed

    @classmethod
    def from_config(cls, cfg: EmConfig):
        return cls(n_components=cfg.K, max_iter=cfg.max_iter, tol=cfg.tol,
                   cov_floor=cfg.cov_floor, n_init=cfg.n_init, seed=cfg.seed)

    def fit(self, X, y=None):
        cfg = EmConfig(K=self.n_components, max_iter=self.max_iter,
                       tol=self.tol, cov_floor=self.cov_floor,
                       n_init=self.n_init, seed=check_seed(self.seed))
        X = check_matrix(X, name="X")
        n, d = X.shape
        if n < cfg.K * (d + 1):
            raise ValidationError(
                f"need at least K*(dim+1) = {cfg.K * (d + 1)} points, got {n}"
            )
        # canonical row order makes the fit independent of input permutation
        X = X[np.lexsort(X.T)]

        global_cov = np.cov(X, rowvar=False, bias=True).reshape(d, d)
        reg = cfg.cov_floor * np.trace(global_cov) / d
        if reg <= 0.0:
            reg = cfg.cov_floor
        init_cov = global_cov + reg * np.eye(d)

        best = None
        for run_seed in spawn_seeds(cfg.seed, cfg.n_init):
            result = self._run_em(X, cfg, init_cov, reg,
                                  np.random.default_rng(run_seed))
            if best is None or result[-1][-1] > best[-1][-1]:
                best = result

        weights, means, covs, trace = best
        self.weights_ = weights
        self.means_ = means
        self.covariances_ = covs
        self.loglik_trace_ = list(trace)
        self.n_tot_ = d
        self.components_ = [
            GaussianComponent(float(weights[k]), means[k], covs[k])
            for k in range(cfg.K)
        ]
        return self

    def _run_em(self, X, cfg, init_cov, reg, rng):
        n, d = X.shape
        K = cfg.K
        weights = np.full(K, 1.0 / K)
        means = _kmeanspp_means(X, K, rng)
        covs = np.repeat(init_cov[None, :, :], K, axis=0)

        def reseed(indices, reseeds):
            reseeds += len(indices)
            if reseeds > _MAX_RESEEDS:
                raise FitError(
                    f"EM component collapse persisted after {_MAX_RESEEDS} reseeds"
                )
            # restart at a random data point with a locally scaled
            # covariance so the reseeded component can compete for mass
            healthy = np.setdiff1d(np.arange(K), indices)
            local_cov = covs[healthy].mean(axis=0) if healthy.size else init_cov
            for k in indices:
                means[k] = X[int(rng.integers(n))]
                covs[k] = local_cov
                weights[k] = 1.0 / K
            return reseeds, weights / weights.sum()

        trace = []
        ll_prev = -np.inf
        reseeds = 0
        it = 0
        while it < cfg.max_iter:
            log_prob = np.empty((n, K))
            for k in range(K):
                log_prob[:, k] = np.log(weights[k]) + _log_gauss(X, means[k], covs[k])
            log_norm = scipy.special.logsumexp(log_prob, axis=1)
            ll = float(log_norm.sum())
            resp = np.exp(log_prob - log_norm[:, None])
            nk = resp.sum(axis=0)

            # a numerically dead component can never recover: reseed now
            dead = np.flatnonzero(nk < 1e-10)
            if dead.size:
                reseeds, weights = reseed(dead, reseeds)
                trace = []
                ll_prev = -np.inf
                continue

            trace.append(ll)
            if np.isfinite(ll_prev) and ll - ll_prev <= cfg.tol * max(abs(ll_prev), 1.0):
                # converged: transient mass dips are over, so components
                # still below the viability mass have truly collapsed
                collapsed = np.flatnonzero(nk < d + _COLLAPSE_MARGIN)
                if collapsed.size:
                    reseeds, weights = reseed(collapsed, reseeds)
                    trace = []
                    ll_prev = -np.inf
                    continue
                return weights, means, covs, trace

            weights = nk / n
            means = (resp.T @ X) / nk[:, None]
            for k in range(K):
                diff = X - means[k]
                covs[k] = (resp[:, k] * diff.T) @ diff / nk[k] + reg * np.eye(d)
            ll_prev = ll
            it += 1

        # ran out of iterations: record the loglik of the final parameters
        log_prob = np.empty((n, K))
        for k in range(K):
            log_prob[:, k] = np.log(weights[k]) + _log_gauss(X, means[k], covs[k])
        trace.append(float(scipy.special.logsumexp(log_prob, axis=1).sum()))
        return weights, means, covs, trace

    def _check_fitted(self):
        if not hasattr(self, "weights_"):
            raise NotFittedError("this mixture has not been fitted")

    def log_weighted_densities(self, X):
        """log(w_k N(x; mu_k, S_k)) for every row/component pair."""
        self._check_fitted()
        X = check_matrix(X, shape=(None, self.n_tot_), name="X")
        out = np.empty((X.shape[0], len(self.weights_)))
        for k, g in enumerate(self.components_):
            L = g.chol()
            Z = scipy.linalg.solve_triangular(L, (X - g.mu).T, lower=True)
            logdet = 2.0 * np.sum(np.log(np.diag(L)))
            out[:, k] = np.log(g.w) - 0.5 * (
                self.n_tot_ * _LOG_2PI + logdet + np.sum(Z * Z, axis=0)
            )
        return out

    def responsibilities(self, X):
        """Posterior component probabilities, one row per point."""
        log_prob = self.log_weighted_densities(X)
        log_norm = scipy.special.logsumexp(log_prob, axis=1)
        return np.exp(log_prob - log_norm[:, None])

    def score_samples(self, X):
        """Per-point log density under the mixture."""
        return scipy.special.logsumexp(self.log_weighted_densities(X), axis=1)

    def to_dict(self):
        self._check_fitted()
        return {
            "kind": "gmm",
            "K": int(len(self.weights_)),
            "n_tot": int(self.n_tot_),
            "seed": int(self.seed),
            "loglik_trace": [float(v) for v in self.loglik_trace_],
            "components": [
                {"w": float(g.w), "mu": g.mu.tolist(), "S": g.S.tolist()}
                for g in self.components_
            ],
        }

    @classmethod
    def from_dict(cls, doc):
        if doc.get("kind") != "gmm":
            raise ValidationError(f"not a gmm document: kind={doc.get('kind')!r}")
        model = cls(n_components=doc["K"], seed=doc.get("seed", 0))
        comps = doc["components"]
        model.weights_ = np.array([c["w"] for c in comps])
        model.means_ = np.array([c["mu"] for c in comps])
        model.covariances_ = np.array([c["S"] for c in comps])
        model.loglik_trace_ = list(doc.get("loglik_trace", []))
        model.n_tot_ = int(doc["n_tot"])
        model.components_ = [
            GaussianComponent(float(c["w"]), np.array(c["mu"]), np.array(c["S"]))
            for c in comps
        ]
        return model


def fit_gmm(points, cfg: EmConfig):
    """Functional wrapper: fit a mixture to flattened graph points."""
    return GaussianMixtureEM.from_config(cfg).fit(points)


def responsibilities(points, model):
    return model.responsibilities(points)
