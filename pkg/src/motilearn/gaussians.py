"""Single-Gaussian primitives: densities, Mahalanobis distance, TLS slopes.

A fitted mixture component models a patch of the graph of a map from an
input block to an output block; the input block always precedes the output
block in the flattened coordinates. The total-least-squares slope of that
patch comes out of the covariance eigendecomposition.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .validation import ValidationError, check_spd, check_vector

#: relative diagonal floor applied to covariances before factorization
COV_EIG_FLOOR = 1e-9

#: condition number of the output-output eigenvector block above which the
#: local tangent is treated as vertical and no slope is extracted
TLS_COND_MAX = 1e8

_LOG_2PI = np.log(2.0 * np.pi)


def regularize_cov(S, floor=COV_EIG_FLOOR):
    """Symmetrize S and lift its diagonal by floor * trace(S) / n."""
    S = check_spd(S, name="S")
    n = S.shape[0]
    bump = floor * np.trace(S) / n
    if bump <= 0.0:
        bump = floor
    return S + bump * np.eye(n)


def tls_extract(S, dim_in, dim_out, cond_max=TLS_COND_MAX):
    """Total-least-squares slope of the graph patch encoded by covariance S.

    Eigendecomposes S with eigenvalues sorted non-increasing, takes the rows
    of the (transposed) eigenvector matrix belonging to the ``dim_out``
    smallest eigenvalues, and solves for the slope mapping the input block
    to the output block.

    Parameters
    ----------
    S : (n, n) array, symmetric PSD, with n = dim_in + dim_out.
    dim_in, dim_out : block sizes; input block first.
    cond_max : condition-number cutoff for the output-output block.

    Returns
    -------
    A : (dim_out, dim_in) array — zero when extraction failed.
    ok : bool — False when the local tangent is near-vertical.
    """
    S = check_spd(S, name="S")
    n = S.shape[0]
    if dim_in + dim_out != n:
        raise ValidationError(
            f"dim_in + dim_out = {dim_in + dim_out} must equal dim(S) = {n}"
        )
    w, V = np.linalg.eigh(S)
    order = np.argsort(-w, kind="stable")
    U = V[:, order].T  # rows are eigenvectors, eigenvalues non-increasing
    Uy = U[n - dim_out:, :]
    Uyx = Uy[:, :dim_in]
    Uyy = Uy[:, dim_in:]
    sv = np.linalg.svd(Uyy, compute_uv=False)
    if sv[-1] <= 0.0 or sv[0] / sv[-1] > cond_max:
        return np.zeros((dim_out, dim_in)), False
    A = -np.linalg.solve(Uyy, Uyx)
    return A, True


@dataclass(frozen=True)
class GaussianComponent:
    """One weighted Gaussian over the flattened graph space.

    The stored covariance is symmetrized and diagonally floored at
    construction, so factorizations never fail on degenerate graph data.
    ``A`` and ``tls_ok`` cache the extracted slope when the component is
    used for regression; they stay None/False for plain density work.
    """

    w: float
    mu: np.ndarray
    S: np.ndarray
    A: np.ndarray = None
    tls_ok: bool = False
    _chol: np.ndarray = field(default=None, repr=False, compare=False)

    @staticmethod
    def from_moments(w, mu, S, dim_out=None, cond_max=TLS_COND_MAX):
        """Build a component from raw moments, extracting the TLS slope
        when ``dim_out`` is given."""
        mu = check_vector(mu, name="mu")
        S = regularize_cov(S)
        if S.shape[0] != mu.shape[0]:
            raise ValidationError("mu and S dimensions disagree")
        if w < 0:
            raise ValidationError("weight must be nonnegative")
        A, ok = (None, False)
        if dim_out is not None:
            A, ok = tls_extract(S, S.shape[0] - dim_out, dim_out, cond_max)
        chol = scipy.linalg.cholesky(S, lower=True)
        g = GaussianComponent(float(w), mu, S, A, ok)
        object.__setattr__(g, "_chol", chol)
        return g

    @property
    def dim(self):
        return self.mu.shape[0]

    def chol(self):
        if self._chol is None:
            object.__setattr__(self, "_chol", scipy.linalg.cholesky(self.S, lower=True))
        return self._chol


def log_density(x, g):
    """log N(x; mu, S) via the Cholesky factor of S."""
    x = check_vector(x, name="x")
    if x.shape[0] != g.dim:
        raise ValidationError(f"x has dim {x.shape[0]}, component has dim {g.dim}")
    L = g.chol()
    z = scipy.linalg.solve_triangular(L, x - g.mu, lower=True)
    logdet = 2.0 * np.sum(np.log(np.diag(L)))
    return -0.5 * (g.dim * _LOG_2PI + logdet + z @ z)


def log_density_batch(X, g):
    """Vectorized log N(x_i; mu, S) for rows of X."""
    L = g.chol()
    Z = scipy.linalg.solve_triangular(L, (X - g.mu).T, lower=True)
    logdet = 2.0 * np.sum(np.log(np.diag(L)))
    return -0.5 * (g.dim * _LOG_2PI + logdet + np.sum(Z * Z, axis=0))


def mahalanobis_normalized(x, g, n_tot=None):
    """Squared Mahalanobis distance of x from the component, divided by the
    total dimension; at most 1 means the point is typical for it."""
    x = check_vector(x, name="x")
    if n_tot is None:
        n_tot = g.dim
    if x.shape[0] != g.dim:
        raise ValidationError(f"x has dim {x.shape[0]}, component has dim {g.dim}")
    L = g.chol()
    z = scipy.linalg.solve_triangular(L, x - g.mu, lower=True)
    return float(z @ z) / n_tot


def mahalanobis_normalized_batch(X, g, n_tot=None):
    if n_tot is None:
        n_tot = g.dim
    L = g.chol()
    Z = scipy.linalg.solve_triangular(L, (X - g.mu).T, lower=True)
    return np.sum(Z * Z, axis=0) / n_tot
