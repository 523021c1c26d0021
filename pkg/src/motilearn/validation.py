"""Input validation helpers shared by the estimators and the CLI."""

import numpy as np


class ValidationError(ValueError):
    """Raised for invalid inputs (bad shapes, non-monotone time, bad configs).

    CLI maps this to exit code 2.
    """


class ParseError(ValidationError):
    """Raised for malformed file content; carries the offending line number."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


def check_vector(x, dim=None, name="x"):
    """Coerce to a 1-D float64 array, optionally enforcing its length."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValidationError(f"{name} must be 1-D, got shape {x.shape}")
    if dim is not None and x.shape[0] != dim:
        raise ValidationError(f"{name} must have length {dim}, got {x.shape[0]}")
    if not np.all(np.isfinite(x)):
        raise ValidationError(f"{name} contains non-finite values")
    return x


def check_matrix(x, shape=None, name="X"):
    """Coerce to a 2-D float64 array, optionally enforcing its shape."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 2:
        raise ValidationError(f"{name} must be 2-D, got shape {x.shape}")
    if shape is not None:
        want = tuple(-1 if s is None else s for s in shape)
        for axis, s in enumerate(want):
            if s >= 0 and x.shape[axis] != s:
                raise ValidationError(
                    f"{name} must have shape {shape}, got {x.shape}"
                )
    if not np.all(np.isfinite(x)):
        raise ValidationError(f"{name} contains non-finite values")
    return x


def check_spd(S, name="S", sym_rtol=1e-12, eig_floor=0.0):
    """Validate a symmetric positive semi-definite matrix.

    Symmetry is required to ``sym_rtol`` relative to the largest entry;
    eigenvalues may dip below zero only by a roundoff-sized margin.
    Returns the symmetrized matrix.
    """
    S = check_matrix(S, name=name)
    n = S.shape[0]
    if S.shape[1] != n:
        raise ValidationError(f"{name} must be square, got {S.shape}")
    scale = max(np.abs(S).max(), 1.0)
    if np.abs(S - S.T).max() > sym_rtol * scale * n:
        raise ValidationError(f"{name} is not symmetric")
    S = 0.5 * (S + S.T)
    w = np.linalg.eigvalsh(S)
    if w.min() < eig_floor - 1e-10 * scale:
        raise ValidationError(
            f"{name} is not positive semi-definite (min eigenvalue {w.min():.3e})"
        )
    return S


def check_seed(seed, name="seed"):
    if not isinstance(seed, (int, np.integer)) or isinstance(seed, bool):
        raise ValidationError(f"{name} must be an integer, got {seed!r}")
    return int(seed)


def spawn_seeds(seed, n):
    """Derive ``n`` independent child seeds from one integer seed.

    Children are stable for a given (seed, n) regardless of the order in
    which they are consumed, so per-component work may be scheduled freely.
    """
    ss = np.random.SeedSequence(check_seed(seed))
    return [int(child.generate_state(1, dtype=np.uint64)[0]) for child in ss.spawn(n)]
