"""Input validation helpers shared by the estimators and the functional core."""

import numbers

import numpy as np

from .exceptions import InputError, SymmetryError


def relative_asymmetry(A, weights=None):
    """Return ||WA - (WA)^T|| / ||WA|| with W = diag(weights) (0 for A = 0)."""
    A = np.asarray(A, dtype=float)
    WA = A if weights is None else np.asarray(weights)[:, None] * A
    scale = np.linalg.norm(WA)
    if scale == 0.0:
        return 0.0
    return float(np.linalg.norm(WA - WA.T) / scale)


def check_square(A, name="matrix", size=None):
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise InputError(f"{name} must be a square matrix, got shape {A.shape}")
    if size is not None and A.shape[0] != size:
        raise InputError(f"{name} must be {size}x{size}, got {A.shape}")
    if not np.all(np.isfinite(A)):
        raise InputError(f"{name} contains non-finite entries")
    return A


def check_symmetric(A, name="matrix", weights=None, tol=1e-8):
    """Validate that diag(weights) @ A is symmetric to relative tolerance ``tol``.

    Returns the matrix unchanged; raises :class:`SymmetryError` with the
    measured defect otherwise.
    """
    A = check_square(A, name)
    defect = relative_asymmetry(A, weights)
    if defect > tol:
        raise SymmetryError(f"{name} is not symmetric in the weighted pairing", defect)
    return A


def check_vector(x, size, name="vector"):
    x = np.asarray(x, dtype=float)
    if x.shape != (size,):
        raise InputError(f"{name} must have shape ({size},), got {x.shape}")
    return x


def check_tau(tau):
    if not isinstance(tau, numbers.Real) or not (0.0 < float(tau) <= 1.0):
        raise InputError(f"tau must lie in (0, 1], got {tau!r}")
    return float(tau)


def check_positive(value, name):
    if not isinstance(value, numbers.Real) or not float(value) > 0.0:
        raise InputError(f"{name} must be positive, got {value!r}")
    return float(value)


def check_grid_size(d, n):
    if d not in (1, 2):
        raise InputError(f"spatial dimension d must be 1 or 2, got {d!r}")
    if not isinstance(n, numbers.Integral) or n < 5 or n % 2 == 0:
        raise InputError(f"nodes per side n must be an odd integer >= 5, got {n!r}")
    return int(d), int(n)
