"""Dense real linear algebra primitives.

The ambient norm throughout the package is the Euclidean operator norm.  With
that choice the distance to rank-``k`` matrices is the ``(k+1)``-th singular
value, so every functional used elsewhere is exactly computable.
"""

import numpy as np

ABS_TOL = 1e-12
REL_TOL = 1e-10


class ValidationError(ValueError):
    """Input violates a documented precondition."""


class DimensionError(ValidationError):
    """Input has the wrong shape."""


def close(a, b, abs_tol=ABS_TOL, rel_tol=REL_TOL):
    """The package-wide comparison: absolute floor plus relative slack."""
    return abs(a - b) <= abs_tol + rel_tol * max(abs(a), abs(b))


def leq(a, b, abs_tol=ABS_TOL, rel_tol=REL_TOL):
    """``a <= b`` up to the package tolerance."""
    return a <= b + abs_tol + rel_tol * max(abs(a), abs(b))


def as_matrix(m, square=False):
    """Validate and return ``m`` as a 2-D float64 array."""
    try:
        arr = np.asarray(m, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"not a real matrix: {exc}") from None
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DimensionError(f"expected a non-empty 2-D array, got shape {arr.shape}")
    if square and arr.shape[0] != arr.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError("matrix has non-finite entries")
    return arr


def spectral_radius(m):
    """Largest eigenvalue modulus of a square real matrix."""
    a = as_matrix(m, square=True)
    return float(np.max(np.abs(np.linalg.eigvals(a))))


def singular_values(m):
    """Full singular spectrum, nonincreasing, length ``min(rows, cols)``."""
    a = as_matrix(m)
    return np.linalg.svd(a, compute_uv=False)


def operator_norm(m):
    """Euclidean operator norm (largest singular value)."""
    return float(singular_values(m)[0])


def distance_to_rank(m, k):
    """Distance in operator norm from ``m`` to the matrices of rank at most ``k``.

    By Eckart-Young-Mirsky this is ``sigma_{k+1}(m)``, and zero once ``k`` reaches
    ``min(rows, cols)``.
    """
    if k < 0:
        raise ValidationError("rank must be nonnegative")
    s = singular_values(m)
    return float(s[k]) if k < s.size else 0.0
