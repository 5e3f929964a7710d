from __future__ import annotations

from typing import TYPE_CHECKING

import numpy as np
from scipy import linalg

from rarevent.exceptions import FactorizationError

if TYPE_CHECKING:
    from rarevent.typing import FloatArray

_EPS = float(np.finfo(np.float64).eps)


def _negligible(pivot: float, scale: float, n: int) -> bool:
    # Squared Cholesky pivot at the level of rounding noise: the matrix is singular.
    return not pivot > 10.0 * n * _EPS * scale


def cholesky_lower(K: FloatArray) -> FloatArray:
    """
    Lower-triangular factor of a symmetric positive-definite matrix.

    Raises:
        FactorizationError: if `K` is not positive definite, including when a pivot is
            no larger than the rounding noise of the factorization (an exactly
            singular `K`, such as duplicate inputs without a nugget).
    """
    try:
        L = linalg.cholesky(K, lower=True, check_finite=True)
    except (linalg.LinAlgError, ValueError) as exc:
        msg = f"Matrix of size {K.shape[0]} is not positive definite"
        raise FactorizationError(msg) from exc
    n = K.shape[0]
    smallest = float(np.min(np.diag(L))) ** 2 if n else 1.0
    if n and _negligible(smallest, float(np.max(np.diag(K))), n):
        msg = (
            f"Matrix of size {n} is numerically singular "
            f"(smallest squared pivot {smallest:.3e})"
        )
        raise FactorizationError(msg)
    return L  # type: ignore[no-any-return]


def cholesky_append(L: FloatArray, k_new: FloatArray, k_self: float) -> FloatArray:
    """
    Extend the factor of `K` to the factor of `[[K, k_new], [k_new.T, k_self]]`.

    Costs O(n^2) instead of the O(n^3) of a full factorization.
    """
    n = L.shape[0]
    row = linalg.solve_triangular(L, k_new, lower=True, check_finite=False)
    pivot = k_self - float(row @ row)
    if not np.isfinite(pivot) or _negligible(pivot, k_self, n + 1):
        msg = f"Appending row {n} breaks positive definiteness (pivot {pivot:.3e})"
        raise FactorizationError(msg)
    out = np.zeros((n + 1, n + 1))
    out[:n, :n] = L
    out[n, :n] = row
    out[n, n] = np.sqrt(pivot)
    return out


def cholesky_solve(L: FloatArray, b: FloatArray) -> FloatArray:
    return linalg.cho_solve((L, True), b, check_finite=False)  # type: ignore[no-any-return]


def solve_lower(L: FloatArray, b: FloatArray) -> FloatArray:
    return linalg.solve_triangular(L, b, lower=True, check_finite=False)  # type: ignore[no-any-return]


def log_det(L: FloatArray) -> float:
    """log|K| from the Cholesky factor of K."""
    return 2.0 * float(np.sum(np.log(np.diag(L))))
