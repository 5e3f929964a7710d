from __future__ import annotations

import math
from typing import TYPE_CHECKING
from typing import Any
from typing import Sequence

import numpy as np

from rarevent.dependencies import get_pandas
from rarevent.exceptions import InvalidParameterError

if TYPE_CHECKING:
    from rarevent.typing import FloatArray
    from rarevent.typing import Seed


def as_vector(x: Any, *, dimension: int | None = None, name: str = "x") -> FloatArray:
    """Coerce `x` to a 1-D float64 array, optionally checking its length."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1:
        msg = f"Expected `{name}` to be one-dimensional, got shape {arr.shape}"
        raise InvalidParameterError(msg)
    if dimension is not None and arr.shape[0] != dimension:
        msg = f"Expected `{name}` of dimension {dimension}, got {arr.shape[0]}"
        raise InvalidParameterError(msg)
    return arr


def as_matrix(X: Any, *, dimension: int | None = None, name: str = "X") -> FloatArray:
    """Coerce `X` to a 2-D float64 array of shape (n, D)."""
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1) if dimension in (None, 1) else arr.reshape(1, -1)
    if arr.ndim != 2:
        msg = f"Expected `{name}` to be two-dimensional, got shape {arr.shape}"
        raise InvalidParameterError(msg)
    if dimension is not None and arr.shape[1] != dimension:
        msg = f"Expected `{name}` with {dimension} columns, got {arr.shape[1]}"
        raise InvalidParameterError(msg)
    return arr


def ensure_rng(seed: Seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def require_positive(value: float, name: str, *, strict: bool = True) -> float:
    value = float(value)
    ok = value > 0 if strict else value >= 0
    if not ok or not math.isfinite(value):
        bound = "> 0" if strict else ">= 0"
        msg = f"`{name}` must be finite and {bound}, got {value}"
        raise InvalidParameterError(msg)
    return value


def require_open_unit(value: float, name: str) -> float:
    value = float(value)
    if not 0.0 < value < 1.0:
        msg = f"`{name}` must lie in (0, 1), got {value}"
        raise InvalidParameterError(msg)
    return value


def require_count(value: int, name: str, *, minimum: int = 1) -> int:
    if isinstance(value, bool) or int(value) != value or value < minimum:
        msg = f"`{name}` must be an integer >= {minimum}, got {value!r}"
        raise InvalidParameterError(msg)
    return int(value)


def chain_lengths(total: int, chains: int) -> list[int]:
    """Split `total` samples over `chains` chains, remainders to the first chains."""
    base, extra = divmod(total, chains)
    return [base + 1 if i < extra else base for i in range(chains)]


def records_to_frame(records: Sequence[Sequence[Any]], columns: Sequence[str]) -> Any:
    pd = get_pandas()
    return pd.DataFrame.from_records(list(records), columns=list(columns))


def latin_hypercube(n: int, dimension: int, rng: np.random.Generator) -> FloatArray:
    """`n` stratified points in the unit hypercube, one per stratum in every dimension."""
    from scipy.stats import qmc

    try:
        sampler = qmc.LatinHypercube(d=dimension, rng=rng)
    except TypeError:  # pragma: no cover
        # scipy < 1.15 only knows `seed`
        sampler = qmc.LatinHypercube(d=dimension, seed=rng)
    return sampler.random(n)  # type: ignore[no-any-return]
