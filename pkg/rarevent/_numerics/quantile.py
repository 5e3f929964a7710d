from __future__ import annotations

import bisect
import math

from rarevent.exceptions import InvalidParameterError


class RunningQuantile:
    """
    Sorted buffer answering linear-interpolation quantiles while values stream in.

    Matches `numpy.quantile(values, level)` with the default (linear) method.
    """

    def __init__(self) -> None:
        self._sorted: list[float] = []

    def __len__(self) -> int:
        return len(self._sorted)

    def add(self, value: float) -> None:
        bisect.insort(self._sorted, float(value))

    def quantile(self, level: float) -> float:
        n = len(self._sorted)
        if n == 0:
            msg = "Cannot take the quantile of an empty buffer"
            raise InvalidParameterError(msg)
        if not 0.0 <= level <= 1.0:
            msg = f"Quantile level must lie in [0, 1], got {level}"
            raise InvalidParameterError(msg)
        position = (n - 1) * level
        lower = math.floor(position)
        upper = min(lower + 1, n - 1)
        low_value = self._sorted[lower]
        return low_value + (position - lower) * (self._sorted[upper] - low_value)
