from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING
from typing import Any

import numpy as np

if TYPE_CHECKING:
    from typing_extensions import Self

    from rarevent.typing import FloatArray


@dataclass(frozen=True)
class Standardizer:
    """
    Affine map to zero mean / unit spread, applied per column.

    `divisor` is the spread with zeros replaced by one. `spread` is the spread used
    to map back; it stays zero for constant data when `collapse_constant` is set,
    so constant targets come back as exact constants.
    """

    mean: FloatArray
    divisor: FloatArray
    spread: FloatArray

    @classmethod
    def fit(cls, values: FloatArray, *, collapse_constant: bool = False) -> Self:
        mean = np.mean(values, axis=0)
        std = np.std(values, axis=0)
        divisor = np.where(std > 0, std, 1.0)
        return cls(
            mean=np.atleast_1d(mean).astype(np.float64),
            divisor=np.atleast_1d(divisor).astype(np.float64),
            spread=np.atleast_1d(std if collapse_constant else divisor).astype(
                np.float64
            ),
        )

    @classmethod
    def identity(cls, dimension: int) -> Self:
        return cls(
            mean=np.zeros(dimension),
            divisor=np.ones(dimension),
            spread=np.ones(dimension),
        )

    def transform(self, values: Any) -> Any:
        return (np.asarray(values, dtype=np.float64) - self.mean) / self.divisor

    def inverse(self, values: Any) -> Any:
        return self.mean + self.spread * np.asarray(values, dtype=np.float64)

    def to_dict(self) -> dict[str, list[float]]:
        return {
            "mean": self.mean.tolist(),
            "divisor": self.divisor.tolist(),
            "spread": self.spread.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict[str, list[float]]) -> Self:
        return cls(**{k: np.asarray(v, dtype=np.float64) for k, v in data.items()})
