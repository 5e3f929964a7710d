from __future__ import annotations

import math
from dataclasses import dataclass
from dataclasses import field
from typing import Any

from scipy import special


def reliability_index(p: float) -> float | None:
    """
    Reliability index `-Phi^-1(p)`, or `None` when `p` is 0 or 1.

    Examples:
        >>> from rarevent import reliability_index
        >>> round(reliability_index(0.5), 12)
        0.0
        >>> reliability_index(0.0) is None
        True
    """
    if not 0.0 < p < 1.0:
        return None
    return float(-special.ndtri(p))


@dataclass(frozen=True)
class FailureEstimate:
    """
    Result of a reliability driver.

    Arguments:
        p_f: Estimated failure probability.
        cov: Coefficient of variation of `p_f` (`inf` when `p_f` is 0).
        hf_calls: High-fidelity model evaluations spent.
        total_samples: Samples the estimate is based on.
        converged: Whether the driver met its stopping rule.
        degenerate: Whether the estimate collapsed (no failures or no seeds).
        trace: Per-iteration or per-sample records as a pandas DataFrame.
        extras: Driver-specific summary values, JSON-serializable.
    """

    p_f: float
    cov: float
    hf_calls: int
    total_samples: int
    converged: bool = True
    degenerate: bool = False
    trace: Any = field(default=None, compare=False, repr=False)
    extras: dict[str, Any] = field(default_factory=dict, compare=False)

    @property
    def beta(self) -> float | None:
        return reliability_index(self.p_f)

    def to_dict(self) -> dict[str, Any]:
        cov = self.cov if math.isfinite(self.cov) else None
        return {
            "p_f": self.p_f,
            "cov": cov,
            "beta": self.beta,
            "hf_calls": self.hf_calls,
            "total_samples": self.total_samples,
            "converged": self.converged,
            "degenerate": self.degenerate,
            **self.extras,
        }
