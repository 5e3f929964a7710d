"""
Adaptive-Kriging Monte Carlo simulation (AK-MCS) with the U learning function.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from dataclasses import field
from typing import TYPE_CHECKING
from typing import Any
from typing import Iterable

import numpy as np
from scipy import special

from rarevent import kriging
from rarevent.estimate import FailureEstimate
from rarevent.exceptions import FittingError
from rarevent.exceptions import InvalidParameterError
from rarevent.kriging import FitOptions
from rarevent.utils import ensure_rng
from rarevent.utils import records_to_frame
from rarevent.utils import require_count
from rarevent.utils import require_open_unit
from rarevent.utils import require_positive

if TYPE_CHECKING:
    from rarevent.distributions import ParameterSpace
    from rarevent.kriging import GpPrediction
    from rarevent.models import Evaluator
    from rarevent.typing import FloatArray

_logger = logging.getLogger(__name__)

TRACE_COLUMNS = ("iteration", "pool_size", "min_U", "hf_calls", "p_f", "cov")


@dataclass(frozen=True)
class AkmcsConfig:
    """
    Settings of `run_akmcs`.

    Arguments:
        n_initial_doe: Size of the Latin-hypercube design evaluated before learning.
        initial_pool: Size of the first Monte Carlo candidate pool.
        pool_increment: Samples appended to the pool after each round whose COV is
            above `target_cov`.
        u_threshold: Learning stops once every pool point has `U >= u_threshold`.
        target_cov: Pool growth stops once the estimate's COV is at most this.
        max_hf_calls: Cap on high-fidelity calls, including the initial design.
        max_pool_size: Cap on the pool size.
        refit_hyperparams: Re-optimize the Kriging hyperparameters after each call.
        kriging: Kriging fit settings.
        seed: Seed of the design and the pool.
    """

    n_initial_doe: int = 12
    initial_pool: int = 1500
    pool_increment: int = 1000
    u_threshold: float = 2.0
    target_cov: float = 0.05
    max_hf_calls: int = 1000
    max_pool_size: int = 200_000
    refit_hyperparams: bool = True
    kriging: FitOptions = field(default_factory=FitOptions)
    seed: int = 0

    def __post_init__(self) -> None:
        require_count(self.n_initial_doe, "n_initial_doe")
        require_count(self.initial_pool, "initial_pool")
        require_count(self.pool_increment, "pool_increment")
        require_count(self.max_hf_calls, "max_hf_calls", minimum=self.n_initial_doe)
        require_count(self.max_pool_size, "max_pool_size", minimum=self.initial_pool)
        require_positive(self.u_threshold, "u_threshold")
        require_open_unit(self.target_cov, "target_cov")


@dataclass(frozen=True)
class SampleRecord:
    """
    One pool sample as seen by the weighted estimator.

    `indicator` is the failure indicator: the true one for `source == "hf"`, the
    sign of the Kriging mean otherwise. `u` is only used for surrogate records.
    """

    source: str
    indicator: bool
    u: float = math.inf


def u_values(mean: Any, std: Any) -> FloatArray:
    """Vectorized `|mean| / std` with `inf` for `std == 0, mean != 0` and 0 for both 0."""
    mean = np.abs(np.asarray(mean, dtype=np.float64))
    std = np.asarray(std, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        u = mean / std
    return np.where(std > 0, u, np.where(mean > 0, np.inf, 0.0))  # type: ignore[no-any-return]


def u_function(prediction: GpPrediction) -> float:
    """
    U learning function: distance of the Kriging mean to the limit state in stds.

    Examples:
        >>> from rarevent.akmcs import u_function
        >>> from rarevent.kriging import GpPrediction
        >>> u_function(GpPrediction(mean=3.0, std=1.5))
        2.0
        >>> u_function(GpPrediction(mean=-4.0, std=1.0))
        4.0
    """
    if prediction.std < 0:
        msg = f"Prediction std must be >= 0, got {prediction.std}"
        raise InvalidParameterError(msg)
    return float(u_values(prediction.mean, prediction.std))


def _weighted_terms(indicator: FloatArray, u: FloatArray, is_hf: FloatArray) -> Any:
    # A surrogate sign is right with probability Phi(U).
    trusted = special.ndtr(u)
    surrogate = np.where(indicator, trusted, 1.0 - trusted)
    return np.where(is_hf, indicator.astype(np.float64), surrogate)


def estimate_pf_weighted(records: Iterable[SampleRecord]) -> float:
    """
    Failure probability averaging per-sample failure probabilities.

    HF records contribute their indicator. A surrogate record predicting failure
    contributes `Phi(U)`, one predicting safety contributes `Phi(-U)`.

    Examples:
        >>> from rarevent.akmcs import SampleRecord, estimate_pf_weighted
        >>> round(estimate_pf_weighted([SampleRecord("surrogate", True, 2.0)]), 5)
        0.97725
    """
    rows = list(records)
    if not rows:
        msg = "Cannot estimate a failure probability from zero records"
        raise InvalidParameterError(msg)
    indicator = np.array([r.indicator for r in rows], dtype=bool)
    u = np.array([r.u for r in rows], dtype=np.float64)
    is_hf = np.array([r.source != "surrogate" for r in rows], dtype=bool)
    return float(np.mean(_weighted_terms(indicator, u, is_hf)))


def cov_mcs(p_f: float, n: int) -> float:
    """
    Coefficient of variation of a crude Monte Carlo estimate, `inf` for `p_f == 0`.

    Examples:
        >>> from rarevent.akmcs import cov_mcs
        >>> round(cov_mcs(0.5, 2), 4)
        0.7071
    """
    require_count(n, "n")
    if not 0.0 <= p_f <= 1.0:
        msg = f"Failure probability must lie in [0, 1], got {p_f}"
        raise InvalidParameterError(msg)
    if p_f == 0.0:
        return math.inf
    return math.sqrt((1.0 - p_f) / (p_f * n))


def run_akmcs(
    space: ParameterSpace, evaluator: Evaluator, config: AkmcsConfig | None = None
) -> FailureEstimate:
    """
    Estimate a failure probability by AK-MCS.

    The Kriging model starts from a Latin-hypercube design. Each step evaluates the
    high-fidelity model at the pool sample with the smallest U (ties go to the lowest
    index) until every pool sample has `U >= u_threshold`. The pool is then enlarged
    while the estimate's COV exceeds `target_cov`.

    Arguments:
        space: Input distributions.
        evaluator: High-fidelity limit state.
        config: Driver settings; defaults to `AkmcsConfig()`.

    Returns:
        The estimate, with a trace of `(iteration, pool_size, min_U, hf_calls, p_f, cov)`
        per learning step. `converged` is False when a budget cap stopped the run.
    """
    config = config or AkmcsConfig()
    rng = ensure_rng(config.seed)
    start_calls = evaluator.calls
    _logger.info(
        "AK-MCS: %d-point design, pool %d, target COV %.3f",
        config.n_initial_doe,
        config.initial_pool,
        config.target_cov,
    )

    X_doe = space.latin_hypercube(config.n_initial_doe, rng)
    y_doe = evaluator.evaluate_many(X_doe)
    try:
        gp = kriging.fit(X_doe, y_doe, config.kriging)
    except FittingError as exc:
        msg = f"AK-MCS initial design: {exc}"
        raise FittingError(msg) from exc

    pool = space.sample(rng, config.initial_pool)
    evaluated = np.zeros(pool.shape[0], dtype=bool)
    hf_failed = np.zeros(pool.shape[0], dtype=bool)
    trace: list[tuple[Any, ...]] = []
    iteration = 0
    converged = False
    p_f, cov, min_u = 0.0, math.inf, math.inf
    indicator_pf = 0.0

    while True:
        iteration += 1
        mean, std = gp.predict_many(pool)
        u = u_values(mean, std)
        u[evaluated] = np.inf
        best = int(np.argmin(u))
        min_u = float(u[best])

        indicator = np.where(evaluated, hf_failed, mean >= 0.0)
        p_f = float(np.mean(_weighted_terms(indicator, u, evaluated)))
        indicator_pf = float(np.mean(indicator))
        cov = cov_mcs(p_f, pool.shape[0])
        hf_calls = evaluator.calls - start_calls
        trace.append((iteration, pool.shape[0], min_u, hf_calls, p_f, cov))

        if min_u < config.u_threshold:
            if hf_calls >= config.max_hf_calls:
                _logger.warning(
                    "AK-MCS stopped at the HF budget (%d calls), min U %.3f",
                    hf_calls,
                    min_u,
                )
                break
            y_new = evaluator.evaluate(pool[best])
            evaluated[best] = True
            hf_failed[best] = y_new >= 0.0
            _logger.debug(
                "HF call at pool index %d (U=%.3f): g=%.6g", best, min_u, y_new
            )
            try:
                gp = gp.add_point(
                    pool[best], y_new, refit_hyperparams=config.refit_hyperparams
                )
            except FittingError as exc:
                msg = f"AK-MCS iteration {iteration}: {exc}"
                raise FittingError(msg) from exc
            continue

        _logger.info(
            "AK-MCS round: pool %d, min U %.3f, P_f %.4g, COV %.4f",
            pool.shape[0],
            min_u,
            p_f,
            cov,
        )
        if cov <= config.target_cov:
            converged = True
            break
        if p_f == 0.0:
            _logger.warning("AK-MCS found no failure region; COV is infinite")
            break
        if pool.shape[0] + config.pool_increment > config.max_pool_size:
            _logger.warning(
                "AK-MCS stopped at the pool cap (%d samples) with COV %.4f",
                pool.shape[0],
                cov,
            )
            break
        pool = np.vstack([pool, space.sample(rng, config.pool_increment)])
        grow = np.zeros(config.pool_increment, dtype=bool)
        evaluated = np.concatenate([evaluated, grow])
        hf_failed = np.concatenate([hf_failed, grow])

    hf_calls = evaluator.calls - start_calls
    return FailureEstimate(
        p_f=p_f,
        cov=cov,
        hf_calls=hf_calls,
        total_samples=int(pool.shape[0]),
        converged=converged,
        degenerate=p_f == 0.0,
        trace=records_to_frame(trace, TRACE_COLUMNS),
        extras={
            "driver": "akmcs",
            "min_u": min_u,
            "p_f_indicator": indicator_pf,
            "iterations": iteration,
        },
    )


__all__ = [
    "AkmcsConfig",
    "SampleRecord",
    "cov_mcs",
    "estimate_pf_weighted",
    "run_akmcs",
    "u_function",
    "u_values",
]
