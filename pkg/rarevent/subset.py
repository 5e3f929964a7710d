"""
Subset simulation with a component-wise Metropolis-Hastings sampler.

The failure probability is written as a product of larger conditional probabilities
`P(g > F_1) * P(g > F_2 | g > F_1) * ... * P(g >= 0 | g > F_{m-1})`, where each
intermediate threshold `F_i` is the `1 - p0` quantile of the outputs of subset `i`.
Conditional samples are grown as Markov chains from the samples that exceeded the
previous threshold; the chains move in standard-normal space.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import TYPE_CHECKING
from typing import Any
from typing import Iterator
from typing import Sequence

import numpy as np

from rarevent.estimate import FailureEstimate
from rarevent.exceptions import InvalidParameterError
from rarevent.utils import as_vector
from rarevent.utils import chain_lengths
from rarevent.utils import ensure_rng
from rarevent.utils import records_to_frame
from rarevent.utils import require_count
from rarevent.utils import require_open_unit
from rarevent.utils import require_positive

if TYPE_CHECKING:
    from rarevent.distributions import ParameterSpace
    from rarevent.models import Evaluator
    from rarevent.typing import FloatArray
    from rarevent.typing import Seed

_logger = logging.getLogger(__name__)

TRACE_COLUMNS = ("subset", "sample_index", "output", "is_seed", "accepted")


@dataclass(frozen=True)
class SusConfig:
    """
    Settings of `run_sus` (and the sampling part of the coupled driver).

    Arguments:
        n_per_subset: Samples per subset.
        p0: Target conditional probability of every intermediate subset.
        n_subsets: Number of subsets; `None` selects the adaptive mode, which stops
            as soon as an intermediate threshold reaches 0.
        max_subsets: Safety cap on the number of subsets in adaptive mode.
        proposal_width: Standard deviation of the per-component proposal, in
            standard-normal units.
        report_correlated_cov: Also report a COV that accounts for the correlation
            between states of the same chain. Supplementary output only.
        seed: Seed of the random stream.
    """

    n_per_subset: int = 5000
    p0: float = 0.1
    n_subsets: int | None = 4
    max_subsets: int = 20
    proposal_width: float = 1.0
    report_correlated_cov: bool = False
    seed: int = 0

    def __post_init__(self) -> None:
        require_count(self.n_per_subset, "n_per_subset", minimum=2)
        require_open_unit(self.p0, "p0")
        if self.n_subsets is not None:
            require_count(self.n_subsets, "n_subsets")
        require_count(self.max_subsets, "max_subsets")
        require_positive(self.proposal_width, "proposal_width", strict=False)
        raw = self.n_per_subset * self.p0
        if abs(raw - round(raw)) > 1e-9 or round(raw) < 1:
            _logger.warning(
                "n_per_subset * p0 = %g is not a positive integer; using %d seeds",
                raw,
                self.n_seeds,
            )

    @property
    def n_seeds(self) -> int:
        return max(1, round(self.n_per_subset * self.p0))

    @property
    def adaptive(self) -> bool:
        return self.n_subsets is None


@dataclass(frozen=True)
class SubsetState:
    """
    One finished subset.

    `threshold` is the level this subset's outputs were measured against: the next
    intermediate threshold, or 0 for the final subset. `probability` is the fraction
    of outputs above it and `seeds` marks the samples that seed the next subset.
    """

    index: int
    x: FloatArray
    outputs: FloatArray
    threshold: float
    probability: float
    cov: float
    seeds: Any
    final: bool

    @property
    def n_seeds(self) -> int:
        return int(np.count_nonzero(self.seeds))


def empirical_quantile(outputs: Any, level: float) -> float:
    """Quantile with linear interpolation between order statistics."""
    values = as_vector(outputs, name="outputs")
    if values.size == 0:
        msg = "Cannot take the quantile of an empty sample"
        raise InvalidParameterError(msg)
    return float(np.quantile(values, level))


def select_threshold(outputs: Any, p0: float) -> float:
    """
    Intermediate threshold: the `1 - p0` quantile of `outputs`, capped at 0.

    Examples:
        >>> from rarevent.subset import select_threshold
        >>> round(select_threshold([-float(v) for v in range(1, 11)], 0.1), 10)
        -1.9
        >>> select_threshold([1.0, 2.0, 3.0], 0.1)
        0.0
    """
    require_open_unit(p0, "p0")
    return min(empirical_quantile(outputs, 1.0 - p0), 0.0)


def cov_subset(p: float, n: int) -> float:
    """
    COV of one subset's probability from `n` samples, `inf` when `p` is 0.

    Examples:
        >>> from rarevent.subset import cov_subset
        >>> round(cov_subset(0.1, 1000), 5)
        0.09487
    """
    require_count(n, "n")
    if not 0.0 <= p <= 1.0:
        msg = f"Probability must lie in [0, 1], got {p}"
        raise InvalidParameterError(msg)
    if p == 0.0:
        return math.inf
    return math.sqrt((1.0 - p) / (p * n))


def cov_overall(deltas: Sequence[float]) -> float:
    """
    Overall COV of a product of subset probabilities, `sqrt(sum(delta_i ** 2))`.

    Examples:
        >>> from rarevent.subset import cov_overall
        >>> round(cov_overall([0.03, 0.04]), 12)
        0.05
    """
    return math.sqrt(sum(d * d for d in deltas))


def chain_correlation_factor(indicators: Sequence[Any], p: float) -> float:
    """
    Correlation factor `gamma` of a subset's chains for the level-crossing indicator.

    The subset COV becomes `sqrt((1 - p) / (p * N) * (1 + gamma))`. Negative sample
    estimates are clamped to 0.
    """
    chains = [np.asarray(c, dtype=np.float64) for c in indicators if len(c)]
    n_total = sum(c.size for c in chains)
    r0 = p * (1.0 - p)
    if not chains or r0 <= 0.0:
        return 0.0
    longest = max(c.size for c in chains)
    gamma = 0.0
    for lag in range(1, longest):
        products = [c[:-lag] * c[lag:] for c in chains if c.size > lag]
        pairs = sum(v.size for v in products)
        if pairs == 0:  # pragma: no cover
            break
        r_lag = sum(float(v.sum()) for v in products) / pairs - p * p
        gamma += 2.0 * (1.0 - lag * len(chains) / n_total) * r_lag / r0
    return max(gamma, 0.0)


def propose_standard_normal(
    u: FloatArray, rng: np.random.Generator, proposal_width: float
) -> FloatArray:
    """
    Component-wise Metropolis-Hastings move targeting independent standard normals.

    Every component draws a Gaussian step and an acceptance uniform, whether or not
    it is accepted, so the number of draws per call is fixed.
    """
    step = rng.standard_normal(u.shape)
    accept_draw = rng.random(u.shape)
    candidate = u + proposal_width * step
    with np.errstate(over="ignore"):
        ratio = np.exp(-0.5 * (candidate * candidate - u * u))
    return np.where(accept_draw < np.minimum(1.0, ratio), candidate, u)  # type: ignore[no-any-return]


def mh_step(
    current: Any,
    space: ParameterSpace,
    rng: np.random.Generator,
    proposal_width: float = 1.0,
) -> FloatArray:
    """
    Propose the next chain state from `current` (physical units).

    Components whose standard-normal move is rejected keep their exact value. The
    limit-state condition is checked by the caller.
    """
    x = as_vector(current, dimension=space.dimension, name="current")
    u = space.to_standard_normal(x)
    u_new = propose_standard_normal(u, rng, proposal_width)
    return _apply_move(x, u, u_new, space)


def _apply_move(
    x: FloatArray, u: FloatArray, u_new: FloatArray, space: ParameterSpace
) -> FloatArray:
    moved = u_new != u
    if not moved.any():
        return x.copy()
    out = x.copy()
    out[moved] = space.from_standard_normal(u_new)[moved]
    return out


def chain_schedule(n_total: int, n_chains: int) -> Iterator[int]:
    """
    Chain index of every non-seed sample, in round-robin order.

    Chains start from their seed and together hold `n_total` states; remainders go
    to the first chains.
    """
    lengths = chain_lengths(n_total, n_chains)
    for step in range(1, max(lengths)):
        for chain, length in enumerate(lengths):
            if length > step:
                yield chain


class ChainSet:
    """States of a subset's Markov chains, in physical and standard-normal units."""

    def __init__(self, x: FloatArray, outputs: FloatArray, space: ParameterSpace) -> None:
        self.space = space
        self.x = x.copy()
        self.u = space.to_standard_normal(x).reshape(x.shape)
        self.outputs = outputs.copy()

    def __len__(self) -> int:
        return int(self.x.shape[0])

    def propose(
        self, chain: int, rng: np.random.Generator, width: float
    ) -> tuple[Any, Any]:
        u_new = propose_standard_normal(self.u[chain], rng, width)
        return _apply_move(self.x[chain], self.u[chain], u_new, self.space), u_new

    def move(self, chain: int, x: FloatArray, u: FloatArray, output: float) -> None:
        self.x[chain] = x
        self.u[chain] = u
        self.outputs[chain] = output


def _finish_level(
    index: int,
    x: FloatArray,
    outputs: FloatArray,
    config: SusConfig,
    chain_ids: FloatArray | None,
    *,
    last: bool,
) -> SubsetState:
    n = outputs.shape[0]
    threshold = 0.0 if last else select_threshold(outputs, config.p0)
    final = last or threshold >= 0.0
    above = outputs >= 0.0 if final else outputs > threshold
    probability = float(np.count_nonzero(above)) / n
    cov = cov_subset(probability, n)
    if config.report_correlated_cov and chain_ids is not None and probability > 0:
        chains = [above[chain_ids == c] for c in np.unique(chain_ids)]
        gamma = chain_correlation_factor(chains, probability)
        cov = math.sqrt(cov * cov * (1.0 + gamma))
    return SubsetState(
        index=index,
        x=x,
        outputs=outputs,
        threshold=threshold,
        probability=probability,
        cov=cov,
        seeds=above,
        final=final,
    )


def run_sus(
    space: ParameterSpace, evaluator: Evaluator, config: SusConfig | None = None
) -> FailureEstimate:
    """
    Estimate a failure probability by subset simulation.

    Arguments:
        space: Input distributions.
        evaluator: Limit state; failure is `g >= 0`.
        config: Sampler settings; defaults to `SusConfig()`.

    Returns:
        The estimate. Its trace has one row per sample with columns
        `(subset, sample_index, output, is_seed, accepted)`; `extras` lists the
        thresholds, conditional probabilities and per-subset COVs.
    """
    config = config or SusConfig()
    rng = ensure_rng(config.seed)
    start_calls = evaluator.calls
    n = config.n_per_subset
    max_levels = config.max_subsets if config.adaptive else config.n_subsets
    assert max_levels is not None  # noqa: S101
    _logger.info(
        "Subset simulation: %d samples per subset, p0=%g, %s",
        n,
        config.p0,
        "adaptive" if config.adaptive else f"{config.n_subsets} subsets",
    )

    x = space.sample(rng, n)
    outputs = evaluator.evaluate_many(x)
    trace: list[tuple[Any, ...]] = [
        (1, j, float(g), False, True) for j, g in enumerate(outputs)
    ]
    corrected_chains: FloatArray | None = None
    levels: list[SubsetState] = []

    for index in range(1, max_levels + 1):
        last = not config.adaptive and index == max_levels
        level = _finish_level(index, x, outputs, config, corrected_chains, last=last)
        levels.append(level)
        _logger.info(
            "Subset %d: threshold %.6g, P=%.4g, HF calls %d",
            index,
            level.threshold,
            level.probability,
            evaluator.calls - start_calls,
        )
        if level.final or level.n_seeds == 0 or index == max_levels:
            break
        chains = ChainSet(x[level.seeds], outputs[level.seeds], space)
        x, outputs, corrected_chains, rows = _grow_subset(
            chains, evaluator, level.threshold, config, rng, subset=index + 1
        )
        trace.extend(rows)

    return _combine(
        levels,
        evaluator.calls - start_calls,
        records_to_frame(trace, TRACE_COLUMNS),
        config,
    )


def _grow_subset(
    chains: ChainSet,
    evaluator: Evaluator,
    threshold: float,
    config: SusConfig,
    rng: np.random.Generator,
    *,
    subset: int,
) -> tuple[FloatArray, FloatArray, FloatArray, list[tuple[Any, ...]]]:
    n = config.n_per_subset
    n_chains = len(chains)
    xs = np.empty((n, chains.x.shape[1]))
    outputs = np.empty(n)
    chain_ids = np.empty(n, dtype=np.int64)
    xs[:n_chains] = chains.x
    outputs[:n_chains] = chains.outputs
    chain_ids[:n_chains] = np.arange(n_chains)
    rows: list[tuple[Any, ...]] = [
        (subset, j, float(outputs[j]), True, True) for j in range(n_chains)
    ]
    for j, chain in enumerate(chain_schedule(n, n_chains), start=n_chains):
        candidate, u_new = chains.propose(chain, rng, config.proposal_width)
        g = evaluator.evaluate(candidate)
        accepted = g > threshold
        if accepted:
            chains.move(chain, candidate, u_new, g)
        xs[j] = chains.x[chain]
        outputs[j] = chains.outputs[chain]
        chain_ids[j] = chain
        rows.append((subset, j, float(outputs[j]), False, bool(accepted)))
    return xs, outputs, chain_ids, rows


def _combine(
    levels: list[SubsetState],
    hf_calls: int,
    trace: Any,
    config: SusConfig,
    *,
    extras: dict[str, Any] | None = None,
) -> FailureEstimate:
    p_f = math.prod(level.probability for level in levels)
    reached = levels[-1].final
    degenerate = p_f == 0.0
    plain_covs = [cov_subset(level.probability, config.n_per_subset) for level in levels]
    cov = math.inf if degenerate else cov_overall(plain_covs)
    info: dict[str, Any] = {
        "thresholds": [level.threshold for level in levels],
        "conditional_probabilities": [level.probability for level in levels],
        "subset_covs": [c if math.isfinite(c) else None for c in plain_covs],
        "n_subsets": len(levels),
    }
    if config.report_correlated_cov and not degenerate:
        info["cov_correlated"] = cov_overall([level.cov for level in levels])
    info.update(extras or {})
    if not reached and not degenerate:
        _logger.warning(
            "Stopped after %d subsets before the threshold reached 0", len(levels)
        )
    return FailureEstimate(
        p_f=p_f,
        cov=cov,
        hf_calls=hf_calls,
        total_samples=config.n_per_subset * len(levels),
        converged=reached and not degenerate,
        degenerate=degenerate,
        trace=trace,
        extras={"driver": "sus", **info},
    )


def crude_monte_carlo(
    space: ParameterSpace, evaluator: Evaluator, n: int, seed: Seed = 0
) -> FailureEstimate:
    """
    Crude Monte Carlo estimate from `n` independent samples.

    Uses the same draws as the first subset of `run_sus` with the same seed.
    """
    require_count(n, "n")
    rng = ensure_rng(seed)
    start_calls = evaluator.calls
    outputs = evaluator.evaluate_many(space.sample(rng, n))
    p_f = float(np.count_nonzero(outputs >= 0.0)) / n
    return FailureEstimate(
        p_f=p_f,
        cov=cov_subset(p_f, n),
        hf_calls=evaluator.calls - start_calls,
        total_samples=n,
        converged=p_f > 0.0,
        degenerate=p_f == 0.0,
        extras={"driver": "crude_mc"},
    )


__all__ = [
    "SubsetState",
    "SusConfig",
    "chain_correlation_factor",
    "cov_overall",
    "cov_subset",
    "crude_monte_carlo",
    "empirical_quantile",
    "mh_step",
    "run_sus",
    "select_threshold",
]
