"""
Subset simulation coupled with active-learning Kriging and multifidelity correction.

Every candidate sample is first predicted by a surrogate: a Kriging model of the
high-fidelity (HF) output, or a low-fidelity (LF) prediction plus a Kriging model of
the HF - LF discrepancy. A subset-dependent U function measures how far the prediction
is from the current threshold estimate in predictive standard deviations. Samples with
`U < u_threshold` are sent to the HF model, whose output retrains the Kriging model.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from dataclasses import field
from typing import TYPE_CHECKING
from typing import Any
from typing import ClassVar
from typing import Mapping

import numpy as np

from rarevent import kriging
from rarevent import mlp
from rarevent._numerics.quantile import RunningQuantile
from rarevent.akmcs import u_values
from rarevent.estimate import FailureEstimate
from rarevent.exceptions import FittingError
from rarevent.exceptions import InvalidParameterError
from rarevent.kriging import FitOptions
from rarevent.mlp import MlpConfig
from rarevent.models import Evaluator
from rarevent.models import ModelPair
from rarevent.subset import ChainSet
from rarevent.subset import SubsetState
from rarevent.subset import SusConfig
from rarevent.subset import _combine
from rarevent.subset import _finish_level
from rarevent.subset import chain_schedule
from rarevent.subset import empirical_quantile
from rarevent.utils import ensure_rng
from rarevent.utils import records_to_frame
from rarevent.utils import require_count
from rarevent.utils import require_open_unit
from rarevent.utils import require_positive

if TYPE_CHECKING:
    from rarevent.distributions import ParameterSpace
    from rarevent.kriging import GpModel
    from rarevent.typing import FloatArray

_logger = logging.getLogger(__name__)

LEDGER_COLUMNS = (
    "subset",
    "sample_index",
    "source",
    "u_value",
    "output",
    "threshold_estimate",
    "cumulative_hf_calls",
    "simulated_time_s",
)


class GpLf:
    """Kriging model trained on the initial HF evaluations, used as the LF model."""

    name: ClassVar[str] = "gp"
    data_driven: ClassVar[bool] = True

    def __init__(
        self, options: FitOptions | None = None, *, cost_seconds: float = 0.0
    ) -> None:
        self.options = options or FitOptions()
        self.cost_seconds = require_positive(cost_seconds, "cost_seconds", strict=False)

    def __repr__(self) -> str:
        return f"GpLf(cost_seconds={self.cost_seconds})"

    def build(self, X: FloatArray, y: FloatArray) -> Evaluator:
        model = kriging.fit(X, y, self.options)
        return Evaluator(
            lambda x: model.predict(x).mean,
            name="gp_lf",
            cost_seconds=self.cost_seconds,
            dimension=model.dimension,
        )


class MlpLf:
    """Neural network trained on the initial HF evaluations, used as the LF model."""

    name: ClassVar[str] = "mlp"
    data_driven: ClassVar[bool] = True

    def __init__(
        self, config: MlpConfig | None = None, *, cost_seconds: float = 0.0
    ) -> None:
        self.config = config or MlpConfig()
        self.cost_seconds = require_positive(cost_seconds, "cost_seconds", strict=False)

    def __repr__(self) -> str:
        return f"MlpLf(cost_seconds={self.cost_seconds})"

    def build(self, X: FloatArray, y: FloatArray) -> Evaluator:
        model = mlp.train(X, y, self.config)
        return Evaluator(
            model.predict,
            name="mlp_lf",
            cost_seconds=self.cost_seconds,
            dimension=model.dimension,
        )


class PhysicsLf:
    """The LF evaluator of a `ModelPair`."""

    name: ClassVar[str] = "physics"
    data_driven: ClassVar[bool] = False

    def __repr__(self) -> str:
        return "PhysicsLf()"


class Strategy:
    name: ClassVar[str]


class GpOnly(Strategy):
    """Kriging of the HF output itself."""

    name: ClassVar[str] = "gp_only"

    def __repr__(self) -> str:
        return "GpOnly()"


class CorrectedLf(Strategy):
    """LF prediction plus a Kriging model of the HF - LF discrepancy."""

    def __init__(self, lf: GpLf | MlpLf | PhysicsLf) -> None:
        self.lf = lf

    @property
    def name(self) -> str:  # type: ignore[override]
        return f"{self.lf.name}_lf"

    def __repr__(self) -> str:
        return f"CorrectedLf({self.lf!r})"


@dataclass(frozen=True)
class CoupledConfig(SusConfig):
    """
    Settings of `run_coupled`: the `SusConfig` fields plus the learning settings.

    Arguments:
        u_threshold: Samples with `U` below this are evaluated by the HF model.
        n_initial: HF evaluations of the initial design, and of each fresh per-subset
            Kriging model.
        fresh_gp_per_subset: Rebuild the Kriging model at every subset boundary from
            HF values at the first `n_initial` distinct seeds.
        strategy: Surrogate strategy.
        kriging: Kriging fit settings.
        refit_hyperparams: Re-optimize hyperparameters after HF calls (subject to
            `kriging.refit_every`).
    """

    u_threshold: float = 2.0
    n_initial: int = 12
    fresh_gp_per_subset: bool = False
    strategy: Strategy = field(default_factory=GpOnly)
    kriging: FitOptions = field(default_factory=FitOptions)
    refit_hyperparams: bool = True

    def __post_init__(self) -> None:
        super().__post_init__()
        require_positive(self.u_threshold, "u_threshold")
        require_count(self.n_initial, "n_initial")
        if not isinstance(self.strategy, Strategy):
            msg = f"Expected a Strategy, got {type(self.strategy)}"
            raise InvalidParameterError(msg)


class CallLedger:
    """
    Per-sample record of a coupled run: where each output came from and at what cost.

    `simulated_time_s` charges `cost_seconds` of the HF and LF evaluators per call;
    surrogate retraining time is not counted.
    """

    def __init__(
        self, hf: Evaluator, lf: Evaluator | None = None, *, strategy: str = ""
    ) -> None:
        self.hf = hf
        self.lf = lf
        self.strategy = strategy
        self._hf_start = hf.calls
        self._lf_start = lf.calls if lf is not None else 0
        self._rows: list[tuple[Any, ...]] = []

    def attach_lf(self, lf: Evaluator) -> None:
        self.lf = lf
        self._lf_start = lf.calls

    def __len__(self) -> int:
        return len(self._rows)

    @property
    def hf_calls(self) -> int:
        return self.hf.calls - self._hf_start

    @property
    def lf_calls(self) -> int:
        return 0 if self.lf is None else self.lf.calls - self._lf_start

    @property
    def hf_cost_seconds(self) -> float:
        return self.hf.cost_seconds

    @property
    def lf_cost_seconds(self) -> float:
        return 0.0 if self.lf is None else self.lf.cost_seconds

    def simulated_time(self) -> float:
        return self.hf_calls * self.hf_cost_seconds + self.lf_calls * self.lf_cost_seconds

    def record(
        self,
        subset: int,
        sample_index: int,
        source: str,
        u_value: float,
        output: float,
        threshold_estimate: float,
    ) -> None:
        self._rows.append(
            (
                subset,
                sample_index,
                source,
                u_value,
                output,
                threshold_estimate,
                self.hf_calls,
                self.simulated_time(),
            )
        )

    def to_frame(self) -> Any:
        return records_to_frame(self._rows, LEDGER_COLUMNS)


def subset_u(mean: float, sigma: float, f_i: float, is_final: bool) -> float:
    """
    Subset-dependent U: distance of the prediction to the current threshold in stds.

    In the final subset the threshold is the limit state itself (0).

    Examples:
        >>> from rarevent.coupled import subset_u
        >>> subset_u(1.2, 0.4, 0.4, False)
        2.0
        >>> subset_u(0.0, 3.0, -1.0, True)
        0.0
    """
    if sigma < 0:
        msg = f"Predictive std must be >= 0, got {sigma}"
        raise InvalidParameterError(msg)
    if is_final:
        return float(u_values(mean, sigma))
    if not math.isfinite(f_i):
        msg = f"Intermediate threshold must be finite, got {f_i}"
        raise InvalidParameterError(msg)
    return float(u_values(mean - f_i, sigma))


def stochastic_threshold(outputs: Any, p0: float, fallback: float) -> float:
    """
    Running threshold estimate: `1 - p0` quantile of the outputs seen so far.

    Returns `fallback` until at least two outputs are available.

    Examples:
        >>> from rarevent.coupled import stochastic_threshold
        >>> stochastic_threshold([-5.0], 0.1, -7.0)
        -7.0
    """
    require_open_unit(p0, "p0")
    values = np.asarray(outputs, dtype=np.float64).ravel()
    if values.size < 2:
        return float(fallback)
    return empirical_quantile(values, 1.0 - p0)


class _Surrogate:
    """Kriging model (of HF, or of HF - LF) plus the optional LF evaluator."""

    def __init__(self, lf: Evaluator | None, config: CoupledConfig) -> None:
        self.lf = lf
        self.config = config
        self.gp: GpModel

    def refit(self, X: FloatArray, y_hf: FloatArray) -> None:
        if self.lf is not None:
            y_hf = y_hf - self.lf.evaluate_many(X)
        self.gp = kriging.fit(X, y_hf, self.config.kriging)

    def predict(self, x: FloatArray) -> tuple[float, float, float]:
        """Surrogate mean, its std, and the LF value (0 without an LF)."""
        y_lf = self.lf.evaluate(x) if self.lf is not None else 0.0
        pred = self.gp.predict(x)
        return y_lf + pred.mean, pred.std, y_lf

    def learn(self, x: FloatArray, y_hf: float, y_lf: float) -> None:
        self.gp = self.gp.add_point(
            x, y_hf - y_lf, refit_hyperparams=self.config.refit_hyperparams
        )


class _CoupledRun:
    def __init__(
        self,
        hf: Evaluator,
        pair_lf: Evaluator | None,
        space: ParameterSpace,
        config: CoupledConfig,
    ) -> None:
        self.space = space
        self.config = config
        self.rng = ensure_rng(config.seed)
        self.hf = hf
        self.pair_lf = pair_lf
        self.hf_cache: dict[bytes, float] = {}
        self.ledger = CallLedger(hf, strategy=config.strategy.name)
        self.surrogate: _Surrogate
        self.training_sizes: list[int] = []

    def _call_hf(self, x: FloatArray) -> float:
        value = self.hf.evaluate(x)
        self.hf_cache[x.tobytes()] = value
        return value

    def _initial_design(self) -> FloatArray:
        X = self.space.latin_hypercube(self.config.n_initial, self.rng)
        y = np.array([self._call_hf(x) for x in X])
        start = len(self.ledger)
        for j, value in enumerate(y, start=start):
            self.ledger.record(0, j, "hf_init", math.nan, float(value), math.nan)
        return X

    def initialize(self) -> float:
        """Build the LF (if any) and the initial Kriging model; return the fallback."""
        strategy = self.config.strategy
        X0 = self._initial_design()
        y0 = np.array([self.hf_cache[x.tobytes()] for x in X0])
        lf: Evaluator | None = None
        X_corr, y_corr = X0, y0
        if isinstance(strategy, CorrectedLf):
            if isinstance(strategy.lf, PhysicsLf):
                if self.pair_lf is None:
                    msg = "A physics LF strategy needs a ModelPair"
                    raise InvalidParameterError(msg)
                lf = self.pair_lf
            else:
                # The LF interpolates its own training data, so the discrepancy model
                # is trained on an independent design.
                lf = strategy.lf.build(X0, y0)
                X_corr = self._initial_design()
                y_corr = np.array([self.hf_cache[x.tobytes()] for x in X_corr])
            self.ledger.attach_lf(lf)
        self.surrogate = _Surrogate(lf, self.config)
        try:
            self.surrogate.refit(X_corr, y_corr)
        except FittingError as exc:
            msg = f"initial design: {exc}"
            raise FittingError(msg) from exc
        return float(np.min(y0))

    def run(self) -> tuple[FailureEstimate, CallLedger]:
        config = self.config
        n = config.n_per_subset
        max_levels = config.max_subsets if config.adaptive else config.n_subsets
        assert max_levels is not None  # noqa: S101
        _logger.info(
            "Coupled run (%s): %d samples per subset, p0=%g",
            config.strategy.name,
            n,
            config.p0,
        )
        fallback = self.initialize()
        self.training_sizes.append(self.surrogate.gp.n)
        x = self.space.sample(self.rng, n)
        outputs = np.empty(n)
        quantile = RunningQuantile()
        for j in range(n):
            outputs[j], _ = self._visit(
                1, j, x[j], quantile, fallback, last=max_levels == 1
            )
        chain_ids: Any = None
        levels: list[SubsetState] = []

        for index in range(1, max_levels + 1):
            last = not config.adaptive and index == max_levels
            level = _finish_level(index, x, outputs, config, chain_ids, last=last)
            levels.append(level)
            _logger.info(
                "Subset %d: threshold %.6g, P=%.4g, HF calls %d",
                index,
                level.threshold,
                level.probability,
                self.ledger.hf_calls,
            )
            if level.final or level.n_seeds == 0 or index == max_levels:
                break
            x, outputs, chain_ids = self._conditional_subset(
                level, index + 1, last=not config.adaptive and index + 1 == max_levels
            )

        estimate = _combine(
            levels,
            self.ledger.hf_calls,
            self.ledger.to_frame(),
            config,
            extras={
                "driver": "coupled",
                "strategy": config.strategy.name,
                "lf_calls": self.ledger.lf_calls,
                "simulated_time_s": self.ledger.simulated_time(),
                "training_points": list(self.training_sizes),
            },
        )
        _logger.info(
            "Coupled run finished: P_f=%.4g, COV=%.4f, HF calls %d",
            estimate.p_f,
            estimate.cov,
            estimate.hf_calls,
        )
        return estimate, self.ledger

    def _visit(
        self,
        subset: int,
        sample_index: int,
        x: FloatArray,
        quantile: RunningQuantile,
        fallback: float,
        *,
        last: bool,
        accept_above: float | None = None,
        previous: float = math.nan,
    ) -> tuple[float, bool]:
        """
        Decide HF vs surrogate for one candidate.

        Returns the output the sample keeps and whether the candidate was accepted.
        A candidate not above `accept_above` keeps the `previous` chain output.
        """
        config = self.config
        estimate = fallback if len(quantile) < 2 else quantile.quantile(1.0 - config.p0)
        threshold = min(estimate, 0.0)
        mean, sigma, y_lf = self.surrogate.predict(x)
        u = subset_u(mean, sigma, threshold, last or threshold >= 0.0)
        if u < config.u_threshold:
            source = "hf"
            key = x.tobytes()
            if key in self.hf_cache:
                output = self.hf_cache[key]
            else:
                output = self._call_hf(x)
                _logger.debug(
                    "Subset %d sample %d: U=%.3f, HF output %.6g",
                    subset,
                    sample_index,
                    u,
                    output,
                )
                try:
                    self.surrogate.learn(x, output, y_lf)
                except FittingError as exc:
                    msg = f"subset {subset}, sample {sample_index}: {exc}"
                    raise FittingError(msg) from exc
        else:
            output, source = mean, "surrogate"
        accepted = accept_above is None or output > accept_above
        if not accepted:
            output = previous
        quantile.add(output)
        self.ledger.record(subset, sample_index, source, u, output, estimate)
        return output, accepted

    def _conditional_subset(
        self, level: SubsetState, subset: int, *, last: bool
    ) -> tuple[FloatArray, FloatArray, FloatArray]:
        config = self.config
        n = config.n_per_subset
        seed_x = level.x[level.seeds]
        seed_out = level.outputs[level.seeds]
        n_chains = seed_x.shape[0]
        fresh_rows = (
            self._refresh_surrogate(seed_x, subset)
            if config.fresh_gp_per_subset
            else set()
        )
        self.training_sizes.append(self.surrogate.gp.n)

        xs = np.empty((n, seed_x.shape[1]))
        outputs = np.empty(n)
        chain_ids = np.empty(n, dtype=np.int64)
        quantile = RunningQuantile()
        for j in range(n_chains):
            xs[j], outputs[j], chain_ids[j] = seed_x[j], seed_out[j], j
            quantile.add(seed_out[j])
            source = "hf_init" if j in fresh_rows else "seed"
            self.ledger.record(subset, j, source, math.nan, float(seed_out[j]), math.nan)

        chains = ChainSet(seed_x, seed_out, self.space)
        for j, chain in enumerate(chain_schedule(n, n_chains), start=n_chains):
            candidate, u_new = chains.propose(chain, self.rng, config.proposal_width)
            output, accepted = self._visit(
                subset,
                j,
                candidate,
                quantile,
                level.threshold,
                last=last,
                accept_above=level.threshold,
                previous=float(chains.outputs[chain]),
            )
            if accepted:
                chains.move(chain, candidate, u_new, output)
            xs[j] = chains.x[chain]
            outputs[j] = chains.outputs[chain]
            chain_ids[j] = chain
        return xs, outputs, chain_ids

    def _refresh_surrogate(self, seed_x: FloatArray, subset: int) -> set[int]:
        """
        Refit a fresh Kriging model on HF values at the first `n_initial` distinct seeds.

        Seeds are the first states of the new subset, so these are the first samples
        of the subset that the HF model answers. Seeds already in the HF cache cost no
        new call.
        """
        _, first = np.unique(seed_x, axis=0, return_index=True)
        rows = sorted(first.tolist())[: self.config.n_initial]
        fresh: set[int] = set()
        y = np.empty(len(rows))
        for k, row in enumerate(rows):
            key = seed_x[row].tobytes()
            if key in self.hf_cache:
                y[k] = self.hf_cache[key]
            else:
                y[k] = self._call_hf(seed_x[row])
                fresh.add(row)
        try:
            self.surrogate.refit(seed_x[rows], y)
        except FittingError as exc:
            msg = f"subset {subset}, fresh Kriging model: {exc}"
            raise FittingError(msg) from exc
        return fresh


def run_coupled(
    model: Evaluator | ModelPair,
    space: ParameterSpace | None = None,
    config: CoupledConfig | None = None,
) -> tuple[FailureEstimate, CallLedger]:
    """
    Estimate a failure probability by subset simulation with active-learning surrogates.

    Arguments:
        model: The HF evaluator, or a `ModelPair` (required by `PhysicsLf`).
        space: Input distributions; defaults to the pair's space.
        config: Driver settings; defaults to `CoupledConfig()`.

    Returns:
        The estimate (its trace is the ledger as a DataFrame) and the call ledger.
        `extras["training_points"]` holds the Kriging training-set size at the
        start of each subset.

    Raises:
        FittingError: if a Kriging fit fails; the message names the subset and sample.
    """
    config = config or CoupledConfig()
    if isinstance(model, ModelPair):
        hf, pair_lf = model.hf, model.lf
        space = space or model.space
    else:
        hf, pair_lf = model, None
    if space is None:
        msg = "A parameter space is required when `model` is a single evaluator"
        raise InvalidParameterError(msg)
    return _CoupledRun(hf, pair_lf, space, config).run()


def compose_pf(p_a: FailureEstimate, p_b: FailureEstimate) -> FailureEstimate:
    """
    Probability of two events in sequence, `P(B | A) * P(A)`, from independent estimates.

    Examples:
        >>> from rarevent import FailureEstimate
        >>> from rarevent.coupled import compose_pf
        >>> a = FailureEstimate(p_f=0.1, cov=0.05, hf_calls=10, total_samples=100)
        >>> b = FailureEstimate(p_f=1e-3, cov=0.075, hf_calls=5, total_samples=50)
        >>> c = compose_pf(a, b)
        >>> round(c.p_f, 12), round(c.cov, 4), c.hf_calls
        (0.0001, 0.0901, 15)
    """
    return FailureEstimate(
        p_f=p_a.p_f * p_b.p_f,
        cov=math.sqrt(p_a.cov**2 + p_b.cov**2),
        hf_calls=p_a.hf_calls + p_b.hf_calls,
        total_samples=p_a.total_samples + p_b.total_samples,
        converged=p_a.converged and p_b.converged,
        degenerate=p_a.p_f * p_b.p_f == 0.0,
        extras={"driver": "composed"},
    )


@dataclass(frozen=True)
class BudgetSummary:
    strategy: str
    hf_calls: int
    lf_calls: int
    hf_seconds: float
    lf_seconds: float

    @property
    def total_seconds(self) -> float:
        return self.hf_seconds + self.lf_seconds


def budget_report(ledger: CallLedger, pair: ModelPair | None = None) -> BudgetSummary:
    """
    Simulated wall-clock budget of a run: calls times nominal cost per call.

    Costs come from `pair` when given, otherwise from the ledger's evaluators.
    Surrogate training time is not counted.
    """
    hf_cost = pair.hf.cost_seconds if pair is not None else ledger.hf_cost_seconds
    lf_cost = pair.lf.cost_seconds if pair is not None else ledger.lf_cost_seconds
    return BudgetSummary(
        strategy=ledger.strategy,
        hf_calls=ledger.hf_calls,
        lf_calls=ledger.lf_calls,
        hf_seconds=ledger.hf_calls * hf_cost,
        lf_seconds=ledger.lf_calls * lf_cost,
    )


def compare_budgets(summaries: Mapping[str, BudgetSummary] | list[BudgetSummary]) -> Any:
    """One row per strategy with call counts and simulated seconds, cheapest first."""
    items = (
        list(summaries.items())
        if isinstance(summaries, Mapping)
        else [(s.strategy, s) for s in summaries]
    )
    rows = [
        (label, s.hf_calls, s.lf_calls, s.hf_seconds, s.lf_seconds, s.total_seconds)
        for label, s in items
    ]
    frame = records_to_frame(
        rows,
        ("strategy", "hf_calls", "lf_calls", "hf_seconds", "lf_seconds", "total_seconds"),
    )
    return frame.sort_values("total_seconds", kind="stable").reset_index(drop=True)


__all__ = [
    "BudgetSummary",
    "CallLedger",
    "CorrectedLf",
    "CoupledConfig",
    "GpLf",
    "GpOnly",
    "MlpLf",
    "PhysicsLf",
    "Strategy",
    "budget_report",
    "compare_budgets",
    "compose_pf",
    "run_coupled",
    "stochastic_threshold",
    "subset_u",
]
