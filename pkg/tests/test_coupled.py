from __future__ import annotations

import math

import numpy as np
import pytest
from scipy import special

from rarevent import CorrectedLf
from rarevent import CoupledConfig
from rarevent import Evaluator
from rarevent import FitOptions
from rarevent import GpLf
from rarevent import GpOnly
from rarevent import MlpConfig
from rarevent import MlpLf
from rarevent import ModelPair
from rarevent import ParameterSpace
from rarevent import PhysicsLf
from rarevent import budget_report
from rarevent import compare_budgets
from rarevent import run_coupled
from rarevent.coupled import LEDGER_COLUMNS
from rarevent.coupled import BudgetSummary
from rarevent.coupled import CallLedger
from rarevent.coupled import stochastic_threshold
from rarevent.coupled import subset_u
from rarevent.exceptions import InvalidParameterError
from rarevent.models import linear_g
from tests.utils import compare_dicts
from tests.utils import within_cov

FAST_KRIGING = FitOptions(restarts=1, refit_every=5)


def _config(**kwargs: object) -> CoupledConfig:
    settings: dict[str, object] = {
        "n_per_subset": 1000,
        "n_subsets": 2,
        "kriging": FAST_KRIGING,
        "seed": 7,
    }
    settings.update(kwargs)
    return CoupledConfig(**settings)  # type: ignore[arg-type]


def _linear(beta0: float = 2.0) -> Evaluator:
    return Evaluator(lambda x: linear_g(x, beta0), name="linear", dimension=2)


def test_subset_u() -> None:
    assert math.isclose(subset_u(1.2, 0.4, 0.4, is_final=False), 2.0)
    assert subset_u(0.0, 3.0, -1.0, is_final=True) == 0.0
    assert subset_u(-0.5, 0.25, 7.0, is_final=True) == 2.0
    assert subset_u(1.0, 0.0, 0.5, is_final=False) == math.inf


def test_subset_u_rejects_bad_inputs() -> None:
    with pytest.raises(InvalidParameterError):
        subset_u(0.0, -1.0, 0.0, is_final=True)
    with pytest.raises(InvalidParameterError):
        subset_u(0.0, 1.0, math.nan, is_final=False)


def test_stochastic_threshold() -> None:
    assert stochastic_threshold([], 0.1, -7.0) == -7.0
    assert stochastic_threshold([-5.0], 0.1, -7.0) == -7.0
    assert stochastic_threshold(np.full(50, -3.0), 0.1, 0.0) == -3.0
    draws = np.random.default_rng(0).standard_normal(200_000)
    assert abs(stochastic_threshold(draws, 0.1, 0.0) - special.ndtri(0.9)) < 0.02


def test_gp_only_on_linear() -> None:
    model = _linear()
    estimate, ledger = run_coupled(
        model, ParameterSpace.standard_normal(2), _config(n_per_subset=2000)
    )
    assert within_cov(estimate.p_f, float(special.ndtr(-2.0)), estimate.cov)
    assert estimate.hf_calls == ledger.hf_calls == model.calls
    assert estimate.hf_calls < 500
    assert estimate.extras["strategy"] == "gp_only"
    assert list(estimate.trace.columns) == list(LEDGER_COLUMNS)


def test_ledger_invariants() -> None:
    config = _config()
    estimate, ledger = run_coupled(_linear(), ParameterSpace.standard_normal(2), config)
    frame = ledger.to_frame()
    assert len(frame) == len(ledger)
    assert frame["cumulative_hf_calls"].is_monotonic_increasing
    assert frame["cumulative_hf_calls"].iloc[-1] == ledger.hf_calls
    hf_rows = frame[frame["source"] == "hf"]
    surrogate_rows = frame[frame["source"] == "surrogate"]
    assert (hf_rows["u_value"] < config.u_threshold).all()
    assert (surrogate_rows["u_value"] >= config.u_threshold).all()
    assert (frame["source"] == "hf_init").sum() == config.n_initial
    evaluated = frame["source"].isin(["hf", "hf_init"]).sum()
    assert ledger.hf_calls <= evaluated
    seeds = frame[frame["source"] == "seed"]
    assert len(seeds) == config.n_seeds
    assert seeds["u_value"].isna().all()

    first_threshold = estimate.extras["thresholds"][0]
    assert (frame[frame["subset"] == 2]["output"] > first_threshold).all()
    assert (frame[frame["subset"] == 1]["sample_index"] < config.n_per_subset).all()


def test_lf_equal_to_hf_needs_no_learning() -> None:
    space = ParameterSpace.standard_normal(2)
    pair = ModelPair(_linear(), _linear(), space)
    config = _config(strategy=CorrectedLf(PhysicsLf()))
    estimate, ledger = run_coupled(pair, config=config)
    assert ledger.hf_calls == config.n_initial
    assert ledger.lf_calls > config.n_per_subset
    assert estimate.extras["strategy"] == "physics_lf"
    assert not (ledger.to_frame()["source"] == "hf").any()


@pytest.mark.parametrize(
    ("lf", "name"),
    [
        (GpLf(FitOptions(restarts=1)), "gp_lf"),
        (MlpLf(MlpConfig(epochs=300)), "mlp_lf"),
    ],
)
def test_data_driven_lf_uses_two_designs(lf: GpLf | MlpLf, name: str) -> None:
    config = _config(n_per_subset=500, strategy=CorrectedLf(lf))
    estimate, ledger = run_coupled(_linear(), ParameterSpace.standard_normal(2), config)
    frame = ledger.to_frame()
    assert (frame["source"] == "hf_init").sum() == 2 * config.n_initial
    assert ledger.lf_calls > 0
    assert ledger.lf is not None
    assert ledger.lf.name == name
    assert estimate.extras["strategy"] == name
    assert 0.0 < estimate.p_f < 1.0


def test_fresh_gp_per_subset() -> None:
    config = _config(fresh_gp_per_subset=True)
    estimate, ledger = run_coupled(_linear(), ParameterSpace.standard_normal(2), config)
    frame = ledger.to_frame()
    refreshed = frame[(frame["subset"] == 2) & (frame["source"] == "hf_init")]
    assert 0 < len(refreshed) <= config.n_initial
    assert refreshed["u_value"].isna().all()
    assert estimate.extras["training_points"] == [config.n_initial] * 2


def test_training_set_grows_without_fresh_gp() -> None:
    config = _config(n_subsets=3)
    estimate, ledger = run_coupled(_linear(), ParameterSpace.standard_normal(2), config)
    sizes = estimate.extras["training_points"]
    assert sizes[0] == config.n_initial
    assert sizes == sorted(sizes)
    hf_rows = ledger.to_frame()["source"] == "hf"
    assert sizes[-1] <= config.n_initial + int(hf_rows.sum())


def test_seeded_runs_are_identical() -> None:
    space = ParameterSpace.standard_normal(2)
    first, first_ledger = run_coupled(_linear(), space, _config(n_per_subset=500))
    second, second_ledger = run_coupled(_linear(), space, _config(n_per_subset=500))
    assert first == second
    assert first_ledger.to_frame().equals(second_ledger.to_frame())


def test_physics_lf_requires_pair() -> None:
    config = _config(strategy=CorrectedLf(PhysicsLf()))
    with pytest.raises(InvalidParameterError, match="ModelPair"):
        run_coupled(_linear(), ParameterSpace.standard_normal(2), config)


def test_single_model_requires_space() -> None:
    with pytest.raises(InvalidParameterError, match="parameter space"):
        run_coupled(_linear())


def test_invalid_config() -> None:
    with pytest.raises(InvalidParameterError):
        CoupledConfig(u_threshold=0.0)
    with pytest.raises(InvalidParameterError):
        CoupledConfig(strategy="gp_only")  # type: ignore[arg-type]


def test_budget_report_charges_nominal_cost() -> None:
    hf = Evaluator(lambda x: float(x[0]), name="hf", cost_seconds=240.0, dimension=1)
    ledger = CallLedger(hf, strategy=GpOnly.name)
    for value in range(100):
        hf([float(value)])
    summary = budget_report(ledger)
    assert summary.hf_calls == 100
    assert summary.hf_seconds == 24_000.0
    assert summary.lf_calls == 0
    assert summary.total_seconds == 24_000.0


def test_budget_report_prefers_pair_costs() -> None:
    space = ParameterSpace.standard_normal(1)
    hf = Evaluator(lambda x: float(x[0]), dimension=1, cost_seconds=1.0)
    lf = Evaluator(lambda x: float(x[0]), dimension=1, cost_seconds=0.5)
    ledger = CallLedger(hf, lf, strategy="physics_lf")
    hf([0.0])
    lf([0.0])
    lf([1.0])
    pair = ModelPair(
        Evaluator(lambda x: 0.0, cost_seconds=10.0),
        Evaluator(lambda x: 0.0, cost_seconds=2.0),
        space,
    )
    summary = budget_report(ledger, pair)
    assert summary.hf_seconds == 10.0
    assert summary.lf_seconds == 4.0


def test_compare_budgets_sorts_by_total() -> None:
    summaries = {
        "gp_only": BudgetSummary("gp_only", 300, 0, 72_000.0, 0.0),
        "physics_lf": BudgetSummary("physics_lf", 40, 9000, 9_600.0, 900.0),
        "mlp_lf": BudgetSummary("mlp_lf", 60, 9000, 14_400.0, 0.0),
    }
    table = compare_budgets(summaries)
    compare_dicts(
        table,
        {
            "strategy": ["physics_lf", "mlp_lf", "gp_only"],
            "hf_calls": [40, 60, 300],
            "total_seconds": [10_500.0, 14_400.0, 72_000.0],
        },
    )
    assert compare_budgets(list(summaries.values()))["strategy"].iloc[0] == "physics_lf"
