"""End-to-end checks against known probabilities. All of these need `--runslow`."""

from __future__ import annotations

import math

import numpy as np
import pytest
from scipy import special

from rarevent import AkmcsConfig
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
from rarevent import SusConfig
from rarevent import budget_report
from rarevent import get_model
from rarevent import run_akmcs
from rarevent import run_coupled
from rarevent import run_sus
from rarevent.cli import execute
from rarevent.config import load_config
from rarevent.models import borehole_space
from rarevent.models import linear_g
from tests.utils import within_cov

pytestmark = pytest.mark.slow()


def _linear(beta0: float) -> Evaluator:
    return Evaluator(lambda x: linear_g(x, beta0), name="linear", dimension=2)


def test_borehole_preset_reproduces_reference() -> None:
    config = load_config("borehole_appendix_a")
    estimate = execute(config)
    assert 2e-9 <= estimate.p_f <= 3e-8
    assert estimate.beta is not None
    assert 5.49 <= estimate.beta <= 5.79
    assert estimate.cov <= 0.06
    assert estimate.hf_calls <= 15_000
    assert estimate.converged


def test_subset_simulation_over_many_seeds() -> None:
    truth = float(special.ndtr(-3.5))
    space = ParameterSpace.standard_normal(2)
    estimates = [
        run_sus(space, _linear(3.5), SusConfig(n_per_subset=5000, n_subsets=3, seed=s))
        for s in range(50)
    ]
    median = float(np.median([e.p_f for e in estimates]))
    assert abs(median - truth) <= 0.1 * truth
    hits = sum(within_cov(e.p_f, truth, e.cov) for e in estimates)
    assert hits >= 45


def test_akmcs_ten_percent_with_few_calls() -> None:
    beta0 = float(-special.ndtri(0.1))
    estimate = run_akmcs(
        ParameterSpace.standard_normal(2), _linear(beta0), AkmcsConfig(target_cov=0.05)
    )
    assert within_cov(estimate.p_f, 0.1, estimate.cov, factor=2.0)
    assert estimate.hf_calls < 0.1 * estimate.total_samples


def test_plain_subset_simulation_on_borehole() -> None:
    model = get_model("borehole")
    config = SusConfig(n_per_subset=20_000, n_subsets=None, seed=0)
    estimate = run_sus(borehole_space(), model, config)
    assert estimate.converged
    assert 2e-9 <= estimate.p_f <= 3e-8
    assert estimate.beta is not None
    assert 5.4 <= estimate.beta <= 5.9


def test_identical_lf_matches_plain_subset_simulation() -> None:
    space = borehole_space()
    pair = ModelPair(
        get_model("borehole", threshold=200.0),
        get_model("borehole", threshold=200.0),
        space,
    )
    config = CoupledConfig(
        n_per_subset=2000,
        n_subsets=3,
        strategy=CorrectedLf(PhysicsLf()),
        kriging=FitOptions(restarts=1),
        seed=21,
    )
    coupled, ledger = run_coupled(pair, config=config)
    plain_config = SusConfig(n_per_subset=2000, n_subsets=3, seed=21)
    plain = run_sus(space, get_model("borehole", threshold=200.0), plain_config)
    assert ledger.hf_calls == config.n_initial
    assert not coupled.degenerate
    assert not plain.degenerate
    assert coupled.p_f > 0.0
    assert plain.p_f > 0.0
    combined = math.hypot(coupled.cov, plain.cov)
    assert abs(coupled.p_f - plain.p_f) <= 3 * combined * max(coupled.p_f, plain.p_f)


def test_strategies_agree_on_linear() -> None:
    truth = float(special.ndtr(-3.0))
    space = ParameterSpace.standard_normal(2)
    strategies = [
        GpOnly(),
        CorrectedLf(GpLf(FitOptions(restarts=1))),
        CorrectedLf(MlpLf(MlpConfig(epochs=2000))),
    ]
    estimates = []
    for seed, strategy in enumerate(strategies):
        config = CoupledConfig(
            n_per_subset=5000,
            n_subsets=3,
            strategy=strategy,
            kriging=FitOptions(restarts=1, refit_every=5),
            seed=seed,
        )
        estimate, _ = run_coupled(_linear(3.0), space, config)
        assert within_cov(estimate.p_f, truth, estimate.cov)
        estimates.append(estimate)
    for i, a in enumerate(estimates):
        for b in estimates[i + 1 :]:
            combined = math.hypot(a.cov, b.cov)
            assert abs(a.p_f - b.p_f) <= 3 * combined * max(a.p_f, b.p_f)


def test_physics_lf_trades_hf_calls_for_lf_time() -> None:
    space = borehole_space()
    kriging = FitOptions(restarts=1, refit_every=5)
    hf = get_model("borehole", threshold=200.0, cost_seconds=240.0)
    lf = get_model("borehole_lf", threshold=200.0, cost_seconds=11.0)
    pair = ModelPair(hf, lf, space)
    physics = CoupledConfig(
        n_per_subset=2000,
        n_subsets=3,
        strategy=CorrectedLf(PhysicsLf()),
        kriging=kriging,
        seed=4,
    )
    _, physics_ledger = run_coupled(pair, config=physics)
    data_driven = CoupledConfig(
        n_per_subset=2000,
        n_subsets=3,
        strategy=CorrectedLf(GpLf(FitOptions(restarts=1), cost_seconds=0.0)),
        kriging=kriging,
        seed=4,
    )
    hf_alone = get_model("borehole", threshold=200.0, cost_seconds=240.0)
    _, data_ledger = run_coupled(hf_alone, space, data_driven)
    physics_budget = budget_report(physics_ledger)
    data_budget = budget_report(data_ledger)
    assert physics_budget.hf_calls < data_budget.hf_calls
    assert physics_budget.total_seconds > data_budget.total_seconds
