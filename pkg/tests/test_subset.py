from __future__ import annotations

import logging
import math

import numpy as np
import pytest
from numpy.testing import assert_array_equal
from scipy import special

from rarevent import Evaluator
from rarevent import ParameterSpace
from rarevent import SusConfig
from rarevent import crude_monte_carlo
from rarevent import run_sus
from rarevent.exceptions import InvalidParameterError
from rarevent.models import linear_g
from rarevent.subset import TRACE_COLUMNS
from rarevent.subset import SubsetState
from rarevent.subset import _combine
from rarevent.subset import chain_correlation_factor
from rarevent.subset import chain_schedule
from rarevent.subset import cov_overall
from rarevent.subset import cov_subset
from rarevent.subset import empirical_quantile
from rarevent.subset import mh_step
from rarevent.subset import propose_standard_normal
from rarevent.subset import select_threshold
from tests.utils import within_cov

TAIL = float(special.ndtr(-3.5))


class _RejectAll:
    """Generator stand-in whose acceptance uniforms never fall below the ratio."""

    def standard_normal(self, shape: object) -> np.ndarray:
        return np.full(shape, 0.7)  # type: ignore[arg-type]

    def random(self, shape: object) -> np.ndarray:
        return np.ones(shape)  # type: ignore[arg-type]


def _linear(beta0: float = 3.5) -> Evaluator:
    return Evaluator(lambda x: linear_g(x, beta0), name="linear", dimension=2)


def test_select_threshold_order_statistics() -> None:
    outputs = [-float(v) for v in range(1, 11)]
    assert math.isclose(select_threshold(outputs, 0.1), -1.9)
    assert math.isclose(empirical_quantile(range(1, 11), 0.9), 9.1)


def test_select_threshold_caps_at_zero() -> None:
    assert select_threshold([0.5, 3.0, 7.0], 0.1) == 0.0
    assert select_threshold(np.full(20, -2.5), 0.1) == -2.5


def test_select_threshold_rejects_bad_p0() -> None:
    with pytest.raises(InvalidParameterError, match="p0"):
        select_threshold([1.0, 2.0], 1.5)


def test_cov_arithmetic() -> None:
    assert round(cov_subset(0.1, 1000), 5) == 0.09487
    assert cov_subset(0.0, 10) == math.inf
    assert math.isclose(cov_overall([0.03, 0.04]), 0.05)
    assert round(cov_overall([cov_subset(0.1, 5000)] * 4), 4) == 0.0849
    assert cov_overall([0.07]) == 0.07


def test_product_of_subset_probabilities() -> None:
    config = SusConfig(n_per_subset=1000, n_subsets=4)
    empty = np.empty((0, 2))
    levels = [
        SubsetState(i, empty, np.empty(0), -1.0, p, 0.0, np.empty(0), i == 4)
        for i, p in enumerate((0.1, 0.1, 0.1, 0.05), start=1)
    ]
    estimate = _combine(levels, 4000, None, config)
    assert math.isclose(estimate.p_f, 5e-5)
    assert estimate.converged
    assert estimate.extras["n_subsets"] == 4


def test_mh_step_with_zero_width_stays() -> None:
    space = ParameterSpace.standard_normal(3)
    current = np.array([0.3, -1.2, 2.0])
    candidate = mh_step(current, space, np.random.default_rng(0), proposal_width=0.0)
    assert_array_equal(candidate, current)


def test_mh_step_all_rejected_stays() -> None:
    space = ParameterSpace.standard_normal(2)
    current = np.array([0.1, 0.2])
    candidate = mh_step(current, space, _RejectAll())  # type: ignore[arg-type]
    assert_array_equal(candidate, current)


def test_proposal_is_stationary_for_standard_normal() -> None:
    rng = np.random.default_rng(2024)
    u = np.zeros(2)
    states = np.empty((100_000, 2))
    for i in range(states.shape[0]):
        u = propose_standard_normal(u, rng, 1.0)
        states[i] = u
    assert np.all(np.abs(states.mean(axis=0)) < 0.02)
    variances = states.var(axis=0)
    assert np.all((variances > 0.95) & (variances < 1.05))


def test_chain_schedule_round_robin() -> None:
    assert list(chain_schedule(10, 3)) == [0, 1, 2, 0, 1, 2, 0]
    assert list(chain_schedule(5, 5)) == []


def test_chain_correlation_factor() -> None:
    assert chain_correlation_factor([[1, 1, 1, 1], [0, 0, 0, 0]], 0.5) == 3.0
    assert chain_correlation_factor([[1, 0, 1, 0]], 0.5) == 0.0
    assert chain_correlation_factor([[1, 1]], 1.0) == 0.0


def test_linear_three_subsets() -> None:
    config = SusConfig(n_per_subset=5000, p0=0.1, n_subsets=3, seed=3)
    model = _linear()
    estimate = run_sus(ParameterSpace.standard_normal(2), model, config)
    assert within_cov(estimate.p_f, TAIL, estimate.cov)
    assert estimate.hf_calls == model.calls == 3 * 5000 - 2 * 500
    assert estimate.total_samples == 15000
    thresholds = estimate.extras["thresholds"]
    assert thresholds[-1] == 0.0
    assert all(a < b for a, b in zip(thresholds, thresholds[1:]))


def test_conditional_samples_exceed_previous_threshold() -> None:
    config = SusConfig(n_per_subset=2000, n_subsets=3, seed=4)
    estimate = run_sus(ParameterSpace.standard_normal(2), _linear(), config)
    trace = estimate.trace
    assert list(trace.columns) == list(TRACE_COLUMNS)
    thresholds = estimate.extras["thresholds"]
    for subset in (2, 3):
        rows = trace[trace["subset"] == subset]
        assert len(rows) == 2000
        assert (rows["output"] > thresholds[subset - 2]).all()
        assert rows["is_seed"].sum() == 200


def test_adaptive_mode_stops_at_zero() -> None:
    config = SusConfig(n_per_subset=3000, n_subsets=None, seed=5)
    estimate = run_sus(ParameterSpace.standard_normal(2), _linear(), config)
    assert estimate.converged
    assert estimate.extras["thresholds"][-1] == 0.0
    assert 3 <= estimate.extras["n_subsets"] <= 6


def test_no_seeds_is_degenerate() -> None:
    model = Evaluator(lambda x: -1.0, name="flat", dimension=2)
    config = SusConfig(n_per_subset=100, n_subsets=3)
    estimate = run_sus(ParameterSpace.standard_normal(2), model, config)
    assert estimate.p_f == 0.0
    assert estimate.degenerate
    assert not estimate.converged
    assert estimate.cov == math.inf
    assert estimate.hf_calls == 100


def test_one_subset_equals_crude_monte_carlo() -> None:
    space = ParameterSpace.standard_normal(2)
    config = SusConfig(n_per_subset=4000, n_subsets=1, seed=8)
    sus = run_sus(space, _linear(1.5), config)
    crude = crude_monte_carlo(space, _linear(1.5), 4000, seed=8)
    assert sus.p_f == crude.p_f
    assert sus.cov == crude.cov
    assert crude.p_f >= 1e-2


def test_seeded_runs_are_identical() -> None:
    config = SusConfig(n_per_subset=1000, n_subsets=3, seed=9)
    space = ParameterSpace.standard_normal(2)
    first = run_sus(space, _linear(), config)
    second = run_sus(space, _linear(), config)
    assert first == second
    assert first.trace.equals(second.trace)


def test_correlated_cov_is_supplementary() -> None:
    space = ParameterSpace.standard_normal(2)
    plain = run_sus(space, _linear(), SusConfig(n_per_subset=2000, n_subsets=3, seed=1))
    corrected = run_sus(
        space,
        _linear(),
        SusConfig(n_per_subset=2000, n_subsets=3, seed=1, report_correlated_cov=True),
    )
    assert corrected.p_f == plain.p_f
    assert corrected.cov == plain.cov
    assert corrected.extras["cov_correlated"] >= corrected.cov


def test_rounded_seed_count_warns(caplog: pytest.LogCaptureFixture) -> None:
    with caplog.at_level(logging.WARNING, logger="rarevent.subset"):
        config = SusConfig(n_per_subset=105, p0=0.1)
    assert config.n_seeds == 10
    assert "not a positive integer" in caplog.text


@pytest.mark.parametrize(
    "kwargs",
    [
        {"p0": 0.0},
        {"p0": 1.5},
        {"n_per_subset": 1},
        {"n_subsets": 0},
        {"proposal_width": -1.0},
    ],
)
def test_invalid_config(kwargs: dict[str, object]) -> None:
    with pytest.raises(InvalidParameterError):
        SusConfig(**kwargs)  # type: ignore[arg-type]
