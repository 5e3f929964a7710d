from __future__ import annotations

from pathlib import Path
from typing import Any

import pytest

from rarevent import AkmcsConfig
from rarevent import CorrectedLf
from rarevent import CoupledConfig
from rarevent import GpLf
from rarevent import GpOnly
from rarevent import MlpLf
from rarevent import ModelPair
from rarevent import SusConfig
from rarevent.config import load_config
from rarevent.config import parse_config
from rarevent.config import preset_names
from rarevent.config import read_source
from rarevent.exceptions import ConfigError
from rarevent.models import borehole_space


def _sus(**section: Any) -> dict[str, Any]:
    return {
        "driver": "sus",
        "seed": 3,
        "model": {"name": "linear", "beta0": 2.0, "dimension": 2},
        "sus": {"n_per_subset": 500, **section},
    }


def test_presets_are_bundled() -> None:
    assert preset_names() == ["borehole_appendix_a", "linear_akmcs", "linear_sus"]


@pytest.mark.parametrize("name", ["borehole_appendix_a", "linear_akmcs", "linear_sus"])
def test_presets_resolve(name: str) -> None:
    config = load_config(name)
    assert config.output_dir == f"runs/{name}"
    assert config.to_dict()["driver"] == config.driver


def test_borehole_preset() -> None:
    config = load_config("borehole_appendix_a")
    settings = config.settings
    assert isinstance(settings, CoupledConfig)
    assert isinstance(settings.strategy, GpOnly)
    assert settings.n_per_subset == 50_000
    assert settings.n_subsets == 8
    assert settings.fresh_gp_per_subset
    assert settings.kriging.refit_every == 10
    assert settings.seed == config.seed == 2024
    assert config.hf.cost_seconds == 240.0
    assert config.space == borehole_space()


def test_overrides() -> None:
    config = load_config("linear_sus", seed=11, output_dir="elsewhere")
    assert config.seed == 11
    assert config.settings.seed == 11
    assert config.output_dir == "elsewhere"
    assert config.to_dict()["seed"] == 11


def test_sus_section() -> None:
    config = parse_config(_sus(p0=0.2, n_subsets=2))
    assert config.settings == SusConfig(n_per_subset=500, p0=0.2, n_subsets=2, seed=3)
    assert config.lf is None
    assert config.model is config.hf


def test_adaptive_subsets() -> None:
    config = parse_config(_sus(n_subsets="adaptive"))
    assert isinstance(config.settings, SusConfig)
    assert config.settings.adaptive
    assert config.to_dict()["sus"]["n_subsets"] == "adaptive"


@pytest.mark.parametrize(
    ("section", "message"),
    [
        ({"p0": 1.5}, "sus.p0"),
        ({"p0": "high"}, "sus.p0: expected float"),
        ({"n_subsets": "many"}, "sus.n_subsets"),
        ({"n_per_subset": 2.5}, "sus.n_per_subset: expected int"),
        ({"spread": 1.0}, "sus.spread: unknown key"),
    ],
)
def test_invalid_sus_section(section: dict[str, Any], message: str) -> None:
    with pytest.raises(ConfigError, match=message):
        parse_config(_sus(**section))


def test_invalid_documents() -> None:
    with pytest.raises(ConfigError, match="driver"):
        parse_config({**_sus(), "driver": "importance"})
    with pytest.raises(ConfigError, match="verbose: unknown key"):
        parse_config({**_sus(), "verbose": True})
    with pytest.raises(ConfigError, match="model: model.name: unknown model"):
        parse_config({**_sus(), "model": {"name": "quadratic"}})
    with pytest.raises(ConfigError, match="model.lf: model.name: unknown model"):
        parse_config(
            {**_sus(), "model": {"name": "linear", "dimension": 2, "lf": {"name": "x"}}}
        )
    with pytest.raises(ConfigError, match="parameters: required"):
        parse_config({**_sus(), "model": {"name": "linear"}})
    with pytest.raises(ConfigError, match="model.lf: only the coupled driver"):
        parse_config(
            {
                **_sus(),
                "model": {"name": "linear", "dimension": 2, "lf": {"name": "linear"}},
            }
        )


def test_explicit_parameters() -> None:
    data = _sus()
    data["model"] = {"name": "linear"}
    data["parameters"] = [
        {"name": "a", "family": "normal", "params": {"mean": 0.0, "std": 1.0}},
        {"name": "b", "family": "normal", "params": {"mean": 0.0, "std": 1.0}},
    ]
    config = parse_config(data)
    assert config.space.names == ["a", "b"]
    data["parameters"] = [{"name": "a", "family": "normal"}]
    with pytest.raises(ConfigError, match=r"parameters\[0\].params: missing"):
        parse_config(data)


def test_akmcs_section_and_kriging() -> None:
    config = parse_config(
        {
            "driver": "akmcs",
            "model": {"name": "linear", "dimension": 2},
            "kriging": {
                "restarts": 1,
                "params": {"amplitude": 2.0, "length_scales": [1, 1]},
            },
            "akmcs": {"initial_pool": 500},
        }
    )
    settings = config.settings
    assert isinstance(settings, AkmcsConfig)
    assert settings.initial_pool == 500
    assert settings.kriging.restarts == 1
    assert settings.kriging.params is not None
    assert settings.kriging.params.length_scales == (1.0, 1.0)


@pytest.mark.parametrize(
    ("strategy", "expected"),
    [
        ({"kind": "gp_lf", "lf_cost_seconds": 0.5}, GpLf),
        ({"kind": "mlp_lf", "mlp": {"epochs": 100}}, MlpLf),
    ],
)
def test_coupled_strategies(strategy: dict[str, Any], expected: type) -> None:
    config = parse_config(
        {
            "driver": "coupled",
            "model": {"name": "linear", "dimension": 2},
            "strategy": strategy,
            "coupled": {"n_per_subset": 500, "u_threshold": 2.5},
        }
    )
    settings = config.settings
    assert isinstance(settings, CoupledConfig)
    assert settings.u_threshold == 2.5
    assert isinstance(settings.strategy, CorrectedLf)
    assert isinstance(settings.strategy.lf, expected)


def test_physics_lf_needs_lf_model() -> None:
    data: dict[str, Any] = {
        "driver": "coupled",
        "model": {"name": "borehole"},
        "strategy": {"kind": "physics_lf"},
    }
    with pytest.raises(ConfigError, match="model.lf: required"):
        parse_config(data)
    data["model"]["lf"] = {"name": "borehole_lf", "distortion": 0.1}
    config = parse_config(data)
    assert isinstance(config.model, ModelPair)
    assert config.model.lf.name == "borehole_lf"


def test_unknown_strategy() -> None:
    with pytest.raises(ConfigError, match="strategy.kind"):
        parse_config(
            {
                "driver": "coupled",
                "model": {"name": "borehole"},
                "strategy": {"kind": "x"},
            }
        )


def test_read_source_errors(tmp_path: Path) -> None:
    with pytest.raises(ConfigError, match="neither a file nor a preset"):
        read_source(str(tmp_path / "missing.toml"))
    broken = tmp_path / "broken.toml"
    broken.write_text("driver = \n", encoding="utf-8")
    with pytest.raises(ConfigError, match="cannot parse"):
        read_source(str(broken))
