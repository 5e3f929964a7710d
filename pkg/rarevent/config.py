"""
Run configuration: a TOML document describing one experiment.

See `docs/configuration.md` for an annotated example. Every section is validated
before any model is evaluated; errors are raised as `ConfigError` with the dotted
path of the offending field.
"""

from __future__ import annotations

import copy
import dataclasses
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any
from typing import Mapping

from rarevent.akmcs import AkmcsConfig
from rarevent.coupled import CorrectedLf
from rarevent.coupled import CoupledConfig
from rarevent.coupled import GpLf
from rarevent.coupled import GpOnly
from rarevent.coupled import MlpLf
from rarevent.coupled import PhysicsLf
from rarevent.coupled import Strategy
from rarevent.dependencies import get_toml_loader
from rarevent.distributions import ParameterSpace
from rarevent.exceptions import ConfigError
from rarevent.exceptions import RareventError
from rarevent.kriging import FitOptions
from rarevent.kriging import KernelParams
from rarevent.mlp import MlpConfig
from rarevent.models import Evaluator
from rarevent.models import ModelPair
from rarevent.models import default_space
from rarevent.models import get_model
from rarevent.subset import SusConfig

DRIVERS = ("akmcs", "sus", "coupled")
STRATEGIES = ("gp_only", "gp_lf", "mlp_lf", "physics_lf")

_TOP_LEVEL = {
    "driver",
    "seed",
    "output_dir",
    "model",
    "parameters",
    "kriging",
    "strategy",
}
_STRATEGY_KEYS = {"kind", "lf_cost_seconds", "mlp", "lf_kriging"}
_BACKTICKED = re.compile(r"`(\w+)`")


@dataclass(frozen=True)
class ModelSpec:
    name: str
    options: dict[str, Any]

    def build(self, path: str) -> Evaluator:
        try:
            return get_model(self.name, **self.options)
        except RareventError as exc:
            msg = f"{path}: {exc}"
            raise ConfigError(msg) from exc


@dataclass(frozen=True)
class RunConfig:
    """A validated run configuration. `data` is the normalized TOML document."""

    driver: str
    seed: int
    output_dir: str
    hf: Evaluator
    lf: Evaluator | None
    space: ParameterSpace
    settings: AkmcsConfig | SusConfig | CoupledConfig
    data: dict[str, Any]

    @property
    def model(self) -> Evaluator | ModelPair:
        if self.lf is not None:
            return ModelPair(self.hf, self.lf, self.space)
        return self.hf

    def to_dict(self) -> dict[str, Any]:
        """Configuration echo: enough to re-run the experiment identically."""
        return copy.deepcopy(self.data)


def preset_names() -> list[str]:
    return sorted(
        Path(p.name).stem
        for p in resources.files("rarevent.presets").iterdir()
        if p.name.endswith(".toml")
    )


def read_source(source: str) -> tuple[dict[str, Any], str]:
    """Parse a config file or a bundled preset; return the document and its label."""
    toml = get_toml_loader()
    path = Path(source)
    if path.is_file():
        text, label = path.read_text(encoding="utf-8"), str(path)
    elif source in preset_names():
        resource = resources.files("rarevent.presets").joinpath(f"{source}.toml")
        text, label = resource.read_text(encoding="utf-8"), f"preset {source}"
    else:
        msg = f"config: {source!r} is neither a file nor a preset ({preset_names()})"
        raise ConfigError(msg)
    try:
        return toml.loads(text), label
    except toml.TOMLDecodeError as exc:
        msg = f"config: cannot parse {label}: {exc}"
        raise ConfigError(msg) from exc


def load_config(
    source: str, *, seed: int | None = None, output_dir: str | None = None
) -> RunConfig:
    """
    Load, override, and validate a run configuration.

    Arguments:
        source: Path of a TOML file, or the name of a bundled preset.
        seed: Overrides the top-level `seed`.
        output_dir: Overrides the top-level `output_dir`.
    """
    data, _ = read_source(source)
    if seed is not None:
        data["seed"] = seed
    if output_dir is not None:
        data["output_dir"] = output_dir
    return parse_config(data)


def _require_table(data: Mapping[str, Any], key: str) -> dict[str, Any]:
    value = data.get(key, {})
    if not isinstance(value, dict):
        msg = f"{key}: expected a table, got {type(value).__name__}"
        raise ConfigError(msg)
    return dict(value)


def _reject_unknown(table: Mapping[str, Any], allowed: set[str], path: str) -> None:
    if extra := sorted(set(table).difference(allowed)):
        prefix = f"{path}." if path else ""
        msg = f"{prefix}{extra[0]}: unknown key (allowed: {sorted(allowed)})"
        raise ConfigError(msg)


def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _coerce(value: Any, default: Any, path: str) -> Any:
    if value is None:
        # Only produced by `n_subsets = "adaptive"`.
        return value
    if isinstance(default, bool):
        ok = isinstance(value, bool)
    elif isinstance(default, int):
        ok = isinstance(value, int) and not isinstance(value, bool)
    elif isinstance(default, float):
        ok = _is_number(value)
        value = float(value) if ok else value
    elif isinstance(default, tuple):
        ok = (
            isinstance(value, list)
            and len(value) == len(default)
            and all(_is_number(v) for v in value)
        )
        value = tuple(float(v) for v in value) if ok else value
    else:
        ok = True
    if not ok:
        msg = f"{path}: expected {type(default).__name__}, got {value!r}"
        raise ConfigError(msg)
    return value


def _build_dataclass(
    cls: Any, table: Mapping[str, Any], path: str, **fixed: Any
) -> Any:
    """Instantiate a settings dataclass from a TOML table with type checks."""
    defaults = {f.name: f for f in dataclasses.fields(cls) if f.name not in fixed}
    _reject_unknown(table, set(defaults), path)
    kwargs: dict[str, Any] = {}
    for key, value in table.items():
        f = defaults[key]
        default = (
            f.default
            if f.default is not dataclasses.MISSING
            else f.default_factory()  # type: ignore[misc]
        )
        kwargs[key] = _coerce(value, default, f"{path}.{key}")
    try:
        return cls(**kwargs, **fixed)
    except RareventError as exc:
        match = _BACKTICKED.search(str(exc))
        field_path = f"{path}.{match.group(1)}" if match else path
        msg = f"{field_path}: {exc}"
        raise ConfigError(msg) from exc


def _fit_options(table: Mapping[str, Any], path: str) -> FitOptions:
    table = dict(table)
    params = table.pop("params", None)
    fixed: dict[str, Any] = {}
    if params is not None:
        if not isinstance(params, dict):
            msg = f"{path}.params: expected a table"
            raise ConfigError(msg)
        allowed = {"amplitude", "length_scales", "nugget"}
        _reject_unknown(params, allowed, f"{path}.params")
        try:
            fixed["params"] = KernelParams(
                params.get("amplitude", 1.0),
                params.get("length_scales", ()),
                params.get("nugget", 0.0),
            )
        except (RareventError, TypeError, ValueError) as exc:
            msg = f"{path}.params: {exc}"
            raise ConfigError(msg) from exc
    return _build_dataclass(FitOptions, table, path, **fixed)  # type: ignore[no-any-return]


def _strategy(table: Mapping[str, Any]) -> Strategy:
    _reject_unknown(table, _STRATEGY_KEYS, "strategy")
    kind = table.get("kind", "gp_only")
    if kind not in STRATEGIES:
        msg = f"strategy.kind: unknown strategy {kind!r}, expected one of {STRATEGIES}"
        raise ConfigError(msg)
    cost = _coerce(table.get("lf_cost_seconds", 0.0), 0.0, "strategy.lf_cost_seconds")
    if kind == "gp_only":
        return GpOnly()
    if kind == "physics_lf":
        return CorrectedLf(PhysicsLf())
    try:
        if kind == "gp_lf":
            lf_table = _require_table(table, "lf_kriging")
            options = _fit_options(lf_table, "strategy.lf_kriging")
            return CorrectedLf(GpLf(options, cost_seconds=cost))
        mlp_config = _build_dataclass(
            MlpConfig, _require_table(table, "mlp"), "strategy.mlp"
        )
        return CorrectedLf(MlpLf(mlp_config, cost_seconds=cost))
    except RareventError as exc:
        if isinstance(exc, ConfigError):
            raise
        msg = f"strategy.lf_cost_seconds: {exc}"
        raise ConfigError(msg) from exc


def _parameter_space(data: Mapping[str, Any], model: ModelSpec) -> ParameterSpace:
    entries = data.get("parameters")
    if entries is None:
        dimension = model.options.get("dimension")
        space = default_space(model.name, dimension=dimension)
        if space is None:
            msg = f"parameters: required for model {model.name!r}"
            raise ConfigError(msg)
        return space
    if not isinstance(entries, list) or not entries:
        msg = "parameters: expected a non-empty array of tables"
        raise ConfigError(msg)
    for i, entry in enumerate(entries):
        if not isinstance(entry, dict):
            msg = f"parameters[{i}]: expected a table"
            raise ConfigError(msg)
        _reject_unknown(entry, {"name", "family", "params"}, f"parameters[{i}]")
        for key in ("name", "family", "params"):
            if key not in entry:
                msg = f"parameters[{i}].{key}: missing"
                raise ConfigError(msg)
    try:
        return ParameterSpace.from_dict(entries)
    except (RareventError, TypeError) as exc:
        msg = f"parameters: {exc}"
        raise ConfigError(msg) from exc


def _model_spec(table: Mapping[str, Any], path: str) -> ModelSpec:
    table = dict(table)
    name = table.pop("name", None)
    if not isinstance(name, str):
        msg = f"{path}.name: expected a model name"
        raise ConfigError(msg)
    table.pop("lf", None)
    return ModelSpec(name, table)


def parse_config(data: Mapping[str, Any]) -> RunConfig:
    """Validate a parsed TOML document and build the run objects it describes."""
    data = copy.deepcopy(dict(data))
    driver = data.get("driver")
    if driver not in DRIVERS:
        msg = f"driver: expected one of {DRIVERS}, got {driver!r}"
        raise ConfigError(msg)
    _reject_unknown(data, _TOP_LEVEL | {driver}, "")
    seed = _coerce(data.get("seed", 0), 0, "seed")
    output_dir = str(data.get("output_dir", "rarevent-run"))

    model_table = _require_table(data, "model")
    hf_spec = _model_spec(model_table, "model")
    lf_table = model_table.get("lf")
    lf_spec = _model_spec(lf_table, "model.lf") if isinstance(lf_table, dict) else None
    hf = hf_spec.build("model")
    lf = lf_spec.build("model.lf") if lf_spec is not None else None
    space = _parameter_space(data, hf_spec)

    kriging_options = _fit_options(_require_table(data, "kriging"), "kriging")
    section = _require_table(data, driver)
    settings: Any
    if driver == "akmcs":
        settings = _build_dataclass(
            AkmcsConfig, section, "akmcs", seed=seed, kriging=kriging_options
        )
    elif driver == "sus":
        section = _adaptive(section, "sus")
        settings = _build_dataclass(SusConfig, section, "sus", seed=seed)
    else:
        section = _adaptive(section, "coupled")
        strategy = _strategy(_require_table(data, "strategy"))
        if isinstance(strategy, CorrectedLf) and isinstance(strategy.lf, PhysicsLf):
            if lf is None:
                msg = "model.lf: required by strategy.kind = 'physics_lf'"
                raise ConfigError(msg)
        settings = _build_dataclass(
            CoupledConfig,
            section,
            "coupled",
            seed=seed,
            kriging=kriging_options,
            strategy=strategy,
        )
    if lf is not None and lf_spec is not None and driver != "coupled":
        msg = f"model.lf: only the coupled driver uses an LF model, not {driver!r}"
        raise ConfigError(msg)

    data["seed"] = seed
    data["output_dir"] = output_dir
    return RunConfig(
        driver=driver,
        seed=seed,
        output_dir=output_dir,
        hf=hf,
        lf=lf,
        space=space,
        settings=settings,
        data=data,
    )


def _adaptive(section: dict[str, Any], path: str) -> dict[str, Any]:
    # TOML has no null: `n_subsets = "adaptive"` selects the adaptive mode.
    value = section.get("n_subsets")
    if value == "adaptive":
        section = dict(section)
        section["n_subsets"] = None
    elif value is not None and (isinstance(value, bool) or not isinstance(value, int)):
        msg = f"{path}.n_subsets: expected an integer or 'adaptive', got {value!r}"
        raise ConfigError(msg)
    return section


__all__ = [
    "DRIVERS",
    "STRATEGIES",
    "RunConfig",
    "load_config",
    "parse_config",
    "preset_names",
    "read_source",
]
