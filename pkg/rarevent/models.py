"""
Limit-state evaluators and the built-in benchmark problems.

Every limit state follows the convention failure if and only if `g(x) >= 0`.
"""

from __future__ import annotations

import logging
import math
import subprocess
import threading
from typing import TYPE_CHECKING
from typing import Any
from typing import Callable

import numpy as np

from rarevent.distributions import Lognormal
from rarevent.distributions import ParameterSpace
from rarevent.distributions import Uniform
from rarevent.exceptions import ConfigError
from rarevent.exceptions import EvaluationError
from rarevent.exceptions import InvalidParameterError
from rarevent.utils import as_matrix
from rarevent.utils import as_vector
from rarevent.utils import require_positive

if TYPE_CHECKING:
    from types import TracebackType

    from typing_extensions import Self

    from rarevent.typing import FloatArray

_logger = logging.getLogger(__name__)

BOREHOLE_NAMES = ("r_w", "r", "T_u", "H_u", "T_l", "H_l", "L", "K_w")
BOREHOLE_THRESHOLD = 300.0


class Evaluator:
    """
    A deterministic limit-state function with a call counter and a nominal cost.

    Arguments:
        func: Maps a 1-D input array to the performance value `g`.
        name: Label used in ledgers and reports.
        cost_seconds: Nominal wall-clock seconds per call, for budget reports.
        dimension: Expected input dimension, if known.

    Examples:
        >>> from rarevent.models import Evaluator
        >>> ev = Evaluator(lambda x: float(x.sum()), name="sum")
        >>> ev([1.0, 2.0])
        3.0
        >>> ev.calls
        1
    """

    def __init__(
        self,
        func: Callable[[FloatArray], float],
        *,
        name: str = "model",
        cost_seconds: float = 0.0,
        dimension: int | None = None,
    ) -> None:
        self._func = func
        self.name = name
        self.cost_seconds = require_positive(cost_seconds, "cost_seconds", strict=False)
        self.dimension = dimension
        self._calls = 0
        self._lock = threading.Lock()

    def __repr__(self) -> str:
        return (
            f"{type(self).__name__}(name={self.name!r}, "
            f"cost_seconds={self.cost_seconds}, calls={self._calls})"
        )

    def __call__(self, x: Any) -> float:
        return self.evaluate(x)

    @property
    def calls(self) -> int:
        return self._calls

    def reset_calls(self) -> None:
        with self._lock:
            self._calls = 0

    def evaluate(self, x: Any) -> float:
        vec = as_vector(x, dimension=self.dimension)
        with self._lock:
            self._calls += 1
        value = float(self._func(vec))
        if math.isnan(value):
            msg = f"Model {self.name!r} returned NaN at {vec.tolist()}"
            raise EvaluationError(msg)
        return value

    def evaluate_many(self, X: Any) -> FloatArray:
        rows = as_matrix(X, dimension=self.dimension)
        return np.array([self.evaluate(row) for row in rows], dtype=np.float64)


class ModelPair:
    """A high-fidelity and a low-fidelity evaluator defined on the same input space."""

    def __init__(self, hf: Evaluator, lf: Evaluator, space: ParameterSpace) -> None:
        for role, ev in (("hf", hf), ("lf", lf)):
            if ev.dimension is not None and ev.dimension != space.dimension:
                msg = (
                    f"{role} model {ev.name!r} expects dimension {ev.dimension}, "
                    f"the parameter space has {space.dimension}"
                )
                raise InvalidParameterError(msg)
        self.hf = hf
        self.lf = lf
        self.space = space

    def __repr__(self) -> str:
        return f"ModelPair(hf={self.hf.name!r}, lf={self.lf.name!r})"


def _borehole_terms(x: Any) -> tuple[float, float, float, float]:
    r_w, r, T_u, H_u, T_l, H_l, L, K_w = as_vector(x, dimension=8).tolist()
    if r_w <= 0 or r / r_w <= 0:
        msg = f"Borehole needs r / r_w > 0, got r={r}, r_w={r_w}"
        raise EvaluationError(msg)
    log_ratio = math.log(r / r_w)
    if log_ratio == 0 or T_l == 0 or K_w == 0:
        msg = "Borehole formula has a zero denominator at this input"
        raise EvaluationError(msg)
    numerator = 2.0 * math.pi * T_u * (H_u - H_l)
    leakage = 2.0 * L * T_u / (r_w**2 * K_w)
    return numerator, log_ratio, leakage, T_u / T_l


def borehole_flow(x: Any) -> float:
    """
    Water flow rate through a borehole, in m^3/yr.

    Inputs are ordered as `BOREHOLE_NAMES`: `r_w, r, T_u, H_u, T_l, H_l, L, K_w`.
    """
    numerator, log_ratio, leakage, ratio = _borehole_terms(x)
    return numerator / (log_ratio * (1.0 + leakage / log_ratio + ratio))


def borehole_g(x: Any, threshold: float = BOREHOLE_THRESHOLD) -> float:
    """Borehole limit state `F(x) - threshold`; fails when the flow reaches it."""
    return borehole_flow(x) - threshold


def perturbed_borehole_lf(
    x: Any, distortion: float = 0.05, threshold: float = BOREHOLE_THRESHOLD
) -> float:
    """
    Cheap stand-in for the borehole limit state.

    `ln(r / r_w)` is scaled by `1 + distortion` and the `T_u / T_l` term is dropped.
    """
    numerator, log_ratio, leakage, _ = _borehole_terms(x)
    distorted = log_ratio * (1.0 + distortion)
    if distorted == 0:
        msg = f"Distortion {distortion} zeroes the borehole denominator"
        raise EvaluationError(msg)
    return numerator / (distorted * (1.0 + leakage / distorted)) - threshold


def linear_g(x: Any, beta0: float) -> float:
    """
    Linear limit state on standard-normal inputs, with `P(g >= 0) = Phi(-beta0)`.

    Examples:
        >>> from rarevent.models import linear_g
        >>> linear_g([0.0, 0.0], 3.5)
        -3.5
    """
    vec = as_vector(x)
    return float(vec.sum()) / math.sqrt(vec.shape[0]) - float(beta0)


def borehole_space() -> ParameterSpace:
    """
    Input distributions of the borehole reliability benchmark.

    `r_w` is uniform over its design range `[0.05, 0.15]` and `r` is lognormal; the
    other six inputs are uniform. With the default threshold of 300 this puts the
    failure probability near `9e-9`. The variant with `r_w ~ Normal(0.10, 0.0161812)`
    fails far more often (about `1.5e-6`).
    """
    return ParameterSpace(
        [
            ("r_w", Uniform(0.05, 0.15)),
            ("r", Lognormal(7.71, 1.0056)),
            ("T_u", Uniform(63070.0, 115600.0)),
            ("H_u", Uniform(990.0, 1110.0)),
            ("T_l", Uniform(63.1, 116.0)),
            ("H_l", Uniform(700.0, 820.0)),
            ("L", Uniform(1120.0, 1680.0)),
            ("K_w", Uniform(9855.0, 12045.0)),
        ]
    )


class SubprocessEvaluator(Evaluator):
    """
    Evaluate a limit state in a long-lived child process.

    The child reads one sample per line on stdin (whitespace-separated floats) and
    answers with one line holding a single float on stdout. The child is started on
    first use and restarted once if it has exited.
    """

    def __init__(
        self,
        command: list[str],
        *,
        name: str = "subprocess",
        cost_seconds: float = 0.0,
        dimension: int | None = None,
    ) -> None:
        if not command:
            msg = "Subprocess evaluator needs a non-empty command"
            raise InvalidParameterError(msg)
        super().__init__(
            self._query, name=name, cost_seconds=cost_seconds, dimension=dimension
        )
        self.command = list(command)
        self._proc: subprocess.Popen[str] | None = None

    def _start(self) -> subprocess.Popen[str]:
        _logger.debug("Starting %s", self.command)
        try:
            return subprocess.Popen(  # noqa: S603
                self.command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                bufsize=1,
            )
        except OSError as exc:
            msg = f"Could not start model command {self.command}: {exc}"
            raise EvaluationError(msg) from exc

    def _exchange(self, line: str) -> str:
        if self._proc is not None and self._proc.poll() is not None:
            self.close()
        if self._proc is None:
            self._proc = self._start()
        assert self._proc.stdin is not None  # noqa: S101
        assert self._proc.stdout is not None  # noqa: S101
        try:
            self._proc.stdin.write(line)
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError):
            return ""
        return self._proc.stdout.readline()

    def _query(self, x: FloatArray) -> float:
        line = " ".join(repr(float(v)) for v in x) + "\n"
        reply = self._exchange(line)
        if not reply:
            _logger.warning("Model process %s exited; restarting", self.command)
            self.close()
            reply = self._exchange(line)
        try:
            return float(reply.strip())
        except ValueError as exc:
            msg = f"Model process {self.command} replied {reply!r}, expected one float"
            raise EvaluationError(msg) from exc

    def close(self) -> None:
        proc, self._proc = self._proc, None
        if proc is None:
            return
        if proc.stdin is not None:
            try:
                proc.stdin.close()
            except OSError:
                _logger.debug("Model process %s closed its input early", self.command)
        try:
            proc.wait(timeout=5)
        except subprocess.TimeoutExpired:  # pragma: no cover
            proc.kill()
            proc.wait()
        if proc.stdout is not None:
            proc.stdout.close()

    def __enter__(self) -> Self:
        return self

    def __exit__(
        self,
        exc_type: type[BaseException] | None,
        exc: BaseException | None,
        tb: TracebackType | None,
    ) -> None:
        self.close()


def _borehole(*, threshold: float = BOREHOLE_THRESHOLD, **kwargs: Any) -> Evaluator:
    return Evaluator(
        lambda x: borehole_g(x, threshold), name="borehole", dimension=8, **kwargs
    )


def _borehole_lf(
    *, distortion: float = 0.05, threshold: float = BOREHOLE_THRESHOLD, **kwargs: Any
) -> Evaluator:
    return Evaluator(
        lambda x: perturbed_borehole_lf(x, distortion, threshold),
        name="borehole_lf",
        dimension=8,
        **kwargs,
    )


def _linear(
    *, beta0: float = 3.5, dimension: int | None = None, **kwargs: Any
) -> Evaluator:
    return Evaluator(
        lambda x: linear_g(x, beta0), name="linear", dimension=dimension, **kwargs
    )


def _subprocess(*, command: list[str], **kwargs: Any) -> Evaluator:
    return SubprocessEvaluator(command, **kwargs)


MODELS: dict[str, Callable[..., Evaluator]] = {
    "borehole": _borehole,
    "borehole_lf": _borehole_lf,
    "linear": _linear,
    "subprocess": _subprocess,
}


def get_model(name: str, **options: Any) -> Evaluator:
    """
    Build a registered evaluator by name.

    Examples:
        >>> from rarevent.models import get_model
        >>> get_model("linear", beta0=1.0)([1.0])
        0.0
    """
    try:
        factory = MODELS[name]
    except KeyError:
        msg = f"model.name: unknown model {name!r}, expected one of {sorted(MODELS)}"
        raise ConfigError(msg) from None
    try:
        return factory(**options)
    except TypeError as exc:
        msg = f"model: invalid options for {name!r}: {exc}"
        raise ConfigError(msg) from exc


def default_space(name: str, *, dimension: int | None = None) -> ParameterSpace | None:
    """The input space a built-in model is defined on, if it has a canonical one."""
    if name in ("borehole", "borehole_lf"):
        return borehole_space()
    if name == "linear" and dimension is not None:
        return ParameterSpace.standard_normal(dimension)
    return None


def get_model_pair(
    hf: str,
    lf: str,
    space: ParameterSpace,
    *,
    hf_options: dict[str, Any] | None = None,
    lf_options: dict[str, Any] | None = None,
) -> ModelPair:
    return ModelPair(
        get_model(hf, **(hf_options or {})), get_model(lf, **(lf_options or {})), space
    )


__all__ = [
    "BOREHOLE_NAMES",
    "Evaluator",
    "ModelPair",
    "SubprocessEvaluator",
    "borehole_flow",
    "borehole_g",
    "borehole_space",
    "default_space",
    "get_model",
    "get_model_pair",
    "linear_g",
    "perturbed_borehole_lf",
]
