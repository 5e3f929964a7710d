"""
Kriging (Gaussian-process regression) with one length scale per input dimension.

Inputs and targets are standardized internally; every public quantity (predictions,
training data) is in the caller's units. Hyperparameters live in standardized units.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict
from dataclasses import dataclass
from dataclasses import replace
from typing import TYPE_CHECKING
from typing import Any

import numpy as np
from scipy import optimize
from scipy.spatial.distance import cdist

from rarevent._numerics.linalg import cholesky_append
from rarevent._numerics.linalg import cholesky_lower
from rarevent._numerics.linalg import cholesky_solve
from rarevent._numerics.linalg import log_det
from rarevent._numerics.linalg import solve_lower
from rarevent._numerics.scaling import Standardizer
from rarevent.exceptions import FactorizationError
from rarevent.exceptions import FittingError
from rarevent.exceptions import InvalidParameterError
from rarevent.utils import as_matrix
from rarevent.utils import as_vector
from rarevent.utils import require_count
from rarevent.utils import require_positive

if TYPE_CHECKING:
    from typing_extensions import Self

    from rarevent.typing import FloatArray

_logger = logging.getLogger(__name__)

# Objective value returned for hyperparameters whose covariance cannot be factorized.
_PENALTY = 1e25


@dataclass(frozen=True)
class KernelParams:
    amplitude: float
    length_scales: tuple[float, ...]
    nugget: float = 0.0

    def __post_init__(self) -> None:
        require_positive(self.amplitude, "amplitude")
        scales = tuple(float(v) for v in np.atleast_1d(self.length_scales))
        if not scales:
            msg = "At least one length scale is required"
            raise InvalidParameterError(msg)
        for scale in scales:
            require_positive(scale, "length_scales")
        require_positive(self.nugget, "nugget", strict=False)
        object.__setattr__(self, "length_scales", scales)
        object.__setattr__(self, "amplitude", float(self.amplitude))
        object.__setattr__(self, "nugget", float(self.nugget))

    @property
    def dimension(self) -> int:
        return len(self.length_scales)

    def to_log_vector(self) -> FloatArray:
        return np.log(np.array([self.amplitude, *self.length_scales]))

    @classmethod
    def from_log_vector(cls, theta: FloatArray, nugget: float) -> Self:
        values = np.exp(theta)
        return cls(float(values[0]), tuple(values[1:].tolist()), nugget)


@dataclass(frozen=True)
class GpPrediction:
    mean: float
    std: float


@dataclass(frozen=True)
class FitOptions:
    """
    Settings for hyperparameter fitting and retraining.

    Arguments:
        nugget: Starting diagonal jitter (standardized units). Doubled on factorization
            failure up to `max_nugget`; a zero nugget is never escalated.
        max_nugget: Largest nugget tried before giving up.
        restarts: Multi-start count for a fresh fit.
        optimize: Whether to optimize hyperparameters at all.
        standardize: Whether to standardize inputs and targets.
        params: Starting (or, with `optimize=False`, fixed) hyperparameters. Their
            nugget is replaced by `nugget`.
        length_scale_bounds: Search bounds for every length scale.
        amplitude_bounds: Search bounds for the amplitude.
        max_evaluations: Objective evaluations per restart of a fresh fit.
        refit_max_evaluations: Objective evaluations of a warm-started refit.
        refit_every: Re-optimize hyperparameters every `refit_every` added points.
        seed: Seed of the restart perturbations.
    """

    nugget: float = 1e-8
    max_nugget: float = 1e-4
    restarts: int = 3
    optimize: bool = True
    standardize: bool = True
    params: KernelParams | None = None
    length_scale_bounds: tuple[float, float] = (1e-2, 1e2)
    amplitude_bounds: tuple[float, float] = (1e-4, 1e4)
    max_evaluations: int = 2000
    refit_max_evaluations: int = 200
    refit_every: int = 1
    seed: int = 0

    def __post_init__(self) -> None:
        require_positive(self.nugget, "nugget", strict=False)
        require_positive(self.max_nugget, "max_nugget", strict=False)
        require_count(self.restarts, "restarts")
        require_count(self.max_evaluations, "max_evaluations")
        require_count(self.refit_max_evaluations, "refit_max_evaluations")
        require_count(self.refit_every, "refit_every")
        for name in ("length_scale_bounds", "amplitude_bounds"):
            low, high = getattr(self, name)
            if not 0 < low < high:
                msg = f"`{name}` must satisfy 0 < low < high, got ({low}, {high})"
                raise InvalidParameterError(msg)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> Self:
        data = dict(data)
        if data.get("params") is not None:
            data["params"] = KernelParams(**data["params"])
        for name in ("length_scale_bounds", "amplitude_bounds"):
            if name in data:
                data[name] = tuple(data[name])
        return cls(**data)


def kernel_matrix(A: FloatArray, B: FloatArray, params: KernelParams) -> FloatArray:
    scales = np.asarray(params.length_scales)
    if A.shape[1] != params.dimension or B.shape[1] != params.dimension:
        msg = (
            f"Input dimension ({A.shape[1]}, {B.shape[1]}) does not match "
            f"{params.dimension} length scales"
        )
        raise InvalidParameterError(msg)
    sq = cdist(A / scales, B / scales, "sqeuclidean")
    return params.amplitude * np.exp(-0.5 * sq)  # type: ignore[no-any-return]


def kernel(x: Any, x2: Any, params: KernelParams) -> float:
    """
    Squared-exponential kernel with one length scale per dimension.

    Examples:
        >>> from rarevent.kriging import KernelParams, kernel
        >>> kernel([0.0], [0.0], KernelParams(2.0, (1.0,)))
        2.0
    """
    a = as_vector(x, dimension=params.dimension, name="x")
    b = as_vector(x2, dimension=params.dimension, name="x2")
    return float(kernel_matrix(a[None, :], b[None, :], params)[0, 0])


def _covariance(X: FloatArray, params: KernelParams) -> FloatArray:
    K = kernel_matrix(X, X, params)
    K[np.diag_indices_from(K)] += params.nugget
    return K


def nll(params: KernelParams, X: Any, y: Any) -> float:
    """
    Negative log marginal likelihood up to its additive constant.

    Returns `0.5 * log|K + nugget * I| + 0.5 * y.T (K + nugget * I)^-1 y`.

    Raises:
        FactorizationError: if `K + nugget * I` is not positive definite.
    """
    X = as_matrix(X, dimension=params.dimension)
    y = as_vector(y, dimension=X.shape[0], name="y")
    L = cholesky_lower(_covariance(X, params))
    alpha = cholesky_solve(L, y)
    return 0.5 * log_det(L) + 0.5 * float(y @ alpha)


def _objective(theta: FloatArray, X: FloatArray, y: FloatArray, nugget: float) -> float:
    try:
        value = nll(KernelParams.from_log_vector(theta, nugget), X, y)
    except (FactorizationError, InvalidParameterError):
        return _PENALTY
    return value if math.isfinite(value) else _PENALTY


def _search(
    X: FloatArray,
    y: FloatArray,
    start: KernelParams,
    options: FitOptions,
    *,
    restarts: int,
    max_evaluations: int,
) -> KernelParams | None:
    """Bounded derivative-free search in log space; `None` if no start factorizes."""
    low = [math.log(options.amplitude_bounds[0])] + [
        math.log(options.length_scale_bounds[0])
    ] * start.dimension
    high = [math.log(options.amplitude_bounds[1])] + [
        math.log(options.length_scale_bounds[1])
    ] * start.dimension
    bounds = list(zip(low, high))
    x0 = np.clip(start.to_log_vector(), low, high)
    rng = np.random.default_rng(options.seed)
    starts = [x0] + [
        np.clip(x0 + rng.normal(0.0, 1.0, size=x0.shape), low, high)
        for _ in range(restarts - 1)
    ]
    best_theta, best_value = None, _PENALTY
    for theta0 in starts:
        result = optimize.minimize(
            _objective,
            theta0,
            args=(X, y, start.nugget),
            method="Powell",
            bounds=bounds,
            options={"maxfev": max_evaluations, "xtol": 1e-6, "ftol": 1e-10},
        )
        value = float(result.fun)
        if value < best_value:
            best_theta, best_value = np.asarray(result.x), value
    if best_theta is None:
        return None
    initial_value = _objective(x0, X, y, start.nugget)
    if initial_value <= best_value:
        best_theta = x0
    return KernelParams.from_log_vector(best_theta, start.nugget)


class GpModel:
    """
    A trained Kriging model. Instances are never mutated; `add_point` returns a new model.

    Use `fit` to construct one.
    """

    def __init__(
        self,
        X: FloatArray,
        y: FloatArray,
        params: KernelParams,
        factor: FloatArray,
        *,
        x_scaler: Standardizer,
        y_scaler: Standardizer,
        options: FitOptions,
        since_refit: int = 0,
    ) -> None:
        self._X = X
        self._y = y
        self._params = params
        self._L = factor
        self._x_scaler = x_scaler
        self._y_scaler = y_scaler
        self._options = options
        self._since_refit = since_refit
        self._Xs = x_scaler.transform(X)
        self._ys = self._standardize_targets(y)
        self._alpha = cholesky_solve(factor, self._ys)

    def _standardize_targets(self, y: FloatArray) -> FloatArray:
        return (y - self._y_scaler.mean[0]) / self._y_scaler.divisor[0]  # type: ignore[no-any-return]

    def __repr__(self) -> str:
        return f"GpModel(n={self.n}, dimension={self.dimension}, params={self._params})"

    @property
    def X(self) -> FloatArray:
        return self._X.copy()

    @property
    def y(self) -> FloatArray:
        return self._y.copy()

    @property
    def n(self) -> int:
        return int(self._X.shape[0])

    @property
    def dimension(self) -> int:
        return int(self._X.shape[1])

    @property
    def params(self) -> KernelParams:
        return self._params

    @property
    def options(self) -> FitOptions:
        return self._options

    @property
    def factor(self) -> FloatArray:
        return self._L.copy()

    def covariance(self) -> FloatArray:
        """Standardized-unit `K + nugget * I` that `factor` decomposes."""
        return _covariance(self._Xs, self._params)

    def nll(self) -> float:
        return 0.5 * log_det(self._L) + 0.5 * float(self._ys @ self._alpha)

    def predict(self, x: Any) -> GpPrediction:
        """
        Posterior mean and standard deviation at a single input.

        Examples:
            >>> import numpy as np
            >>> from rarevent.kriging import FitOptions, KernelParams, fit
            >>> opts = FitOptions(
            ...     optimize=False,
            ...     standardize=False,
            ...     params=KernelParams(1.0, (1.0,)),
            ...     nugget=0.0,
            ... )
            >>> model = fit([[0.0], [1.0]], [0.0, 1.0], opts)
            >>> pred = model.predict([1.0])
            >>> round(pred.mean, 8), round(pred.std, 8)
            (1.0, 0.0)
        """
        vec = as_vector(x, dimension=self.dimension)
        mean, std = self.predict_many(vec[None, :])
        return GpPrediction(float(mean[0]), float(std[0]))

    def predict_many(self, X: Any) -> tuple[FloatArray, FloatArray]:
        Xs = self._x_scaler.transform(as_matrix(X, dimension=self.dimension))
        k = kernel_matrix(Xs, self._Xs, self._params)
        mean_s = k @ self._alpha
        v = solve_lower(self._L, k.T)
        var_s = np.maximum(self._params.amplitude - np.sum(v * v, axis=0), 0.0)
        mean = self._y_scaler.mean[0] + self._y_scaler.spread[0] * mean_s
        std = self._y_scaler.spread[0] * np.sqrt(var_s)
        return mean, std

    def add_point(self, x: Any, y: float, *, refit_hyperparams: bool = False) -> GpModel:
        """
        Return a model trained on one more pair.

        The input standardization is frozen at the first fit, so the factor grows by
        one row. Target standardization is recomputed. With `refit_hyperparams`, the
        hyperparameters are re-optimized starting from the current ones (subject to
        `FitOptions.refit_every`).
        """
        vec = as_vector(x, dimension=self.dimension)
        X = np.vstack([self._X, vec])
        targets = np.append(self._y, float(y))
        y_scaler = _target_scaler(targets, self._options)
        since_refit = self._since_refit + 1
        if refit_hyperparams and since_refit >= self._options.refit_every:
            return _train(
                X,
                targets,
                self._x_scaler,
                y_scaler,
                self._options,
                start=self._params,
                restarts=1,
                max_evaluations=self._options.refit_max_evaluations,
                optimize=True,
            )
        xs = self._x_scaler.transform(vec)
        k_new = kernel_matrix(xs[None, :], self._Xs, self._params)[0]
        try:
            factor = cholesky_append(
                self._L, k_new, self._params.amplitude + self._params.nugget
            )
        except FactorizationError:
            _logger.debug("Incremental update failed at n=%d; refactorizing", self.n + 1)
            return _train(
                X,
                targets,
                self._x_scaler,
                y_scaler,
                self._options,
                start=self._params,
                restarts=1,
                max_evaluations=self._options.refit_max_evaluations,
                optimize=False,
                since_refit=since_refit,
            )
        return GpModel(
            X,
            targets,
            self._params,
            factor,
            x_scaler=self._x_scaler,
            y_scaler=y_scaler,
            options=self._options,
            since_refit=since_refit,
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "X": self._X.tolist(),
            "y": self._y.tolist(),
            "params": asdict(self._params),
            "x_scaler": self._x_scaler.to_dict(),
            "y_scaler": self._y_scaler.to_dict(),
            "options": self._options.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> GpModel:
        """Rebuild a dumped model; hyperparameters are restored, not re-optimized."""
        X = np.asarray(data["X"], dtype=np.float64)
        y = np.asarray(data["y"], dtype=np.float64)
        params = KernelParams(**data["params"])
        x_scaler = Standardizer.from_dict(data["x_scaler"])
        y_scaler = Standardizer.from_dict(data["y_scaler"])
        Xs = x_scaler.transform(X)
        factor = cholesky_lower(_covariance(Xs, params))
        return cls(
            X,
            y,
            params,
            factor,
            x_scaler=x_scaler,
            y_scaler=y_scaler,
            options=FitOptions.from_dict(data["options"]),
        )


def _target_scaler(y: FloatArray, options: FitOptions) -> Standardizer:
    if not options.standardize:
        return Standardizer.identity(1)
    return Standardizer.fit(y, collapse_constant=True)


def _default_start(ys: FloatArray, dimension: int, options: FitOptions) -> KernelParams:
    variance = float(np.var(ys)) if ys.size > 1 else 1.0
    low, high = options.amplitude_bounds
    return KernelParams(
        amplitude=min(max(variance, low), high),
        length_scales=(1.0,) * dimension,
        nugget=options.nugget,
    )


def _train(
    X: FloatArray,
    y: FloatArray,
    x_scaler: Standardizer,
    y_scaler: Standardizer,
    options: FitOptions,
    *,
    start: KernelParams | None,
    restarts: int,
    max_evaluations: int,
    optimize: bool,
    since_refit: int = 0,
) -> GpModel:
    Xs = x_scaler.transform(X)
    ys = (y - y_scaler.mean[0]) / y_scaler.divisor[0]
    params = start if start is not None else _default_start(ys, X.shape[1], options)
    if params.dimension != X.shape[1]:
        msg = f"Expected {X.shape[1]} length scales, got {params.dimension}"
        raise InvalidParameterError(msg)
    nugget = params.nugget
    while True:
        candidate: KernelParams | None = replace(params, nugget=nugget)
        if optimize:
            candidate = _search(
                Xs,
                ys,
                replace(params, nugget=nugget),
                options,
                restarts=restarts,
                max_evaluations=max_evaluations,
            )
        if candidate is not None:
            try:
                factor = cholesky_lower(_covariance(Xs, candidate))
            except FactorizationError:
                pass
            else:
                return GpModel(
                    X,
                    y,
                    candidate,
                    factor,
                    x_scaler=x_scaler,
                    y_scaler=y_scaler,
                    options=options,
                    since_refit=0 if optimize else since_refit,
                )
        if nugget <= 0.0 or nugget * 2.0 > options.max_nugget:
            msg = (
                f"Could not factorize the covariance of {X.shape[0]} points "
                f"(last nugget {nugget:.1e})"
            )
            raise FittingError(msg)
        nugget *= 2.0
        _logger.debug("Raising nugget to %.2e", nugget)


def fit(X: Any, y: Any, options: FitOptions | None = None) -> GpModel:
    """
    Fit a Kriging model by minimizing the negative log marginal likelihood.

    Arguments:
        X: Training inputs, shape `(n, D)`.
        y: Training targets, shape `(n,)`.
        options: Fitting settings; defaults to `FitOptions()`.

    Returns:
        The fitted model.

    Raises:
        FittingError: if no restart yields a factorizable covariance, even after
            escalating the nugget.
    """
    options = options or FitOptions()
    X = as_matrix(X)
    y = as_vector(y, name="y")
    if X.shape[0] < 1 or X.shape[0] != y.shape[0]:
        msg = (
            "Expected matching, non-empty X and y, "
            f"got {X.shape[0]} and {y.shape[0]} rows"
        )
        raise InvalidParameterError(msg)
    x_scaler = (
        Standardizer.fit(X) if options.standardize else Standardizer.identity(X.shape[1])
    )
    return _train(
        X,
        y,
        x_scaler,
        _target_scaler(y, options),
        options,
        start=(
            replace(options.params, nugget=options.nugget)
            if options.params is not None
            else None
        ),
        restarts=options.restarts,
        max_evaluations=options.max_evaluations,
        optimize=options.optimize,
    )


def predict(model: GpModel, x: Any) -> GpPrediction:
    return model.predict(x)


def add_point(
    model: GpModel, x: Any, y: float, *, refit_hyperparams: bool = False
) -> GpModel:
    return model.add_point(x, y, refit_hyperparams=refit_hyperparams)


__all__ = [
    "FitOptions",
    "GpModel",
    "GpPrediction",
    "KernelParams",
    "add_point",
    "fit",
    "kernel",
    "nll",
    "predict",
]
