from __future__ import annotations

import math
from typing import TYPE_CHECKING
from typing import Any
from typing import ClassVar
from typing import Iterable
from typing import Iterator
from typing import Mapping

import numpy as np
from scipy import special
from scipy import stats

from rarevent.exceptions import DomainError
from rarevent.exceptions import InvalidParameterError
from rarevent.utils import as_matrix
from rarevent.utils import as_vector
from rarevent.utils import latin_hypercube
from rarevent.utils import require_positive

if TYPE_CHECKING:
    from typing_extensions import Self

    from rarevent.typing import FloatArray


def _scalar_or_array(value: Any, like: Any) -> Any:
    if np.ndim(like) == 0:
        return float(value)
    return np.asarray(value, dtype=np.float64)


class Marginal:
    """A scalar input distribution, parameterized in physical units."""

    family: ClassVar[str]

    def __init__(self, dist: Any) -> None:
        self._dist = dist

    def __repr__(self) -> str:
        args = ", ".join(f"{k}={v!r}" for k, v in self.params.items())
        return f"{self.__class__.__qualname__}({args})"

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Marginal) and other.to_dict() == self.to_dict()

    def __hash__(self) -> int:
        return hash((self.family, tuple(self.params.items())))

    @property
    def params(self) -> dict[str, float]:
        raise NotImplementedError

    @property
    def mean(self) -> float:
        return float(self._dist.mean())

    @property
    def std(self) -> float:
        return float(self._dist.std())

    def to_dict(self) -> dict[str, Any]:
        return {"family": self.family, "params": dict(self.params)}

    def log_pdf(self, x: Any) -> Any:
        """
        Natural log of the density, `-inf` outside the support.

        Examples:
            >>> import math
            >>> from rarevent import Normal
            >>> math.isclose(Normal(0, 1).log_pdf(0.0), -0.5 * math.log(2 * math.pi))
            True
        """
        return _scalar_or_array(self._dist.logpdf(x), x)

    def cdf(self, x: Any) -> Any:
        return _scalar_or_array(self._dist.cdf(x), x)

    def sf(self, x: Any) -> Any:
        return _scalar_or_array(self._dist.sf(x), x)

    def quantile(self, p: Any) -> Any:
        """
        Inverse CDF.

        Arguments:
            p: Probability level(s), strictly inside (0, 1).

        Returns:
            Value(s) `x` with `cdf(x) == p`.

        Examples:
            >>> from rarevent import Uniform
            >>> Uniform(3, 7).quantile(0.25)
            4.0
        """
        arr = np.asarray(p, dtype=np.float64)
        if np.any(~((arr > 0) & (arr < 1))):
            msg = f"Quantile level must lie in (0, 1), got {p}"
            raise DomainError(msg)
        return self._ppf(arr, like=p)

    def _ppf(self, p: Any, like: Any) -> Any:
        return _scalar_or_array(self._dist.ppf(p), like)

    def sample(self, rng: np.random.Generator, size: int | None = None) -> Any:
        p = rng.random(size)
        return self._ppf(p, like=p)

    def to_standard_normal(self, x: Any) -> Any:
        # Work from whichever tail is smaller so deep-tail values keep their precision.
        cdf = np.asarray(self._dist.cdf(x), dtype=np.float64)
        sf = np.asarray(self._dist.sf(x), dtype=np.float64)
        u = np.where(cdf <= 0.5, special.ndtri(cdf), -special.ndtri(sf))
        return _scalar_or_array(u, x)

    def from_standard_normal(self, u: Any) -> Any:
        arr = np.asarray(u, dtype=np.float64)
        with np.errstate(invalid="ignore"):
            lower = self._dist.ppf(special.ndtr(arr))
            upper = self._dist.isf(special.ndtr(-arr))
        return _scalar_or_array(np.where(arr <= 0, lower, upper), u)


class Normal(Marginal):
    family = "normal"

    def __init__(self, mean: float, std: float) -> None:
        self._mu = float(mean)
        self._sigma = require_positive(std, "std")
        super().__init__(stats.norm(loc=self._mu, scale=self._sigma))

    @property
    def params(self) -> dict[str, float]:
        return {"mean": self._mu, "std": self._sigma}

    def to_standard_normal(self, x: Any) -> Any:
        z = (np.asarray(x, dtype=np.float64) - self._mu) / self._sigma
        return _scalar_or_array(z, x)

    def from_standard_normal(self, u: Any) -> Any:
        x = self._mu + self._sigma * np.asarray(u, dtype=np.float64)
        return _scalar_or_array(x, u)


class Lognormal(Marginal):
    """Distribution of `exp(Y)` with `Y ~ Normal(log_mean, log_std)`."""

    family = "lognormal"

    def __init__(self, log_mean: float, log_std: float) -> None:
        self._log_mean = float(log_mean)
        self._log_std = require_positive(log_std, "log_std")
        super().__init__(stats.lognorm(s=self._log_std, scale=math.exp(self._log_mean)))

    @property
    def params(self) -> dict[str, float]:
        return {"log_mean": self._log_mean, "log_std": self._log_std}

    def to_standard_normal(self, x: Any) -> Any:
        arr = np.asarray(x, dtype=np.float64)
        with np.errstate(divide="ignore", invalid="ignore"):
            u = (np.log(arr) - self._log_mean) / self._log_std
        return _scalar_or_array(u, x)

    def from_standard_normal(self, u: Any) -> Any:
        arr = np.asarray(u, dtype=np.float64)
        return _scalar_or_array(np.exp(self._log_mean + self._log_std * arr), u)


class Uniform(Marginal):
    family = "uniform"

    def __init__(self, lower: float, upper: float) -> None:
        self._lower = float(lower)
        self._upper = float(upper)
        if not self._lower < self._upper:
            msg = f"Uniform bounds must satisfy lower < upper, got ({lower}, {upper})"
            raise InvalidParameterError(msg)
        super().__init__(stats.uniform(loc=self._lower, scale=self._upper - self._lower))

    @property
    def params(self) -> dict[str, float]:
        return {"lower": self._lower, "upper": self._upper}


class WeibullByMean(Marginal):
    """
    Weibull distribution parameterized by its mean strength and modulus.

    The scale is recovered from `scale * gamma(1 + 1 / modulus) == mean_strength`.
    """

    family = "weibull"

    def __init__(self, mean_strength: float, modulus: float) -> None:
        self._mean_strength = require_positive(mean_strength, "mean_strength")
        self._modulus = require_positive(modulus, "modulus")
        self.scale = self._mean_strength / math.gamma(1.0 + 1.0 / self._modulus)
        super().__init__(stats.weibull_min(c=self._modulus, scale=self.scale))

    @property
    def params(self) -> dict[str, float]:
        return {"mean_strength": self._mean_strength, "modulus": self._modulus}


FAMILIES: dict[str, type[Marginal]] = {
    cls.family: cls for cls in (Normal, Lognormal, Uniform, WeibullByMean)
}


def marginal_from_dict(spec: Mapping[str, Any]) -> Marginal:
    family = spec.get("family")
    if family not in FAMILIES:
        msg = (
            f"Unknown distribution family {family!r}; "
            f"expected one of {sorted(FAMILIES)}"
        )
        raise InvalidParameterError(msg)
    params = dict(spec.get("params", {}))
    try:
        return FAMILIES[family](**params)
    except TypeError as exc:
        msg = f"Invalid parameters for {family!r}: {sorted(params)}"
        raise InvalidParameterError(msg) from exc


class ParameterSpace:
    """
    Ordered collection of independent named marginals.

    Arguments:
        marginals: Mapping (or iterable of pairs) from parameter name to marginal.
            Order is preserved and defines the layout of input vectors.

    Examples:
        >>> from rarevent import Normal, ParameterSpace, Uniform
        >>> space = ParameterSpace({"load": Normal(10.0, 2.0), "k": Uniform(0.0, 1.0)})
        >>> space.dimension
        2
        >>> space.names
        ['load', 'k']
    """

    def __init__(
        self, marginals: Mapping[str, Marginal] | Iterable[tuple[str, Marginal]]
    ) -> None:
        items = list(marginals.items() if isinstance(marginals, Mapping) else marginals)
        if not items:
            msg = "A parameter space needs at least one marginal"
            raise InvalidParameterError(msg)
        names = [name for name, _ in items]
        if len(set(names)) != len(names):
            msg = f"Expected unique parameter names, got: {names}"
            raise InvalidParameterError(msg)
        for name, marginal in items:
            if not isinstance(marginal, Marginal):
                msg = f"Expected Marginal for {name!r}, got: {type(marginal)}"
                raise InvalidParameterError(msg)
        self._names = names
        self._marginals = [marginal for _, marginal in items]

    @classmethod
    def standard_normal(cls, dimension: int, *, prefix: str = "x") -> Self:
        return cls({f"{prefix}{i + 1}": Normal(0.0, 1.0) for i in range(dimension)})

    @classmethod
    def from_dict(cls, spec: Iterable[Mapping[str, Any]]) -> Self:
        return cls([(str(item["name"]), marginal_from_dict(item)) for item in spec])

    def to_dict(self) -> list[dict[str, Any]]:
        return [{"name": n, **m.to_dict()} for n, m in zip(self._names, self._marginals)]

    def __repr__(self) -> str:
        body = ", ".join(f"{n}={m!r}" for n, m in zip(self._names, self._marginals))
        return f"ParameterSpace({body})"

    def __len__(self) -> int:
        return len(self._marginals)

    def __iter__(self) -> Iterator[tuple[str, Marginal]]:
        return iter(zip(self._names, self._marginals))

    def __getitem__(self, name: str) -> Marginal:
        return self._marginals[self._names.index(name)]

    def __eq__(self, other: object) -> bool:
        return isinstance(other, ParameterSpace) and other.to_dict() == self.to_dict()

    def __hash__(self) -> int:
        return hash(tuple(self._names))

    @property
    def names(self) -> list[str]:
        return list(self._names)

    @property
    def marginals(self) -> list[Marginal]:
        return list(self._marginals)

    @property
    def dimension(self) -> int:
        return len(self._marginals)

    def _columnwise(self, method: str, values: Any) -> FloatArray:
        # `method` names a vectorized Marginal method applied to each column.
        arr = np.asarray(values, dtype=np.float64)
        single = arr.ndim == 1
        mat = as_matrix(arr.reshape(1, -1) if single else arr, dimension=self.dimension)
        out = np.empty_like(mat)
        for d, marginal in enumerate(self._marginals):
            column = mat[:, d]
            if method == "ppf":
                out[:, d] = marginal._ppf(column, like=column)
            else:
                out[:, d] = getattr(marginal, method)(column)
        return out[0] if single else out

    def sample(self, rng: np.random.Generator, size: int | None = None) -> FloatArray:
        """
        Draw independent samples, one uniform per component mapped through its quantile.

        Arguments:
            rng: Random stream; the draw is deterministic for a fixed seed and draw order.
            size: Number of samples. `None` returns a single vector of length `dimension`.

        Returns:
            Array of shape `(dimension,)` or `(size, dimension)`.
        """
        shape = self.dimension if size is None else (size, self.dimension)
        return self.from_uniform(rng.random(shape))

    def from_uniform(self, p: Any) -> FloatArray:
        """Map points of the unit hypercube through the marginal quantiles."""
        return self._columnwise("ppf", p)

    def latin_hypercube(self, n: int, rng: np.random.Generator) -> FloatArray:
        """Space-filling design of `n` samples, stratified in every dimension."""
        return self.from_uniform(latin_hypercube(n, self.dimension, rng))

    def log_pdf(self, x: Any) -> float:
        vec = as_vector(x, dimension=self.dimension)
        return float(sum(m.log_pdf(float(v)) for m, v in zip(self._marginals, vec)))

    def in_support(self, x: Any) -> bool:
        return math.isfinite(self.log_pdf(x))

    def to_standard_normal(self, x: Any) -> FloatArray:
        return self._columnwise("to_standard_normal", x)

    def from_standard_normal(self, u: Any) -> FloatArray:
        return self._columnwise("from_standard_normal", u)


def sample(space: ParameterSpace, rng: np.random.Generator) -> FloatArray:
    """Draw one input sample from `space`."""
    return space.sample(rng)


def log_pdf(dist: Marginal, x: float) -> float:
    return float(dist.log_pdf(x))


def quantile(dist: Marginal, p: float) -> float:
    """
    Inverse CDF of a marginal.

    Examples:
        >>> from rarevent import Normal
        >>> from rarevent.distributions import quantile
        >>> quantile(Normal(0, 1), 0.5)
        0.0
    """
    return float(dist.quantile(p))


def to_standard_normal(space: ParameterSpace, x: Any) -> FloatArray:
    return space.to_standard_normal(x)


def from_standard_normal(space: ParameterSpace, u: Any) -> FloatArray:
    return space.from_standard_normal(u)
