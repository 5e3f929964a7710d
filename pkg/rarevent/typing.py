from typing import TYPE_CHECKING  # pragma: no cover
from typing import Union  # pragma: no cover

if TYPE_CHECKING:
    import sys

    if sys.version_info >= (3, 10):
        from typing import TypeAlias
    else:
        from typing_extensions import TypeAlias

    import numpy as np
    from numpy.typing import NDArray

    from rarevent.models import Evaluator
    from rarevent.models import ModelPair

    FloatArray: TypeAlias = NDArray[np.float64]
    IntoVector: TypeAlias = Union[FloatArray, "list[float]", "tuple[float, ...]"]
    IntoModel: TypeAlias = Union[Evaluator, ModelPair]
    Seed: TypeAlias = Union[int, np.random.Generator, None]
