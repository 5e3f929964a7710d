from rarevent.akmcs import AkmcsConfig
from rarevent.akmcs import run_akmcs
from rarevent.coupled import CorrectedLf
from rarevent.coupled import CoupledConfig
from rarevent.coupled import GpLf
from rarevent.coupled import GpOnly
from rarevent.coupled import MlpLf
from rarevent.coupled import PhysicsLf
from rarevent.coupled import budget_report
from rarevent.coupled import compare_budgets
from rarevent.coupled import compose_pf
from rarevent.coupled import run_coupled
from rarevent.distributions import Lognormal
from rarevent.distributions import Normal
from rarevent.distributions import ParameterSpace
from rarevent.distributions import Uniform
from rarevent.distributions import WeibullByMean
from rarevent.estimate import FailureEstimate
from rarevent.estimate import reliability_index
from rarevent.kriging import FitOptions
from rarevent.kriging import KernelParams
from rarevent.mlp import MlpConfig
from rarevent.models import Evaluator
from rarevent.models import ModelPair
from rarevent.models import SubprocessEvaluator
from rarevent.models import get_model
from rarevent.subset import SusConfig
from rarevent.subset import crude_monte_carlo
from rarevent.subset import run_sus

__version__ = "0.3.1"

__all__ = [
    "run_akmcs",
    "run_sus",
    "run_coupled",
    "crude_monte_carlo",
    "compose_pf",
    "budget_report",
    "compare_budgets",
    "reliability_index",
    "get_model",
    "AkmcsConfig",
    "SusConfig",
    "CoupledConfig",
    "FitOptions",
    "KernelParams",
    "MlpConfig",
    "GpOnly",
    "CorrectedLf",
    "GpLf",
    "MlpLf",
    "PhysicsLf",
    "FailureEstimate",
    "Evaluator",
    "ModelPair",
    "SubprocessEvaluator",
    "ParameterSpace",
    "Normal",
    "Lognormal",
    "Uniform",
    "WeibullByMean",
]
