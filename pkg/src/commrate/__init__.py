"""Single-contract community-rating insurance model.

A monopolist insurer offers one contract (premium, indemnity) to a
continuum of agents whose loss probabilities follow a Beta distribution.
The package prices contracts under CARA preferences, locates profit- and
welfare-optimal contracts in the unregulated and regulated regimes, and
drives the comparison experiments.
"""

from .errors import ConvergenceError, DomainError, FlatObjectiveWarning, QuadratureWarning
from .market import MarketModel, QuadratureSpec
from .preference import ContractQuote, MarketPrimitives
from .solve import OptimumReport, Regime, SolverConfig
from .specfn import ToleranceConfig
from .typedist import BetaParams, EZPoint, RegionLabel, TypeMeasure

__version__ = "0.1.0"

__all__ = [
    "BetaParams",
    "ContractQuote",
    "ConvergenceError",
    "DomainError",
    "EZPoint",
    "FlatObjectiveWarning",
    "MarketModel",
    "MarketPrimitives",
    "OptimumReport",
    "QuadratureSpec",
    "QuadratureWarning",
    "Regime",
    "RegionLabel",
    "SolverConfig",
    "ToleranceConfig",
    "TypeMeasure",
    "__version__",
]
