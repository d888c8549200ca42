"""Time-periodic Lotka-Volterra competition with nonlocal dispersal."""

from lvnonlocal.domain import (
    DispersalOperator,
    Grid,
    Kernel,
    Regime,
    assemble_dispersal,
    build_grid,
    build_kernel,
)
from lvnonlocal.errors import (
    ConvergenceError,
    HypothesisError,
    MonotonicityError,
    NegativityError,
    NonFiniteError,
    NumericalError,
    ValidationError,
)
from lvnonlocal.fields import (
    CoefficientBounds,
    CoefficientField,
    StateField,
    compute_bounds,
    order_compare,
    time_average,
)

__version__ = "0.1.0"

from lvnonlocal.dynamics import SystemSpec, integrate, poincare_map  # noqa: E402
from lvnonlocal.ode import ForcedPlanarSystem, lemma31_periodic, reconstruct_grid  # noqa: E402
from lvnonlocal.periodic import (  # noqa: E402
    coexistence_iterate,
    evaluate_criteria,
    extinction_run,
    solve_scalar_periodic,
)
from lvnonlocal.scenario import Scenario  # noqa: E402
from lvnonlocal.spectral import principal_spectrum_point  # noqa: E402

__all__ = [
    "CoefficientBounds",
    "CoefficientField",
    "ConvergenceError",
    "DispersalOperator",
    "Grid",
    "HypothesisError",
    "Kernel",
    "MonotonicityError",
    "NegativityError",
    "NonFiniteError",
    "NumericalError",
    "ForcedPlanarSystem",
    "Regime",
    "Scenario",
    "StateField",
    "SystemSpec",
    "ValidationError",
    "assemble_dispersal",
    "build_grid",
    "build_kernel",
    "coexistence_iterate",
    "compute_bounds",
    "evaluate_criteria",
    "extinction_run",
    "integrate",
    "lemma31_periodic",
    "order_compare",
    "poincare_map",
    "principal_spectrum_point",
    "reconstruct_grid",
    "solve_scalar_periodic",
    "time_average",
]
