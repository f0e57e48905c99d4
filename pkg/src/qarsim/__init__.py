"""Steady-state transport in the 3-level quantum absorption refrigerator.

Three solvers share one Redfield engine: the weak-coupling treatment of
the bare machine (bmr), the reaction-coordinate mapping of the cold and
work baths for arbitrary coupling (rc), and the truncated 3-level model
with renormalized parameters (eff).
"""

from .model import (
    BathSpec,
    BrownianBath,
    OhmicBath,
    QarConfig,
    SystemLevels,
    bose_einstein,
    build_system_hamiltonian,
    default_config,
    spectral_density,
)
from .rcmap import EigenSystem, ExtendedSystem, build_extended_hamiltonian, diagonalize
from .redfield import (
    DissipatorSpec,
    NonUniqueSteadyState,
    RedfieldGenerator,
    SolverFailure,
    SteadyStateResult,
    build_generator,
    gamma_rate,
    heat_current,
    solve_steady_state,
)
from .effective import (
    EffectiveModel,
    TruncationTooSmall,
    build_effective_model,
    eff_steady_state,
    effective_cooling_predicate,
)
from .analysis import (
    ScanPoint,
    ScanTable,
    carnot_cop,
    classify_region,
    convergence_sweep,
    cop,
    scan_grid,
    solve_point,
)

__version__ = "0.1.0"
