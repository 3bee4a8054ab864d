"""Energy-minimal computation offloading for edge systems with shared data.

Core pieces: the system model and its pure evaluators (`model`), the
Lambert-W rate forms (`lambertw`), the Lagrangian-dual solver with ellipsoid
ascent and primal recovery (`dual_solver`), comparison schemes
(`baselines`), independent verification solvers (`oracle`), and the config /
sweep / CSV layer behind the `edgeshare` command (`config`, `cli`).
"""

from .baselines import (BaselineKind, SchemeResult, equal_time,
                        full_offload_only, local_only, no_shared_awareness)
from .dual_solver import (DualEvalResult, SolverOptions, eval_dual,
                          kkt_residuals, solve)
from .lambertw import lambert_w0, rate_from_dual, w0p1
from .model import (Allocation, DualPoint, InfeasibleScenarioError, Scenario,
                    SolveReport, SystemParams, UserParams)
from .oracle import (OracleResult, energy_gradient, grid_solve,
                     projected_gradient_solve)

__all__ = [
    "Allocation", "BaselineKind", "DualEvalResult", "DualPoint",
    "InfeasibleScenarioError", "OracleResult", "Scenario", "SchemeResult",
    "SolveReport", "SolverOptions", "SystemParams", "UserParams",
    "energy_gradient", "equal_time", "eval_dual", "full_offload_only",
    "grid_solve", "kkt_residuals", "lambert_w0", "local_only",
    "no_shared_awareness", "projected_gradient_solve", "rate_from_dual",
    "solve", "w0p1",
]

__version__ = "0.1.0"
