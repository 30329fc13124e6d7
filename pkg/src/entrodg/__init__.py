"""Fully-discrete entropy-stable DG solver for conservation laws.

The solver advances a modal DG discretization with SSP time stepping and
certifies a cell entropy inequality after every step by scaling each cell's
high modes toward its mean until the quadrature entropy fits the step's
budget.  Bound-preserving and positivity limiters stack on top without
breaking the certificate, since they only shrink toward the mean further.
"""

__version__ = "0.1.0"

from .dg import (BoundaryCondition, Discretization1D, Discretization2D,
                 Grid1D, Grid2D, custom, dirichlet, outflow, periodic,
                 reflect)
from .diagnostics import (ErrorReport, RunDiagnostics, conservation_sums,
                          convergence_orders, total_entropy, tvb_indicator,
                          windowed_entropy_excess)
from .errors import InadmissibleStateError, OutputError, PreconditionError
from .limiting import (LimiterConfig, StageReport, apply_limiters, bp_limit,
                       cell_entropy_violation, entropy_limit, pp_limit,
                       scale_high_modes)
from .models import (EntropyPair, EulerModel, ScalarModel,
                     buckley_leverett_1d, buckley_leverett_2d, burgers,
                     euler, linear_advection)
from .quadrature import ModalBasis, gauss_legendre, gauss_lobatto
from .scenarios import ScenarioConfig, exact_solution, names, scenario
from .stepping import (FORWARD_EULER, SCHEMES, SSP_MS4, CFLAuditReport,
                       MultistepScheme, Stepper, cfl_audit,
                       compute_step_control, integrate,
                       multistep_bound_factor)

__all__ = [name for name in dir() if not name.startswith("_")]
