"""refsafe: online reference-state re-optimization for reachability safety.

When a linear plant's operational constraints change at runtime, the
Lyapunov ellipsoid that bounds its reachable states may suddenly overlap
the new forbidden set.  Instead of redesigning the controller, this
package moves the controller's reference state: an analytic active-set
projection handles most cases in microseconds, a log-barrier Newton
iteration covers the rest, and a whitening transform extends both to
arbitrary (non-spherical) Lyapunov geometry.  A simulator and benchmark
harness validate the safety and timing story end to end.
"""

from ._backend import backend_name
from .barrier import (
    BarrierProblem,
    NewtonConfig,
    NewtonOutcome,
    NewtonStatus,
    barrier_gradient,
    barrier_hessian,
    barrier_value,
    newton_solve,
)
from .errors import (
    BudgetError,
    DomainError,
    InputError,
    NumericalError,
    RefsafeError,
    StabilityError,
)
from .geometry import (
    DEFAULT_TOL,
    FeasibilityReport,
    HalfSpace,
    Polytope,
    RegionKind,
    contains,
    normalize,
    signed_distance,
)
from .kkt import ActiveSet, KktCandidate, candidate_for, enumerate_candidates, solve_projection
from .lyapunov import (
    Ellipsoid,
    PlantModel,
    SpdMatrix,
    ellipsoid_in_region,
    ellipsoid_through,
    ellipsoid_volume,
    lyap_value,
    solve_lyapunov,
)
from .solver import ReferenceProblem, SolveReport, SolveStatus, check_nonlinear, solve
from .whitening import WhitenTransform, from_spd, transform_problem, unwhiten, whiten

__version__ = "0.1.0"

__all__ = [
    "ActiveSet",
    "BarrierProblem",
    "BudgetError",
    "DEFAULT_TOL",
    "DomainError",
    "Ellipsoid",
    "FeasibilityReport",
    "HalfSpace",
    "InputError",
    "KktCandidate",
    "NewtonConfig",
    "NewtonOutcome",
    "NewtonStatus",
    "NumericalError",
    "PlantModel",
    "Polytope",
    "ReferenceProblem",
    "RefsafeError",
    "RegionKind",
    "SolveReport",
    "SolveStatus",
    "SpdMatrix",
    "StabilityError",
    "WhitenTransform",
    "backend_name",
    "barrier_gradient",
    "barrier_hessian",
    "barrier_value",
    "candidate_for",
    "check_nonlinear",
    "contains",
    "ellipsoid_in_region",
    "ellipsoid_through",
    "ellipsoid_volume",
    "enumerate_candidates",
    "from_spd",
    "lyap_value",
    "newton_solve",
    "normalize",
    "signed_distance",
    "solve",
    "solve_lyapunov",
    "solve_projection",
    "transform_problem",
    "unwhiten",
    "whiten",
    "__version__",
]
