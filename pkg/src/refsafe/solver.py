"""Online reference-state re-optimization.

When the operational region changes at runtime, the controller keeps its
gain and Lyapunov matrix; only the reference state moves.  The new
reference must lie in the reference-feasible region (R2) and the Lyapunov
ellipsoid through the current state, recentered on the new reference, must
clear the new operational region (R1); among such references we minimize
the ellipsoid volume (R3).

The solve runs in three stages:

1. If the current state is itself a feasible reference, it is the global
   optimum (the ellipsoid degenerates to a point).
2. Otherwise the analytic active-set enumeration projects the current
   state onto the reference region; if that projection also clears the
   operational region, it is optimal.
3. Otherwise a log-barrier Newton iteration solves the full problem
   numerically from a strictly feasible interior start.

Non-spherical Lyapunov matrices are handled by whitening: in coordinates
where the ellipsoid is a sphere, stages 2 and 3 apply verbatim, and the
volume objective reduces to the squared distance to the current state.
Every non-failure result is certified independently (reference membership
plus the exact ellipsoid support function) before it is reported; the
solver's own feasibility decisions are never trusted for the certificate.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Tuple

import numpy as np
from scipy.optimize import linprog

from . import kkt, whitening
from .barrier import BarrierProblem, NewtonConfig, find_interior, newton_solve
from .errors import InputError
from .geometry import DEFAULT_TOL, FeasibilityReport, Polytope, RegionKind, as_vector, contains
from .lyapunov import Ellipsoid, SpdMatrix, ellipsoid_in_region, ellipsoid_through, ellipsoid_volume

#: Tolerance for the independent R1/R2 certificates (allows for transform
#: round-off on top of the 1e-9 working tolerance; stays well below the
#: 1e-6 trajectory violation monitor).
CERT_TOL = 1e-7


class SolveStatus(Enum):
    #: current state accepted as the new reference directly
    DIRECT = "direct"
    #: analytic active-set projection accepted
    KKT = "kkt"
    #: barrier Newton fallback accepted
    NEWTON = "newton"
    #: controller-redesign baseline accepted (produced by the simulator)
    REDESIGN = "redesign"
    FAILURE = "failure"


@dataclass(frozen=True)
class SolveReport:
    """Outcome of one reference re-optimization (or baseline redesign)."""

    status: SolveStatus
    reference: Optional[np.ndarray]
    ellipsoid: Optional[Ellipsoid]
    objective_volume: float
    elapsed: float  # seconds, wall clock
    margin: float  # worst support slack of the ellipsoid vs the region (<= 0 is safe)
    reason: str = ""

    @property
    def succeeded(self) -> bool:
        return self.status is not SolveStatus.FAILURE

    @property
    def elapsed_us(self) -> float:
        return self.elapsed * 1e6


class ReferenceProblem:
    """One re-optimization instance.

    The current state must lie strictly inside the (bounded) operational
    region: if it does not, no reference choice can rescue the plant and
    construction is refused.
    """

    __slots__ = ("ref_region", "op_region", "xp", "shape")

    def __init__(self, ref_region: Polytope, op_region: Polytope, xp, shape: SpdMatrix):
        if op_region.kind is not RegionKind.OPERATIONAL:
            raise InputError("op_region must have kind OPERATIONAL (bounded at ingestion)")
        n = shape.dim
        if ref_region.dim != n or op_region.dim != n:
            raise InputError("region dimensions do not match the Lyapunov matrix")
        self.xp = as_vector(xp, n, "current state")
        inside = contains(op_region, self.xp, 0.0)
        if not inside.feasible or inside.worst_violation >= 0.0:
            raise InputError(
                "current state is not strictly inside the operational region "
                f"(worst slack {inside.worst_violation:.3e}); the plant cannot be rescued"
            )
        self.ref_region = ref_region
        self.op_region = op_region
        self.shape = shape

    @property
    def dim(self) -> int:
        return self.shape.dim


def _working_frame(prob: ReferenceProblem, force_whiten: bool):
    """Problem data in coordinates where the ellipsoid is a sphere.

    For a scaled-identity Lyapunov matrix the original coordinates already
    qualify.  Otherwise the frame is recentered at the current state and
    whitened, so the transformed current state is the origin.
    """
    if prob.shape.is_spherical() and not force_whiten:
        return None, prob.ref_region, prob.op_region, prob.xp
    t = whitening.from_spd(prob.shape)
    ref_w, op_w, _, _ = whitening.transform_problem(
        t, prob.ref_region.recenter(prob.xp), prob.op_region.recenter(prob.xp), np.zeros(prob.dim)
    )
    return t, ref_w, op_w, np.zeros(prob.dim)


def _to_state_coords(trans, prob: ReferenceProblem, y: np.ndarray) -> np.ndarray:
    if trans is None:
        return np.asarray(y, dtype=float)
    return whitening.unwhiten(trans, y) + prob.xp


def _clearance_report(point: np.ndarray, xp: np.ndarray, op: Polytope, tol: float) -> FeasibilityReport:
    """Ball-clearance constraints in sphere coordinates.

    For each operational half-space: the side condition ``nu . x + beta <= 0``
    (the squared form is sign-blind, so a center beyond the hyperplane could
    pass it) and ``q = |x - xp|^2 - (nu . x + beta)^2 <= 0``.  The report's
    worst violation is the worst of either family so that feasibility and
    the reported value stay consistent.
    """
    side = op.normals @ point + op.offsets
    diff = point - xp
    q = float(diff @ diff) - side * side
    combined = np.maximum(q, side)
    worst = int(np.argmax(combined))
    worst_val = float(combined[worst])
    return FeasibilityReport(
        feasible=worst_val <= tol,
        worst_violation=worst_val,
        violating_index=worst if worst_val > tol else None,
    )


def check_nonlinear(candidate, prob: ReferenceProblem, tol: float = DEFAULT_TOL) -> FeasibilityReport:
    """Does this reference keep the Lyapunov ellipsoid inside the operational region?

    Evaluated in sphere coordinates (identity for scaled-identity Lyapunov
    matrices, whitened otherwise), including the side conditions.
    """
    cand = as_vector(candidate, prob.dim, "candidate")
    trans, _, op_w, xp_w = _working_frame(prob, force_whiten=False)
    if trans is None:
        return _clearance_report(cand, xp_w, op_w, tol)
    cand_w = whitening.whiten(trans, cand - prob.xp)
    return _clearance_report(cand_w, xp_w, op_w, tol)


def _certify(prob: ReferenceProblem, reference: np.ndarray, tol: float = CERT_TOL):
    """Independent R1/R2 certificates for a proposed reference."""
    ref_ok = contains(prob.ref_region, reference, tol)
    ell = ellipsoid_through(reference, prob.shape, prob.xp)
    op_ok = ellipsoid_in_region(ell, prob.op_region, tol)
    return ref_ok, op_ok, ell


def _chebyshev_start(ref_w: Polytope, op_w: Polytope) -> Optional[np.ndarray]:
    """Deepest point of the reference region intersected with the side conditions.

    LP over (x, t): maximize t subject to every constraint value <= -t.
    Unit normals make t the true minimum slack.  The side conditions bound
    the feasible set (the operational region is compact), so the LP is
    bounded whenever the intersection is nonempty.
    """
    n = ref_w.dim
    rows = np.vstack([ref_w.normals, op_w.normals])
    offs = np.concatenate([ref_w.offsets, op_w.offsets])
    a_ub = np.hstack([rows, np.ones((rows.shape[0], 1))])
    c = np.zeros(n + 1)
    c[n] = -1.0
    res = linprog(c, A_ub=a_ub, b_ub=-offs, bounds=[(None, None)] * (n + 1), method="highs")
    if not res.success or res.x[n] <= 0.0:
        return None
    return res.x[:n]


def _interior_start(ref_w: Polytope, op_w: Polytope, xp_w: np.ndarray, lam: float) -> Optional[np.ndarray]:
    bp = BarrierProblem(xp_w, ref_w, op_w, lam=lam)
    x0 = _chebyshev_start(ref_w, op_w)
    if x0 is not None and bp.strictly_feasible(x0, margin=1e-12):
        return x0
    if x0 is None:
        # fall back to the midpoint of the reference region's bounding box
        try:
            lo, hi = ref_w.bounding_box()
        except InputError:
            return None
        x0 = 0.5 * (lo + hi)
    found = find_interior(bp, x0, extra_normals=op_w.normals, extra_offsets=op_w.offsets)
    if found is not None and bp.strictly_feasible(found, margin=0.0):
        return found
    return None


def _report(prob, status, reference, elapsed, reason):
    ref_ok, op_ok, ell = _certify(prob, reference)
    if not (ref_ok.feasible and op_ok.feasible):
        return None, (ref_ok, op_ok)
    return (
        SolveReport(
            status=status,
            reference=reference,
            ellipsoid=ell,
            objective_volume=ellipsoid_volume(ell),
            elapsed=elapsed,
            margin=op_ok.worst_violation,
            reason=reason,
        ),
        None,
    )


def solve(
    prob: ReferenceProblem,
    cfg: Optional[NewtonConfig] = None,
    mode: str = "auto",
    force_whiten: bool = False,
) -> SolveReport:
    """Run the staged solve; never raises for solver-level failure.

    ``mode`` limits the stages: ``auto`` (default) runs the full pipeline,
    ``kkt-only`` stops after the analytic stage, ``newton-only`` skips it.
    ``force_whiten`` routes scaled-identity matrices through the whitening
    path as well (used to test transform transparency).
    """
    if mode not in ("auto", "kkt-only", "newton-only"):
        raise InputError(f"unknown mode {mode!r}")
    cfg = cfg or NewtonConfig()
    t_start = time.perf_counter()

    # the region is closed, so a boundary state counts as feasible here
    direct = contains(prob.ref_region, prob.xp, DEFAULT_TOL)
    if direct.feasible:
        ell = Ellipsoid(center=prob.xp.copy(), shape=prob.shape, level=0.0)
        margin = ellipsoid_in_region(ell, prob.op_region, CERT_TOL).worst_violation
        return SolveReport(
            status=SolveStatus.DIRECT,
            reference=prob.xp.copy(),
            ellipsoid=ell,
            objective_volume=0.0,
            elapsed=time.perf_counter() - t_start,
            margin=margin,
            reason="current state is a feasible reference",
        )

    trans, ref_w, op_w, xp_w = _working_frame(prob, force_whiten)
    notes = []

    if mode in ("auto", "kkt-only"):
        cand = kkt.solve_projection(ref_w, xp_w)
        if cand is None:
            notes.append("no analytic projection candidate")
        else:
            clearance = _clearance_report(cand.point, xp_w, op_w, DEFAULT_TOL)
            if clearance.feasible:
                reference = _to_state_coords(trans, prob, cand.point)
                report, certs = _report(
                    prob, SolveStatus.KKT, reference, time.perf_counter() - t_start,
                    "analytic projection cleared the operational region",
                )
                if report is not None:
                    return report
                notes.append("analytic candidate failed certification")
            else:
                notes.append(
                    f"projection violates clearance constraint {clearance.violating_index}"
                )
        if mode == "kkt-only":
            return SolveReport(
                status=SolveStatus.FAILURE,
                reference=None,
                ellipsoid=None,
                objective_volume=float("nan"),
                elapsed=time.perf_counter() - t_start,
                margin=float("nan"),
                reason="; ".join(notes),
            )

    start = _interior_start(ref_w, op_w, xp_w, cfg.lam)
    if start is None:
        notes.append("no strictly feasible interior point found")
    else:
        bp = BarrierProblem(xp_w, ref_w, op_w, lam=cfg.lam)
        outcome = newton_solve(bp, start, cfg)
        if outcome.converged:
            reference = _to_state_coords(trans, prob, outcome.point)
            report, certs = _report(
                prob, SolveStatus.NEWTON, reference, time.perf_counter() - t_start,
                f"barrier iteration converged in {outcome.iterations} steps",
            )
            if report is not None:
                return report
            notes.append("numeric solution failed certification")
        else:
            notes.append(f"barrier iteration failed after {outcome.iterations} steps")

    return SolveReport(
        status=SolveStatus.FAILURE,
        reference=None,
        ellipsoid=None,
        objective_volume=float("nan"),
        elapsed=time.perf_counter() - t_start,
        margin=float("nan"),
        reason="; ".join(notes),
    )
