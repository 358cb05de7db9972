"""Log-barrier reformulation and damped Newton solver.

The constrained reference-selection problem

    min |x - xp|^2   s.t.  g_j(x) <= 0,  q_k(x) <= 0

is replaced by the unconstrained

    F(x) = f(x) - (1/lam) sum_j ln(-g_j(x)) - (1/lam) sum_k ln(-q_k(x)),

minimized by Newton steps ``x <- x - eta [H F]^{-1} grad F``.  Larger
``lam`` approximates the original problem more tightly (default 1e6).  The
linear constraints g are the reference-region half-spaces; each nonlinear
constraint ``q_k(x) = |x - xp|^2 - (nu_k . x + beta_k)^2`` keeps the ball
through ``xp`` inside operational half-space k (unit normals make the
squared term a squared distance).

An optional metric matrix M generalizes the quadratic terms to
``|M (x - xp)|^2`` (in the q constraints, and in the objective too when
``metric_in_objective`` is set).  The production solver does not use the
metric (it whitens coordinates first, where the plain form is exact); the
variant exists so the generalized expressions can be tested directly.

Step size starts at ``eta`` and is halved until the iterate is strictly
feasible and F decreases; this damping keeps the iteration map intact at
acceptance while preventing the log terms from being evaluated outside
their domain.  Set ``backtracking=False`` for the fixed-step variant.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from ._backend import get_backend
from ._kernels import barrier_eval
from .errors import DomainError, InputError
from .geometry import Polytope, as_vector

_EMPTY = np.empty((0,))


@dataclass(frozen=True)
class NewtonConfig:
    """Iteration parameters: step size, stop bound, iteration cap, barrier weight."""

    eta: float = 1.0
    epsilon: float = 1e-9
    n_max: int = 200
    lam: float = 1e6
    backtracking: bool = True

    def __post_init__(self):
        if self.eta <= 0 or self.epsilon <= 0 or self.n_max <= 0 or self.lam <= 0:
            raise InputError("eta, epsilon, n_max and lam must all be positive")


class NewtonStatus(Enum):
    CONVERGED = "converged"
    FAILURE = "failure"


@dataclass(frozen=True)
class NewtonOutcome:
    status: NewtonStatus
    point: Optional[np.ndarray]
    iterations: int
    final_objective: float

    @property
    def converged(self) -> bool:
        return self.status is NewtonStatus.CONVERGED


class BarrierProblem:
    """Problem data for the barrier objective.

    ``ref_region`` supplies the linear constraints and ``op_region`` the
    nonlinear ball-clearance constraints; either may be None for an
    unconstrained term (useful in tests).  ``metric`` is the optional
    matrix M described in the module docstring.
    """

    __slots__ = ("xp", "g_normals", "g_offsets", "q_normals", "q_offsets",
                 "lam", "metric", "gram", "metric_in_objective")

    def __init__(
        self,
        xp,
        ref_region: Optional[Polytope] = None,
        op_region: Optional[Polytope] = None,
        lam: float = 1e6,
        metric: Optional[np.ndarray] = None,
        metric_in_objective: bool = False,
    ):
        self.xp = as_vector(xp, name="xp")
        n = self.xp.shape[0]
        if lam <= 0:
            raise InputError("barrier weight lam must be positive")
        self.lam = float(lam)
        if ref_region is not None and ref_region.dim != n:
            raise InputError(f"reference region dimension {ref_region.dim} != {n}")
        if op_region is not None and op_region.dim != n:
            raise InputError(f"operational region dimension {op_region.dim} != {n}")
        self.g_normals = ref_region.normals if ref_region is not None else np.empty((0, n))
        self.g_offsets = ref_region.offsets if ref_region is not None else _EMPTY
        self.q_normals = op_region.normals if op_region is not None else np.empty((0, n))
        self.q_offsets = op_region.offsets if op_region is not None else _EMPTY
        if metric is not None:
            m = np.asarray(metric, dtype=float)
            if m.shape != (n, n):
                raise InputError(f"metric must be {n} x {n}, got {m.shape}")
            if abs(np.linalg.det(m)) <= 0.0:
                raise InputError("metric matrix must be nonsingular")
            self.metric = m
            self.gram = np.ascontiguousarray(m.T @ m)
        else:
            self.metric = None
            self.gram = None
        if metric_in_objective and metric is None:
            raise InputError("metric_in_objective requires a metric")
        self.metric_in_objective = bool(metric_in_objective)

    @property
    def dim(self) -> int:
        return self.xp.shape[0]

    def constraint_values(self, x):
        """(g values, q values) at ``x``."""
        xv = as_vector(x, self.dim, "point")
        d = xv - self.xp
        t0 = float(d @ (self.gram @ d)) if self.gram is not None else float(d @ d)
        g = self.g_normals @ xv + self.g_offsets
        qlin = self.q_normals @ xv + self.q_offsets
        return g, t0 - qlin * qlin

    def strictly_feasible(self, x, margin: float = 0.0) -> bool:
        g, q = self.constraint_values(x)
        return bool((g.size == 0 or g.max() < -margin) and (q.size == 0 or q.max() < -margin))

    def _eval(self, x, order: int):
        xv = as_vector(x, self.dim, "point")
        res = barrier_eval(xv, self.xp, self.g_normals, self.g_offsets,
                           self.q_normals, self.q_offsets, self.gram,
                           self.metric_in_objective, self.lam, order)
        if res is None:
            raise DomainError("point is on or outside a barrier (log of a non-positive value)")
        return res


def barrier_value(p: BarrierProblem, x) -> float:
    """F(x); raises :class:`DomainError` off the strictly feasible domain."""
    return p._eval(x, 0)[0]


def barrier_gradient(p: BarrierProblem, x) -> np.ndarray:
    """Exact analytic gradient of F at a strictly feasible point."""
    return p._eval(x, 1)[1]


def barrier_hessian(p: BarrierProblem, x) -> np.ndarray:
    """Exact analytic Hessian of F at a strictly feasible point (symmetric)."""
    return p._eval(x, 2)[2]


def newton_solve(
    p: BarrierProblem,
    start,
    cfg: Optional[NewtonConfig] = None,
    backend: Optional[str] = None,
) -> NewtonOutcome:
    """Run the damped Newton iteration from a strictly feasible start.

    Raises :class:`InputError` when the start is not strictly feasible
    (callers must supply an interior point); otherwise every iterate stays
    strictly feasible and the outcome is CONVERGED (step norm below
    ``cfg.epsilon`` with finite F) or FAILURE (iteration cap, or a fixed
    step escaping the domain when backtracking is disabled).
    """
    cfg = cfg or NewtonConfig()
    x0 = as_vector(start, p.dim, "start")
    if not p.strictly_feasible(x0):
        raise InputError("Newton start point must be strictly feasible for all barriers")
    kern = get_backend(backend)
    ok, x, iters, fval = kern.newton_minimize(
        x0, p.xp, p.g_normals, p.g_offsets, p.q_normals, p.q_offsets,
        p.gram, p.metric_in_objective, p.lam,
        float(cfg.eta), float(cfg.epsilon), int(cfg.n_max), bool(cfg.backtracking),
    )
    if not ok:
        return NewtonOutcome(NewtonStatus.FAILURE, None, iters, float(fval))
    return NewtonOutcome(NewtonStatus.CONVERGED, np.asarray(x), iters, float(fval))


def find_interior(
    p: BarrierProblem,
    x0,
    extra_normals: Optional[np.ndarray] = None,
    extra_offsets: Optional[np.ndarray] = None,
    margin: float = 1e-9,
    lam: float = 50.0,
    n_max: int = 150,
) -> Optional[np.ndarray]:
    """Phase-I search for a strictly feasible point of ``p``.

    Minimizes the worst constraint value s over (x, s) with the barrier
    ``s - (1/lam) sum ln(s - c_i(x))`` where the c_i are p's g and q
    constraints plus optional extra linear constraints (used for the
    operational side conditions, which pin the correct branch of each
    sign-blind q constraint).  Stops as soon as the worst value drops below
    ``-margin`` and returns that x; returns None if it never does.

    The start ``x0`` may violate constraints; s starts above the worst
    violation, so the augmented problem always has an interior start.
    """
    x = as_vector(x0, p.dim, "start").copy()
    n = x.shape[0]
    en = extra_normals if extra_normals is not None else np.empty((0, n))
    eo = extra_offsets if extra_offsets is not None else _EMPTY

    def cons(xv):
        g, q = p.constraint_values(xv)
        extra = en @ xv + eo
        return np.concatenate([g, q, extra])

    def cons_grads(xv):
        d = xv - p.xp
        gd = d if p.gram is None else p.gram @ d
        qlin = p.q_normals @ xv + p.q_offsets
        gq = 2.0 * gd[None, :] - 2.0 * qlin[:, None] * p.q_normals
        return np.vstack([p.g_normals, gq, en])

    q_hess_base = 2.0 * (np.eye(n) if p.gram is None else p.gram)
    n_g = p.g_normals.shape[0]
    n_q = p.q_normals.shape[0]

    s = float(np.max(cons(x))) + 1.0
    for _ in range(n_max):
        c = cons(x)
        worst = float(np.max(c))
        if worst < -margin:
            return x
        h = s - c  # all positive by construction
        grads = cons_grads(x)
        inv_h = 1.0 / h
        # gradient of F1(x, s) = s - (1/lam) sum ln(s - c_i)
        gx = (grads.T @ inv_h) / lam
        gs = 1.0 - inv_h.sum() / lam
        # Hessian blocks
        inv_h2 = inv_h * inv_h
        hxx = ((grads * inv_h2[:, None]).T @ grads) / lam
        q_invh = inv_h[n_g:n_g + n_q]
        if n_q:
            hxx += q_invh.sum() * q_hess_base / lam
            hxx -= 2.0 * ((p.q_normals * q_invh[:, None]).T @ p.q_normals) / lam
        hxs = -(grads.T @ inv_h2) / lam
        hss = inv_h2.sum() / lam
        full_h = np.zeros((n + 1, n + 1))
        full_h[:n, :n] = hxx
        full_h[:n, n] = hxs
        full_h[n, :n] = hxs
        full_h[n, n] = hss
        full_g = np.concatenate([gx, [gs]])
        try:
            step = np.linalg.solve(full_h + 1e-12 * np.eye(n + 1), full_g)
        except np.linalg.LinAlgError:
            step = full_g
        eta = 1.0
        moved = False
        f_cur = s - np.log(h).sum() / lam
        while eta > 1e-16:
            xn = x - eta * step[:n]
            sn = s - eta * step[n]
            hn = sn - cons(xn)
            if np.all(hn > 0.0):
                fn = sn - np.log(hn).sum() / lam
                if fn < f_cur:
                    x, s = xn, sn
                    moved = True
                    break
            eta *= 0.5
        if not moved:
            break
    return x if float(np.max(cons(x))) < -margin else None
