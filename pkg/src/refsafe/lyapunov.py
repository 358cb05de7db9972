"""Closed-loop stability algebra: Lyapunov equation, functions, ellipsoids.

For a Hurwitz closed loop ``A_cl = A - B K`` and symmetric positive
definite ``Q``, the Lyapunov equation

    A_cl^T P + P A_cl = -Q

has a unique symmetric positive definite solution ``P``.  The quadratic
form ``V(x) = (x - c)^T P (x - c)`` is then nonincreasing along closed-loop
trajectories targeting the reference ``c``, so the sublevel set through the
current state (the "Lyapunov ellipsoid") bounds every future state.

``solve_lyapunov`` uses dense Kronecker vectorization,

    (I (x) A_cl^T + A_cl^T (x) I) vec(P) = -vec(Q),

an O(n^6) method that is entirely adequate for the desk-scale systems this
library targets; the dimension is capped at ``MAX_LYAPUNOV_DIM``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .errors import InputError, NumericalError, StabilityError
from .geometry import DEFAULT_TOL, FeasibilityReport, Polytope, as_vector, contains

#: Dimension cap for the dense Kronecker Lyapunov solver (O(n^6) memory/time).
MAX_LYAPUNOV_DIM = 30

_SYM_TOL = 1e-12
_RESIDUAL_TOL = 1e-10


def _as_square(m, name: str) -> np.ndarray:
    arr = np.asarray(m, dtype=float)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise InputError(f"{name} must be square, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{name} has non-finite entries")
    return arr


class SpdMatrix:
    """Symmetric positive definite matrix with eagerly cached spectral factors.

    The factors ``U`` (orthogonal, columns are eigenvectors) and
    ``eigenvalues`` (descending, all positive) satisfy
    ``dense = U diag(eigenvalues) U^T``; for an SPD matrix this coincides
    with its singular value decomposition.  Whitening transforms and the
    ellipsoid support function both need the factors, so they are computed
    once at construction.
    """

    __slots__ = ("dense", "eigenvalues", "eigenvectors")

    def __init__(self, dense):
        arr = _as_square(dense, "SPD matrix")
        scale = max(1.0, float(np.abs(arr).max()))
        if float(np.abs(arr - arr.T).max()) > _SYM_TOL * scale:
            raise InputError("matrix is not symmetric to 1e-12 (relative)")
        sym = 0.5 * (arr + arr.T)
        evals, evecs = np.linalg.eigh(sym)
        if evals[0] <= 0.0:
            raise InputError(f"matrix is not positive definite (min eigenvalue {evals[0]!r})")
        order = np.argsort(evals)[::-1]
        self.dense = sym
        self.eigenvalues = np.ascontiguousarray(evals[order])
        self.eigenvectors = np.ascontiguousarray(evecs[:, order])

    @classmethod
    def identity(cls, n: int) -> "SpdMatrix":
        return cls(np.eye(n))

    @property
    def dim(self) -> int:
        return self.dense.shape[0]

    @property
    def det(self) -> float:
        return float(np.prod(self.eigenvalues))

    @property
    def cond(self) -> float:
        return float(self.eigenvalues[0] / self.eigenvalues[-1])

    def quad(self, v) -> float:
        """Quadratic form ``v^T P v``."""
        vv = as_vector(v, self.dim, "vector")
        return float(vv @ self.dense @ vv)

    def inv_apply(self, v) -> np.ndarray:
        """``P^{-1} v`` via the spectral factors."""
        vv = as_vector(v, self.dim, "vector")
        u = self.eigenvectors
        return u @ ((u.T @ vv) / self.eigenvalues)

    def is_spherical(self, rel_tol: float = 1e-9) -> bool:
        """True when all eigenvalues agree to ``rel_tol`` (a scaled identity)."""
        return self.cond <= 1.0 + rel_tol

    def __repr__(self):
        return f"SpdMatrix(dim={self.dim}, cond={self.cond:.3g})"


class PlantModel:
    """Linear plant ``dx/dt = A(x - x_ref) + B u`` with feedback ``u = -K(x - x_ref)``.

    The closed loop ``A_cl = A - B K`` must be Hurwitz; that is checked at
    construction and violation raises :class:`StabilityError`.
    """

    __slots__ = ("a", "b", "k", "a_cl")

    def __init__(self, a, b, k):
        self.a = _as_square(a, "A")
        n = self.a.shape[0]
        self.b = np.asarray(b, dtype=float)
        if self.b.ndim != 2 or self.b.shape[0] != n:
            raise InputError(f"B must be {n} x m, got shape {self.b.shape}")
        m = self.b.shape[1]
        self.k = np.asarray(k, dtype=float)
        if self.k.shape != (m, n):
            raise InputError(f"K must be {m} x {n}, got shape {self.k.shape}")
        if not (np.all(np.isfinite(self.b)) and np.all(np.isfinite(self.k))):
            raise InputError("B or K has non-finite entries")
        self.a_cl = self.a - self.b @ self.k
        _require_hurwitz(self.a_cl)

    @property
    def dim(self) -> int:
        return self.a.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.b.shape[1]


def _require_hurwitz(a_cl: np.ndarray) -> None:
    re_parts = np.linalg.eigvals(a_cl).real
    if np.max(re_parts) >= 0.0:
        raise StabilityError(
            f"closed-loop matrix is not Hurwitz (max eigenvalue real part {np.max(re_parts):.6g})"
        )


@dataclass(frozen=True)
class Ellipsoid:
    """Sublevel set ``{xi : (xi - center)^T P (xi - center) <= level}``."""

    center: np.ndarray
    shape: SpdMatrix
    level: float

    def __post_init__(self):
        c = as_vector(self.center, self.shape.dim, "center")
        object.__setattr__(self, "center", c)
        if self.level < 0.0 or not math.isfinite(self.level):
            raise InputError(f"ellipsoid level must be finite and >= 0, got {self.level!r}")
        object.__setattr__(self, "level", float(self.level))

    @property
    def dim(self) -> int:
        return self.shape.dim


def solve_lyapunov(a_cl, q: Union[SpdMatrix, np.ndarray]) -> SpdMatrix:
    """Solve ``A_cl^T P + P A_cl = -Q`` for symmetric positive definite ``P``.

    Dense Kronecker vectorization with one iterative-refinement pass; the
    returned ``P`` satisfies ``|A_cl^T P + P A_cl + Q|_F <= 1e-10 |Q|_F``
    or :class:`NumericalError` is raised.  ``a_cl`` must be Hurwitz
    (:class:`StabilityError` otherwise) and the dimension is capped at
    ``MAX_LYAPUNOV_DIM`` because the vectorized system is n^2 x n^2.
    """
    a = _as_square(a_cl, "A_cl")
    n = a.shape[0]
    if n > MAX_LYAPUNOV_DIM:
        raise InputError(f"dimension {n} exceeds the dense solver cap {MAX_LYAPUNOV_DIM}")
    qm = q.dense if isinstance(q, SpdMatrix) else SpdMatrix(q).dense
    if qm.shape[0] != n:
        raise InputError(f"Q has dimension {qm.shape[0]}, expected {n}")
    _require_hurwitz(a)

    eye = np.eye(n)
    at = a.T
    kron = np.kron(eye, at) + np.kron(at, eye)
    try:
        vec_p = np.linalg.solve(kron, -qm.reshape(-1, order="F"))
        p = vec_p.reshape((n, n), order="F")
        # one refinement pass knocks the residual down to the fp floor
        resid = at @ p + p @ a + qm
        vec_d = np.linalg.solve(kron, -resid.reshape(-1, order="F"))
        p = p + vec_d.reshape((n, n), order="F")
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"Lyapunov system is singular: {exc}") from exc

    p = 0.5 * (p + p.T)
    q_norm = float(np.linalg.norm(qm))
    resid = float(np.linalg.norm(at @ p + p @ a + qm))
    if resid > _RESIDUAL_TOL * q_norm:
        raise NumericalError(
            f"Lyapunov residual {resid:.3e} exceeds {_RESIDUAL_TOL:.0e} * |Q|_F = {_RESIDUAL_TOL * q_norm:.3e}"
        )
    try:
        return SpdMatrix(p)
    except InputError as exc:
        raise NumericalError(f"Lyapunov solution is not positive definite: {exc}") from exc


def lyap_value(e: Ellipsoid, x) -> float:
    """Evaluate ``V(x) = (x - center)^T P (x - center)`` for the ellipsoid's data."""
    xv = as_vector(x, e.dim, "point")
    return e.shape.quad(xv - e.center)


def quad_form(shape: SpdMatrix, center, x) -> float:
    """``(x - center)^T P (x - center)`` without building an Ellipsoid."""
    c = as_vector(center, shape.dim, "center")
    xv = as_vector(x, shape.dim, "point")
    return shape.quad(xv - c)


def ellipsoid_through(center, shape: SpdMatrix, boundary_point) -> Ellipsoid:
    """Ellipsoid centered at ``center`` whose boundary passes through ``boundary_point``."""
    level = quad_form(shape, center, boundary_point)
    return Ellipsoid(center=as_vector(center, shape.dim, "center"), shape=shape, level=max(level, 0.0))


def unit_ball_volume(n: int) -> float:
    """Volume of the n-dimensional Euclidean unit ball."""
    return math.pi ** (n / 2.0) / math.gamma(n / 2.0 + 1.0)


def ellipsoid_volume(e: Ellipsoid) -> float:
    """Volume ``V_n level^{n/2} / sqrt(det P)`` (zero for a degenerate level)."""
    n = e.dim
    if e.level == 0.0:
        return 0.0
    return unit_ball_volume(n) * e.level ** (n / 2.0) / math.sqrt(e.shape.det)


def support_values(e: Ellipsoid, region: Polytope) -> np.ndarray:
    """Per-constraint max of ``nu_k . xi + beta_k`` over the ellipsoid.

    Closed form ``nu . c + beta + sqrt(level * nu^T P^{-1} nu)``; a value
    <= 0 means the ellipsoid is inside that half-space.
    """
    if region.dim != e.dim:
        raise InputError(f"region dimension {region.dim} != ellipsoid dimension {e.dim}")
    u = e.shape.eigenvectors
    proj = region.normals @ u  # (k, n)
    inv_quad = np.sum(proj * proj / e.shape.eigenvalues, axis=1)
    return region.normals @ e.center + region.offsets + np.sqrt(e.level * inv_quad)


def ellipsoid_in_region(e: Ellipsoid, region: Polytope, tol: float = DEFAULT_TOL) -> FeasibilityReport:
    """Exact containment test of an ellipsoid in a polytopic region.

    Uses the support function per constraint, which serves spheres and
    general ellipsoids alike.  The ellipsoid center must itself lie in the
    region; if it does not, that precondition violation is reported as an
    infeasible result (not an exception).
    """
    center_rep = contains(region, e.center, tol)
    if not center_rep.feasible:
        return center_rep
    vals = support_values(e, region)
    worst = int(np.argmax(vals))
    worst_val = float(vals[worst])
    return FeasibilityReport(
        feasible=worst_val <= tol,
        worst_violation=worst_val,
        violating_index=worst if worst_val > tol else None,
    )
