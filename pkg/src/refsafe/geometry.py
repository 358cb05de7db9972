"""Half-space and polytope primitives shared by every solver.

A region is an intersection of closed half-spaces ``{x : n . x + c <= 0}``.
Normals are unit length after ingestion, so every constraint value is a
signed Euclidean distance to the boundary hyperplane; the squared-distance
tests used by the nonlinear feasibility check rely on that convention.

All types are immutable after construction and all operations are pure,
so concurrent readers are safe.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import linprog

from .errors import InputError

#: Default absolute feasibility tolerance.  Double precision leaves ample
#: headroom above accumulated dot-product error for dimensions <= 50.
DEFAULT_TOL = 1e-9

_UNIT_NORM_SLACK = 1e-9


def as_vector(x, dim: Optional[int] = None, name: str = "vector") -> np.ndarray:
    """Validate and return ``x`` as a finite 1-D float array."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise InputError(f"{name} must be a nonempty 1-D vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{name} has non-finite entries")
    if dim is not None and arr.shape[0] != dim:
        raise InputError(f"{name} has dimension {arr.shape[0]}, expected {dim}")
    return arr


@dataclass(frozen=True)
class HalfSpace:
    """One linear constraint ``normal . x + offset <= 0`` with a unit normal."""

    normal: np.ndarray
    offset: float

    def __post_init__(self):
        arr = as_vector(self.normal, name="normal")
        nrm = float(np.linalg.norm(arr))
        if abs(nrm - 1.0) > _UNIT_NORM_SLACK:
            raise InputError(
                f"half-space normal must be unit length (got |n|={nrm!r}); "
                "ingest raw data through normalize()"
            )
        object.__setattr__(self, "normal", arr)
        object.__setattr__(self, "offset", float(self.offset))

    @property
    def dim(self) -> int:
        return self.normal.shape[0]

    def value(self, x) -> float:
        """Constraint value at ``x``: negative inside, zero on the boundary."""
        xv = as_vector(x, self.dim, "point")
        return float(self.normal @ xv + self.offset)


def normalize(raw_normal, raw_offset: float) -> HalfSpace:
    """Ingest a raw constraint, rescaling so the normal has unit 2-norm.

    The represented half-space is unchanged (both sides of ``<= 0`` are
    divided by ``|raw_normal|``).  Raises :class:`InputError` on a zero
    normal.
    """
    arr = as_vector(raw_normal, name="raw normal")
    nrm = float(np.linalg.norm(arr))
    if nrm <= 0.0:
        raise InputError("cannot normalize a zero normal vector")
    return HalfSpace(arr / nrm, float(raw_offset) / nrm)


def signed_distance(h: HalfSpace, x) -> float:
    """Signed Euclidean distance from ``x`` to the boundary hyperplane of ``h``.

    Negative inside the half-space; valid because normals are unit length.
    """
    return h.value(x)


class RegionKind(Enum):
    REFERENCE = "reference"
    OPERATIONAL = "operational"


@dataclass(frozen=True)
class FeasibilityReport:
    """Outcome of a feasibility predicate.

    ``feasible`` holds iff ``worst_violation <= tol`` for the tolerance the
    predicate was evaluated at; ``violating_index`` names the worst
    constraint when one exists.
    """

    feasible: bool
    worst_violation: float
    violating_index: Optional[int] = None


class Polytope:
    """Intersection of half-spaces, ``{x : N x + c <= 0}`` row-wise.

    ``kind`` distinguishes reference-feasible regions from operational
    regions; operational regions must be bounded (checked once here, at
    ingestion, by LP probes along each +/- coordinate axis) and nonempty.
    """

    __slots__ = ("halfspaces", "kind", "normals", "offsets", "_bbox")

    def __init__(self, halfspaces: Sequence[HalfSpace], kind: RegionKind):
        hs = tuple(halfspaces)
        if not hs:
            raise InputError("a polytope needs at least one half-space")
        dim = hs[0].dim
        for h in hs:
            if h.dim != dim:
                raise InputError("half-space dimensions disagree")
        self.halfspaces = hs
        self.kind = RegionKind(kind)
        self.normals = np.array([h.normal for h in hs], dtype=float)
        self.offsets = np.array([h.offset for h in hs], dtype=float)
        self._bbox = None
        if self.kind is RegionKind.OPERATIONAL:
            self._bbox = self._probe_bounds()

    @property
    def dim(self) -> int:
        return self.normals.shape[1]

    @property
    def n_constraints(self) -> int:
        return self.normals.shape[0]

    @classmethod
    def from_raw(cls, rows: Iterable[Tuple[Sequence[float], float]], kind: RegionKind) -> "Polytope":
        """Build from raw (normal, offset) pairs, normalizing each one."""
        return cls([normalize(n, c) for n, c in rows], kind)

    @classmethod
    def box(cls, lower, upper, kind: RegionKind) -> "Polytope":
        """Axis-aligned box ``lower <= x <= upper``."""
        lo = as_vector(lower, name="lower")
        hi = as_vector(upper, lo.shape[0], "upper")
        if np.any(hi <= lo):
            raise InputError("box upper bounds must exceed lower bounds")
        n = lo.shape[0]
        rows = []
        for i in range(n):
            e = np.zeros(n)
            e[i] = 1.0
            rows.append((e.copy(), -float(hi[i])))
            e[i] = -1.0
            rows.append((e.copy(), float(lo[i])))
        return cls.from_raw(rows, kind)

    def _probe_bounds(self) -> Tuple[np.ndarray, np.ndarray]:
        """Min/max of each coordinate over the region via 2n LPs.

        Raises :class:`InputError` if the region is empty or unbounded in
        any probed direction.
        """
        n = self.dim
        lo = np.empty(n)
        hi = np.empty(n)
        for i in range(n):
            for sign, out in ((1.0, hi), (-1.0, lo)):
                c = np.zeros(n)
                c[i] = -sign  # linprog minimizes; we want max of sign * x_i
                res = linprog(
                    c,
                    A_ub=self.normals,
                    b_ub=-self.offsets,
                    bounds=[(None, None)] * n,
                    method="highs",
                )
                if res.status == 2:
                    raise InputError("operational region is empty")
                if res.status == 3:
                    raise InputError(
                        f"operational region is unbounded along axis {i}; "
                        "it must be compact"
                    )
                if not res.success:
                    raise InputError(f"boundedness probe failed: {res.message}")
                out[i] = sign * -res.fun
        return lo, hi

    def bounding_box(self) -> Tuple[np.ndarray, np.ndarray]:
        """Componentwise (lower, upper) bounds of the region (cached)."""
        if self._bbox is None:
            self._bbox = self._probe_bounds()
        return self._bbox

    def recenter(self, origin) -> "Polytope":
        """The same set expressed in coordinates ``y = x - origin``."""
        o = as_vector(origin, self.dim, "origin")
        shifted = [HalfSpace(h.normal, h.offset + float(h.normal @ o)) for h in self.halfspaces]
        poly = Polytope.__new__(Polytope)
        poly.halfspaces = tuple(shifted)
        poly.kind = self.kind
        poly.normals = self.normals
        poly.offsets = self.offsets + self.normals @ o
        poly._bbox = None
        return poly

    def __repr__(self):
        return f"Polytope({self.n_constraints} half-spaces, dim={self.dim}, kind={self.kind.value})"


def contains(poly: Polytope, x, tol: float = DEFAULT_TOL) -> FeasibilityReport:
    """Membership test: feasible iff every constraint value is <= ``tol``.

    ``worst_violation`` is the largest constraint value (a signed distance,
    thanks to unit normals).
    """
    xv = as_vector(x, poly.dim, "point")
    vals = poly.normals @ xv + poly.offsets
    worst = int(np.argmax(vals))
    worst_val = float(vals[worst])
    return FeasibilityReport(
        feasible=worst_val <= tol,
        worst_violation=worst_val,
        violating_index=worst if worst_val > tol else None,
    )
