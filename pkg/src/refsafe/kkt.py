"""Analytic projection onto a half-space region by active-set enumeration.

Projecting an exterior point ``xp`` onto ``{x : w_j . x + b_j <= 0}``
minimizes ``|x - xp|^2``.  The minimizer sits on the boundary, on the
intersection of some subset of constraint hyperplanes.  For each candidate
subset, stationarity of the Lagrangian gives the multipliers in closed
form from the subset's Gram matrix ``W`` (entries ``w_i . w_j``) and the
constraint values at ``xp``:

    mu = 2 W^{-1} d,    point = xp - (1/2) sum_j mu_j w_j,
    d_j = w_j . xp + b_j.

A candidate survives only if it actually lies on every assumed-active
hyperplane and strictly inside every other constraint; the best survivor
by objective is the projection.  Degenerate subsets (singular or
ill-conditioned ``W``) produce no candidate; if no subset survives at all,
the caller falls back to the numeric path.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import List, Optional, Tuple

import numpy as np

from ._backend import get_backend
from .errors import BudgetError, InputError
from .geometry import Polytope, as_vector

#: Absolute tolerance for the on-boundary / strictly-inside presumption
#: checks.  Unit normals make this a Euclidean distance.
EQ_TOL = 1e-8

#: Gram matrices with a 1-norm condition estimate above this are treated
#: as singular ("not invertible").
COND_LIMIT = 1e12

#: Enumerating more than 2^20 subsets is refused.
MAX_CONSTRAINTS = 20


@dataclass(frozen=True)
class ActiveSet:
    """Sorted, distinct constraint indices assumed active."""

    indices: Tuple[int, ...]

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        if not idx:
            raise InputError("an active set needs at least one index")
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise InputError(f"active-set indices must be sorted and distinct, got {idx}")
        object.__setattr__(self, "indices", idx)

    @property
    def cardinality(self) -> int:
        return len(self.indices)


@dataclass(frozen=True)
class KktCandidate:
    """A surviving stationary point for one active set."""

    point: np.ndarray
    multipliers: np.ndarray
    active_set: ActiveSet
    objective: float
    #: All multipliers >= 0 (recorded for diagnostics; not used to prune,
    #: the feasible-minimum selection already yields the projection).
    dual_feasible: bool


def _validate_region(region: Polytope, xp) -> np.ndarray:
    xpv = as_vector(xp, region.dim, "point")
    if region.n_constraints > MAX_CONSTRAINTS:
        raise BudgetError(
            f"{region.n_constraints} constraints would enumerate up to "
            f"2^{region.n_constraints} subsets; the cap is {MAX_CONSTRAINTS}"
        )
    return xpv


def candidate_for(
    active: ActiveSet,
    region: Polytope,
    xp,
    cond_limit: float = COND_LIMIT,
) -> Optional[KktCandidate]:
    """Stationary-point candidate for one assumed-active subset.

    Returns None when the subset's Gram matrix is numerically singular
    (condition estimate above ``cond_limit``).  The survival checks against
    the full constraint set are the enumerator's job, not this function's.
    """
    xpv = as_vector(xp, region.dim, "point")
    idx = np.asarray(active.indices, dtype=np.intp)
    if idx.max() >= region.n_constraints:
        raise InputError(f"active index {idx.max()} out of range for {region.n_constraints} constraints")
    rows = region.normals[idx]
    w = rows @ rows.T
    try:
        w_inv = np.linalg.inv(w)
    except np.linalg.LinAlgError:
        return None
    cond = np.abs(w).sum(axis=0).max() * np.abs(w_inv).sum(axis=0).max()
    if not np.isfinite(cond) or cond > cond_limit:
        return None
    d = rows @ xpv + region.offsets[idx]
    mu = 2.0 * (w_inv @ d)
    point = xpv - 0.5 * (mu @ rows)
    diff = point - xpv
    return KktCandidate(
        point=point,
        multipliers=mu,
        active_set=active,
        objective=float(diff @ diff),
        dual_feasible=bool(np.all(mu >= -1e-12)),
    )


def _survives(cand: KktCandidate, region: Polytope, tol: float) -> bool:
    vals = region.normals @ cand.point + region.offsets
    idx = np.asarray(cand.active_set.indices, dtype=np.intp)
    if np.max(np.abs(vals[idx])) > tol:
        return False
    inactive = np.ones(region.n_constraints, dtype=bool)
    inactive[idx] = False
    return not np.any(vals[inactive] >= -tol)


def enumerate_candidates(region: Polytope, xp, tol: float = EQ_TOL) -> List[KktCandidate]:
    """All surviving candidates over every subset cardinality.

    Exhaustive (no early exit), so callers can check selection properties;
    the fast path used by :func:`solve_projection` lives in the backend
    kernels.
    """
    xpv = _validate_region(region, xp)
    out: List[KktCandidate] = []
    for card in range(1, region.n_constraints + 1):
        for comb in combinations(range(region.n_constraints), card):
            cand = candidate_for(ActiveSet(comb), region, xpv)
            if cand is not None and _survives(cand, region, tol):
                out.append(cand)
    return out


def solve_projection(
    region: Polytope,
    xp,
    tol: float = EQ_TOL,
    backend: Optional[str] = None,
) -> Optional[KktCandidate]:
    """Projection of an exterior point onto the region, if enumeration finds it.

    Returns the survivor with the smallest objective (ties broken by the
    lexicographically smallest active set) or None when no subset survives;
    interior points also yield None since every candidate requires at least
    one active constraint.
    """
    xpv = _validate_region(region, xp)
    kern = get_backend(backend)
    found, point, active, obj = kern.kkt_best(
        region.normals, region.offsets, xpv, float(tol), COND_LIMIT, region.dim
    )
    if not found:
        return None
    cand = candidate_for(ActiveSet(tuple(active)), region, xpv)
    if cand is None:  # pragma: no cover - kernel only reports invertible subsets
        return None
    return cand
