"""Brute-force verifiers used by the test suite.

Nothing in the production solve path calls this module; it exists so the
analytic and numeric solvers can be checked against independent code.
The projection oracle is exact (exhaustive face enumeration with
least-squares solves and dual filtering); the sampling oracle is a
seeded rejection sampler with local refinement for the full nonlinearly
constrained problem, and its feasibility predicate is the exact ellipsoid
support function rather than the solver's whitened decision rule.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Optional

import numpy as np

from .errors import InputError
from .geometry import Polytope, as_vector, contains
from .lyapunov import SpdMatrix
from .solver import ReferenceProblem

_FEAS_TOL = 1e-9


@dataclass(frozen=True)
class OracleResult:
    best_point: Optional[np.ndarray]
    best_objective: float
    samples_used: int
    certified_unique: bool

    @property
    def feasible_found(self) -> bool:
        return self.best_point is not None


def projection_oracle(region: Polytope, xp) -> OracleResult:
    """Exact projection of ``xp`` onto the region by exhaustive face search.

    Every subset of at most dim(region) faces is treated as an equality
    system; the least-squares minimizer on that affine slice is kept when
    it is primal feasible for the whole region and its multipliers are
    nonnegative.  The best survivor is the projection.  ``certified_unique``
    is set when every other survivor is either the same point or strictly
    worse by more than 1e-10.
    """
    xpv = as_vector(xp, region.dim, "point")
    n = region.dim
    r = region.n_constraints
    candidates = []  # (objective, point)
    if contains(region, xpv, _FEAS_TOL).feasible:
        candidates.append((0.0, xpv.copy()))
    for card in range(1, min(n, r) + 1):
        for comb in combinations(range(r), card):
            idx = np.array(comb, dtype=np.intp)
            a = region.normals[idx]
            gvals = a @ xpv + region.offsets[idx]
            gram_pinv = np.linalg.pinv(a @ a.T, rcond=1e-12)
            point = xpv - a.T @ (gram_pinv @ gvals)
            mu = 2.0 * (gram_pinv @ gvals)
            if np.any(mu < -_FEAS_TOL):
                continue
            if not contains(region, point, _FEAS_TOL).feasible:
                continue
            diff = point - xpv
            candidates.append((float(diff @ diff), point))
    if not candidates:
        raise InputError("region appears to be empty: no feasible face minimizer")
    candidates.sort(key=lambda c: c[0])
    best_obj, best_point = candidates[0]
    unique = True
    for obj, point in candidates[1:]:
        if obj <= best_obj + 1e-10 and np.linalg.norm(point - best_point) > 1e-9:
            unique = False
            break
    return OracleResult(
        best_point=best_point,
        best_objective=best_obj,
        samples_used=len(candidates),
        certified_unique=unique,
    )


def _support_terms(shape: SpdMatrix, op: Polytope) -> np.ndarray:
    # sqrt(nu_k^T P^{-1} nu_k) per constraint
    proj = op.normals @ shape.eigenvectors
    return np.sqrt(np.sum(proj * proj / shape.eigenvalues, axis=1))


def sampling_oracle(prob: ReferenceProblem, budget: int = 10_000, seed: int = 0) -> OracleResult:
    """Approximate optimum of the full problem by seeded rejection sampling.

    Candidate references are drawn uniformly from the reference region's
    bounding box; those whose ellipsoid (through the current state) clears
    the operational region are kept, and the best is refined by coordinate
    descent with shrinking steps.  The objective is the ellipsoid level
    ``(xp - c)^T P (xp - c)`` (squared distance when P = I), which orders
    references exactly as the volume does.  Deterministic given the seed.
    """
    if budget < 10_000:
        raise InputError("sampling budget must be at least 10000")
    rng = np.random.default_rng(seed)
    lo, hi = prob.ref_region.bounding_box()
    p = prob.shape
    xp = prob.xp
    sup = _support_terms(p, prob.op_region)
    base = prob.op_region.normals
    offs = prob.op_region.offsets
    ref_n = prob.ref_region.normals
    ref_o = prob.ref_region.offsets

    def batch_objective(pts: np.ndarray) -> np.ndarray:
        d = pts - xp
        return np.einsum("ij,jk,ik->i", d, p.dense, d)

    def batch_feasible(pts: np.ndarray) -> np.ndarray:
        in_ref = np.max(pts @ ref_n.T + ref_o, axis=1) <= _FEAS_TOL
        level = batch_objective(pts)
        support = pts @ base.T + offs + np.sqrt(np.maximum(level, 0.0))[:, None] * sup
        return in_ref & (np.max(support, axis=1) <= _FEAS_TOL)

    best_point = None
    best_obj = np.inf
    remaining = budget
    chunk = 65_536
    while remaining > 0:
        m = min(chunk, remaining)
        remaining -= m
        pts = rng.uniform(lo, hi, size=(m, lo.shape[0]))
        ok = batch_feasible(pts)
        if not np.any(ok):
            continue
        objs = batch_objective(pts[ok])
        i = int(np.argmin(objs))
        if objs[i] < best_obj:
            best_obj = float(objs[i])
            best_point = pts[ok][i].copy()

    if best_point is None:
        return OracleResult(None, np.inf, budget, False)

    def feasible(pt: np.ndarray) -> bool:
        return bool(batch_feasible(pt[None, :])[0])

    def objective(pt: np.ndarray) -> float:
        return float(batch_objective(pt[None, :])[0])

    step = 0.25 * float(np.max(hi - lo))
    n = lo.shape[0]
    while step > 1e-9:
        improved = False
        for i in range(n):
            for sign in (1.0, -1.0):
                cand = best_point.copy()
                cand[i] += sign * step
                if objective(cand) < best_obj and feasible(cand):
                    best_point, best_obj = cand, objective(cand)
                    improved = True
        if not improved:
            step *= 0.5
    return OracleResult(best_point, best_obj, budget, False)
