"""Pure-numpy compute kernels.

These are the fallback twins of the compiled kernels in
``refsafe._speedups``: same inputs, same selection rules, same stopping
rules.  Keep the two in sync; ``tests/test_backends.py`` checks parity.

All array arguments must be float64; normals are unit rows.
"""

from __future__ import annotations

from itertools import combinations
from typing import Optional, Tuple

import numpy as np

BACKEND_NAME = "python"


# ---------------------------------------------------------------------------
# Active-set enumeration for the linear-constraint projection subproblem
# ---------------------------------------------------------------------------

def kkt_best(
    normals: np.ndarray,
    offsets: np.ndarray,
    xp: np.ndarray,
    eq_tol: float,
    cond_limit: float,
    dim_hint: int,
) -> Tuple[bool, Optional[np.ndarray], Optional[Tuple[int, ...]], float]:
    """Best surviving stationary-point candidate over all active subsets.

    For each subset of constraints assumed active, the candidate point is
    the stationary point of the squared-distance Lagrangian restricted to
    that subset (Gram-matrix solve); it survives only if it sits on every
    assumed-active boundary (|value| <= eq_tol) and strictly inside every
    other constraint (value < -eq_tol).  Gram matrices with 1-norm
    condition estimate above ``cond_limit`` are treated as singular.

    Subsets are scanned by cardinality then lexicographically; the scan
    stops after the first cardinality >= dim_hint that holds a survivor
    (a projection activates at most dim_hint independent constraints).
    Ties on the objective prefer the lexicographically smallest subset.
    """
    r = offsets.shape[0]
    gram = normals @ normals.T
    g0 = normals @ xp + offsets

    best_obj = np.inf
    best_active: Optional[Tuple[int, ...]] = None
    best_point: Optional[np.ndarray] = None

    for card in range(1, r + 1):
        for comb in combinations(range(r), card):
            idx = np.array(comb, dtype=np.intp)
            w = gram[np.ix_(idx, idx)]
            try:
                w_inv = np.linalg.inv(w)
            except np.linalg.LinAlgError:
                continue
            cond = np.abs(w).sum(axis=0).max() * np.abs(w_inv).sum(axis=0).max()
            if not np.isfinite(cond) or cond > cond_limit:
                continue
            mu = 2.0 * (w_inv @ g0[idx])
            point = xp - 0.5 * (mu @ normals[idx])
            vals = normals @ point + offsets
            if np.max(np.abs(vals[idx])) > eq_tol:
                continue
            inactive = np.ones(r, dtype=bool)
            inactive[idx] = False
            if np.any(vals[inactive] >= -eq_tol):
                continue
            diff = point - xp
            obj = float(diff @ diff)
            if obj < best_obj or (obj == best_obj and (best_active is None or comb < best_active)):
                best_obj = obj
                best_active = comb
                best_point = point
        if best_active is not None and card >= dim_hint:
            break

    return best_active is not None, best_point, best_active, best_obj


# ---------------------------------------------------------------------------
# Log-barrier evaluation and damped Newton iteration
# ---------------------------------------------------------------------------

def barrier_eval(
    x: np.ndarray,
    xp: np.ndarray,
    g_normals: np.ndarray,
    g_offsets: np.ndarray,
    q_normals: np.ndarray,
    q_offsets: np.ndarray,
    gram: Optional[np.ndarray],
    gram_in_objective: bool,
    lam: float,
    order: int,
):
    """Barrier value (order 0), plus gradient (1), plus Hessian (2).

    Returns ``None`` when ``x`` is on or outside any barrier (some
    constraint value >= 0); otherwise a tuple ``(value[, grad[, hess]])``.

    The objective is ``|x - xp|^2``, or the Gram quadratic form when
    ``gram_in_objective``; each nonlinear constraint is
    ``t0 - (nu . x + beta)^2`` with ``t0`` the (possibly Gram-weighted)
    squared distance to ``xp``.
    """
    n = x.shape[0]
    d = x - xp
    gd = d if gram is None else gram @ d
    t0 = float(d @ gd)
    plain = float(d @ d)

    f = t0 if gram_in_objective else plain

    gvals = g_normals @ x + g_offsets if g_normals.shape[0] else np.empty(0)
    qlin = q_normals @ x + q_offsets if q_normals.shape[0] else np.empty(0)
    qvals = t0 - qlin * qlin

    if (gvals.size and gvals.max() >= 0.0) or (qvals.size and qvals.max() >= 0.0):
        return None

    value = f - (np.log(-gvals).sum() + np.log(-qvals).sum()) / lam
    if order == 0:
        return (value,)

    f_lin = 2.0 * (gd if gram_in_objective else d)
    grad = f_lin.copy()
    if gvals.size:
        grad -= (g_normals.T @ (1.0 / gvals)) / lam
    if qvals.size:
        # rows of q_grads are the constraint gradients 2*gd - 2*qlin_k*nu_k
        q_grads = 2.0 * gd[None, :] - 2.0 * qlin[:, None] * q_normals
        grad -= (q_grads.T @ (1.0 / qvals)) / lam
    if order == 1:
        return value, grad

    f_hess = 2.0 * (gram if gram_in_objective else np.eye(n))
    hess = f_hess.copy()
    if gvals.size:
        hess += ((g_normals / (gvals * gvals)[:, None]).T @ g_normals) / lam
    if qvals.size:
        inv_q = 1.0 / qvals
        hess += ((q_grads * (inv_q * inv_q)[:, None]).T @ q_grads) / lam
        q_hess_base = 2.0 * (np.eye(n) if gram is None else gram)
        hess -= (inv_q.sum() * q_hess_base) / lam
        hess += 2.0 * ((q_normals * inv_q[:, None]).T @ q_normals) / lam
    hess = 0.5 * (hess + hess.T)
    return value, grad, hess


def newton_minimize(
    x0: np.ndarray,
    xp: np.ndarray,
    g_normals: np.ndarray,
    g_offsets: np.ndarray,
    q_normals: np.ndarray,
    q_offsets: np.ndarray,
    gram: Optional[np.ndarray],
    gram_in_objective: bool,
    lam: float,
    eta0: float,
    epsilon: float,
    n_max: int,
    backtracking: bool,
) -> Tuple[bool, np.ndarray, int, float]:
    """Damped Newton iteration on the log-barrier objective.

    Stops with success when the step norm falls below ``epsilon`` with a
    finite objective; fails when ``n_max`` iterations are exhausted or a
    fixed step (backtracking disabled) leaves the barrier domain.
    When the Hessian factorization fails the gradient is used as the step
    direction; when backtracking cannot find a feasible decreasing step the
    iterate stays put, which triggers the step-norm stop.
    """
    x = np.array(x0, dtype=float)
    res = barrier_eval(x, xp, g_normals, g_offsets, q_normals, q_offsets,
                       gram, gram_in_objective, lam, 0)
    if res is None:
        return False, x, 0, np.inf
    value = res[0]

    for it in range(1, n_max + 1):
        _, grad, hess = barrier_eval(x, xp, g_normals, g_offsets, q_normals, q_offsets,
                                     gram, gram_in_objective, lam, 2)
        try:
            chol = np.linalg.cholesky(hess)
            step = np.linalg.solve(chol.T, np.linalg.solve(chol, grad))
        except np.linalg.LinAlgError:
            step = grad

        if backtracking:
            eta = eta0
            new_x = None
            new_value = value
            while eta > 1e-20:
                cand = x - eta * step
                cres = barrier_eval(cand, xp, g_normals, g_offsets, q_normals, q_offsets,
                                    gram, gram_in_objective, lam, 0)
                if cres is not None and cres[0] < value:
                    new_x, new_value = cand, cres[0]
                    break
                eta *= 0.5
            if new_x is None:
                new_x, new_value = x, value
        else:
            cand = x - eta0 * step
            cres = barrier_eval(cand, xp, g_normals, g_offsets, q_normals, q_offsets,
                                gram, gram_in_objective, lam, 0)
            if cres is None or not np.isfinite(cres[0]):
                return False, x, it, value
            new_x, new_value = cand, cres[0]

        delta = float(np.linalg.norm(new_x - x))
        x, value = new_x, new_value
        if delta < epsilon and np.isfinite(value):
            return True, x, it, value

    return False, x, n_max, value
