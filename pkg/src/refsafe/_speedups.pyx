# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled compute kernels; behavioral twins of refsafe._kernels.

Any change here must be mirrored in the pure module (and vice versa);
tests/test_backends.py holds the two to the same answers.
"""

import numpy as np

from libc.math cimport fabs, log, sqrt, isfinite

BACKEND_NAME = "compiled"

cdef double INF = float("inf")


# ---------------------------------------------------------------------------
# small dense helpers
# ---------------------------------------------------------------------------

cdef bint _invert(double[:, ::1] a, double[:, ::1] inv, Py_ssize_t m) noexcept:
    """Gauss-Jordan inverse with partial pivoting; a is destroyed.

    Returns False when a pivot collapses (singular to machine precision).
    """
    cdef Py_ssize_t col, row, j, piv_row
    cdef double piv, tmp, scale, factor
    for row in range(m):
        for j in range(m):
            inv[row, j] = 1.0 if row == j else 0.0
    for col in range(m):
        piv_row = col
        piv = fabs(a[col, col])
        for row in range(col + 1, m):
            if fabs(a[row, col]) > piv:
                piv = fabs(a[row, col])
                piv_row = row
        if piv < 1e-300:
            return False
        if piv_row != col:
            for j in range(m):
                tmp = a[col, j]; a[col, j] = a[piv_row, j]; a[piv_row, j] = tmp
                tmp = inv[col, j]; inv[col, j] = inv[piv_row, j]; inv[piv_row, j] = tmp
        scale = 1.0 / a[col, col]
        for j in range(m):
            a[col, j] *= scale
            inv[col, j] *= scale
        for row in range(m):
            if row == col:
                continue
            factor = a[row, col]
            if factor != 0.0:
                for j in range(m):
                    a[row, j] -= factor * a[col, j]
                    inv[row, j] -= factor * inv[col, j]
    return True


cdef double _norm1(double[:, ::1] a, Py_ssize_t m) noexcept:
    cdef Py_ssize_t i, j
    cdef double best = 0.0, acc
    for j in range(m):
        acc = 0.0
        for i in range(m):
            acc += fabs(a[i, j])
        if acc > best:
            best = acc
    return best


cdef bint _cholesky(double[:, ::1] a, double[:, ::1] l, Py_ssize_t n) noexcept:
    cdef Py_ssize_t i, j, k
    cdef double acc
    for i in range(n):
        for j in range(i + 1):
            acc = a[i, j]
            for k in range(j):
                acc -= l[i, k] * l[j, k]
            if i == j:
                if acc <= 0.0 or not isfinite(acc):
                    return False
                l[i, i] = sqrt(acc)
            else:
                l[i, j] = acc / l[j, j]
        for j in range(i + 1, n):
            l[i, j] = 0.0
    return True


cdef void _chol_solve(double[:, ::1] l, double[::1] b, double[::1] work,
                      double[::1] out, Py_ssize_t n) noexcept:
    cdef Py_ssize_t i, j
    cdef double acc
    for i in range(n):
        acc = b[i]
        for j in range(i):
            acc -= l[i, j] * work[j]
        work[i] = acc / l[i, i]
    for i in range(n - 1, -1, -1):
        acc = work[i]
        for j in range(i + 1, n):
            acc -= l[j, i] * out[j]
        out[i] = acc / l[i, i]


# ---------------------------------------------------------------------------
# Active-set enumeration
# ---------------------------------------------------------------------------

def kkt_best(double[:, ::1] normals, double[::1] offsets, double[::1] xp,
             double eq_tol, double cond_limit, Py_ssize_t dim_hint):
    """See refsafe._kernels.kkt_best; identical scan and selection rules."""
    cdef Py_ssize_t r = offsets.shape[0]
    cdef Py_ssize_t n = xp.shape[0]
    cdef Py_ssize_t card, i, j, a, b, row
    cdef double acc, cond, obj, coef, val
    cdef bint ok, found_any = False, better

    gram_np = np.empty((r, r))
    cdef double[:, ::1] gram = gram_np
    g0_np = np.empty(r)
    cdef double[::1] g0 = g0_np
    for i in range(r):
        for j in range(i, r):
            acc = 0.0
            for a in range(n):
                acc += normals[i, a] * normals[j, a]
            gram[i, j] = acc
            gram[j, i] = acc
        acc = offsets[i]
        for a in range(n):
            acc += normals[i, a] * xp[a]
        g0[i] = acc

    idx_np = np.empty(r, dtype=np.intp)
    cdef Py_ssize_t[::1] idx = idx_np
    best_idx_np = np.empty(r, dtype=np.intp)
    cdef Py_ssize_t[::1] best_idx = best_idx_np
    w_np = np.empty((r, r))
    cdef double[:, ::1] w = w_np
    wwork_np = np.empty((r, r))
    cdef double[:, ::1] wwork = wwork_np
    winv_np = np.empty((r, r))
    cdef double[:, ::1] winv = winv_np
    mu_np = np.empty(r)
    cdef double[::1] mu = mu_np
    pt_np = np.empty(n)
    cdef double[::1] pt = pt_np
    best_pt_np = np.empty(n)
    cdef double[::1] best_pt = best_pt_np
    active_np = np.zeros(r, dtype=np.uint8)
    cdef unsigned char[::1] active = active_np

    cdef double best_obj = INF
    cdef Py_ssize_t best_card = 0

    for card in range(1, r + 1):
        for j in range(card):
            idx[j] = j
        while True:
            # W = gram[idx][:, idx]
            for a in range(card):
                for b in range(card):
                    w[a, b] = gram[idx[a], idx[b]]
                    wwork[a, b] = w[a, b]
            ok = _invert(wwork, winv, card)
            if ok:
                cond = _norm1(w, card) * _norm1(winv, card)
                if not isfinite(cond) or cond > cond_limit:
                    ok = False
            if ok:
                for a in range(card):
                    acc = 0.0
                    for b in range(card):
                        acc += winv[a, b] * g0[idx[b]]
                    mu[a] = 2.0 * acc
                for a in range(n):
                    pt[a] = xp[a]
                for a in range(card):
                    coef = 0.5 * mu[a]
                    row = idx[a]
                    for b in range(n):
                        pt[b] -= coef * normals[row, b]
                for a in range(card):
                    active[idx[a]] = 1
                for i in range(r):
                    acc = offsets[i]
                    for b in range(n):
                        acc += normals[i, b] * pt[b]
                    val = acc
                    if active[i]:
                        if fabs(val) > eq_tol:
                            ok = False
                            break
                    elif val >= -eq_tol:
                        ok = False
                        break
                for a in range(card):
                    active[idx[a]] = 0
            if ok:
                obj = 0.0
                for b in range(n):
                    acc = pt[b] - xp[b]
                    obj += acc * acc
                if obj < best_obj:
                    better = True
                elif obj == best_obj and found_any:
                    # lexicographic tuple comparison; shorter prefix wins
                    better = False
                    for a in range(card if card < best_card else best_card):
                        if idx[a] < best_idx[a]:
                            better = True
                            break
                        if idx[a] > best_idx[a]:
                            break
                    else:
                        better = card < best_card
                else:
                    better = not found_any
                if better:
                    best_obj = obj
                    best_card = card
                    for a in range(card):
                        best_idx[a] = idx[a]
                    for b in range(n):
                        best_pt[b] = pt[b]
                    found_any = True
            # advance to the next combination
            j = card - 1
            while j >= 0 and idx[j] == r - card + j:
                j -= 1
            if j < 0:
                break
            idx[j] += 1
            for a in range(j + 1, card):
                idx[a] = idx[a - 1] + 1
        if found_any and card >= dim_hint:
            break

    if not found_any:
        return False, None, None, INF
    return True, np.asarray(best_pt_np[:n]).copy(), tuple(int(best_idx[a]) for a in range(best_card)), best_obj


# ---------------------------------------------------------------------------
# Barrier Newton
# ---------------------------------------------------------------------------

cdef int _barrier_value(double[::1] x, double[::1] xp,
                        double[:, ::1] gn, double[::1] go,
                        double[:, ::1] qn, double[::1] qo,
                        bint has_gram, double[:, ::1] gram, bint gram_in_obj,
                        double lam,
                        double[::1] d, double[::1] gd,
                        double[::1] gvals, double[::1] qlin, double[::1] qvals,
                        double* value) noexcept:
    """0 = strictly feasible (value written); 1 = on/outside a barrier."""
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t r = go.shape[0]
    cdef Py_ssize_t s = qo.shape[0]
    cdef Py_ssize_t i, j
    cdef double acc, t0, plain, f, logsum

    for i in range(n):
        d[i] = x[i] - xp[i]
    if has_gram:
        for i in range(n):
            acc = 0.0
            for j in range(n):
                acc += gram[i, j] * d[j]
            gd[i] = acc
    else:
        for i in range(n):
            gd[i] = d[i]
    t0 = 0.0
    plain = 0.0
    for i in range(n):
        t0 += d[i] * gd[i]
        plain += d[i] * d[i]
    f = t0 if gram_in_obj else plain

    for i in range(r):
        acc = go[i]
        for j in range(n):
            acc += gn[i, j] * x[j]
        gvals[i] = acc
        if acc >= 0.0:
            return 1
    for i in range(s):
        acc = qo[i]
        for j in range(n):
            acc += qn[i, j] * x[j]
        qlin[i] = acc
        qvals[i] = t0 - acc * acc
        if qvals[i] >= 0.0:
            return 1

    logsum = 0.0
    for i in range(r):
        logsum += log(-gvals[i])
    for i in range(s):
        logsum += log(-qvals[i])
    value[0] = f - logsum / lam
    return 0


def newton_minimize(double[::1] x0, double[::1] xp,
                    double[:, ::1] g_normals, double[::1] g_offsets,
                    double[:, ::1] q_normals, double[::1] q_offsets,
                    object gram, bint gram_in_objective,
                    double lam, double eta0, double epsilon,
                    int n_max, bint backtracking):
    """See refsafe._kernels.newton_minimize; identical stopping rules."""
    cdef Py_ssize_t n = x0.shape[0]
    cdef Py_ssize_t r = g_offsets.shape[0]
    cdef Py_ssize_t s = q_offsets.shape[0]
    cdef bint has_gram = gram is not None
    gram_np = np.ascontiguousarray(gram, dtype=np.float64) if has_gram else np.zeros((1, 1))
    cdef double[:, ::1] gramv = gram_np

    x_np = np.array(x0, dtype=np.float64)
    cdef double[::1] x = x_np
    xn_np = np.empty(n)
    cdef double[::1] xn = xn_np
    d_np = np.empty(n); gd_np = np.empty(n)
    cdef double[::1] d = d_np
    cdef double[::1] gd = gd_np
    gvals_np = np.empty(r); qlin_np = np.empty(s); qvals_np = np.empty(s)
    cdef double[::1] gvals = gvals_np
    cdef double[::1] qlin = qlin_np
    cdef double[::1] qvals = qvals_np
    grad_np = np.empty(n)
    cdef double[::1] grad = grad_np
    hess_np = np.empty((n, n))
    cdef double[:, ::1] hess = hess_np
    lmat_np = np.empty((n, n))
    cdef double[:, ::1] lmat = lmat_np
    step_np = np.empty(n); work_np = np.empty(n)
    cdef double[::1] step = step_np
    cdef double[::1] work = work_np
    qg_np = np.empty((s, n)) if s else np.empty((0, n))
    cdef double[:, ::1] qgrads = qg_np

    cdef double value = 0.0, cand_value = 0.0, eta, delta, acc, inv_g, inv_q, inv_q2, qsum, coef
    cdef Py_ssize_t i, j, k, it
    cdef bint accepted

    if _barrier_value(x, xp, g_normals, g_offsets, q_normals, q_offsets,
                      has_gram, gramv, gram_in_objective, lam,
                      d, gd, gvals, qlin, qvals, &value):
        return False, x_np, 0, INF

    for it in range(1, n_max + 1):
        # refresh d, gd, gvals, qlin, qvals at the current point
        _barrier_value(x, xp, g_normals, g_offsets, q_normals, q_offsets,
                       has_gram, gramv, gram_in_objective, lam,
                       d, gd, gvals, qlin, qvals, &value)
        # gradient
        for i in range(n):
            grad[i] = 2.0 * (gd[i] if gram_in_objective else d[i])
        for k in range(r):
            inv_g = 1.0 / gvals[k]
            for i in range(n):
                grad[i] -= g_normals[k, i] * inv_g / lam
        for k in range(s):
            for i in range(n):
                qgrads[k, i] = 2.0 * gd[i] - 2.0 * qlin[k] * q_normals[k, i]
            inv_q = 1.0 / qvals[k]
            for i in range(n):
                grad[i] -= qgrads[k, i] * inv_q / lam
        # Hessian
        for i in range(n):
            for j in range(n):
                hess[i, j] = 2.0 * (gramv[i, j] if gram_in_objective else (1.0 if i == j else 0.0))
        for k in range(r):
            inv_g = 1.0 / (gvals[k] * gvals[k])
            for i in range(n):
                coef = g_normals[k, i] * inv_g / lam
                for j in range(n):
                    hess[i, j] += coef * g_normals[k, j]
        if s:
            qsum = 0.0
            for k in range(s):
                inv_q = 1.0 / qvals[k]
                qsum += inv_q
                inv_q2 = inv_q * inv_q
                for i in range(n):
                    coef = qgrads[k, i] * inv_q2 / lam
                    for j in range(n):
                        hess[i, j] += coef * qgrads[k, j]
                for i in range(n):
                    coef = 2.0 * q_normals[k, i] * inv_q / lam
                    for j in range(n):
                        hess[i, j] += coef * q_normals[k, j]
            # -(sum 1/q) * (2 I or 2 gram) / lam
            if has_gram:
                for i in range(n):
                    for j in range(n):
                        hess[i, j] -= qsum * 2.0 * gramv[i, j] / lam
            else:
                for i in range(n):
                    hess[i, i] -= qsum * 2.0 / lam
        # Newton step (gradient fallback when not positive definite)
        if _cholesky(hess, lmat, n):
            _chol_solve(lmat, grad, work, step, n)
        else:
            for i in range(n):
                step[i] = grad[i]

        if backtracking:
            eta = eta0
            accepted = False
            while eta > 1e-20:
                for i in range(n):
                    xn[i] = x[i] - eta * step[i]
                if _barrier_value(xn, xp, g_normals, g_offsets, q_normals, q_offsets,
                                  has_gram, gramv, gram_in_objective, lam,
                                  d, gd, gvals, qlin, qvals, &cand_value) == 0 \
                        and cand_value < value:
                    accepted = True
                    break
                eta *= 0.5
            if not accepted:
                for i in range(n):
                    xn[i] = x[i]
                cand_value = value
        else:
            for i in range(n):
                xn[i] = x[i] - eta0 * step[i]
            if _barrier_value(xn, xp, g_normals, g_offsets, q_normals, q_offsets,
                              has_gram, gramv, gram_in_objective, lam,
                              d, gd, gvals, qlin, qvals, &cand_value) != 0 \
                    or not isfinite(cand_value):
                return False, x_np.copy(), it, value

        delta = 0.0
        for i in range(n):
            acc = xn[i] - x[i]
            delta += acc * acc
            x[i] = xn[i]
        delta = sqrt(delta)
        value = cand_value
        if delta < epsilon and isfinite(value):
            return True, x_np.copy(), it, value

    return False, x_np.copy(), n_max, value
