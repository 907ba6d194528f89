"""Compiled simplex pivot loops.

Both loops mutate ``x``, ``status``, ``basis``, ``Binv``, ``y`` (and ``d``)
in place and return ``(code, pivots, degenerate_run)``.  Codes: 0 optimal,
1 unbounded, 2 pivot budget used up, 3 infeasible (dual loop only).
Status values: 0 basic, 1 at lower bound, 2 at upper bound, 3 free at zero.
"""
import numpy as np

from .._accel import njit

_TIE = 1e-12


@njit
def _pivot_update(Binv, y, alpha, r, dq, m):
    piv = alpha[r]
    f = dq / piv
    for i in range(m):
        y[i] += f * Binv[r, i]
    for i in range(m):
        Binv[r, i] /= piv
    for p in range(m):
        a = alpha[p]
        if p != r and a != 0.0:
            for i in range(m):
                Binv[p, i] -= a * Binv[r, i]


@njit
def _ftran(col_ptr, col_idx, col_val, Binv, q, alpha, m):
    for p in range(m):
        alpha[p] = 0.0
    for k in range(col_ptr[q], col_ptr[q + 1]):
        i = col_idx[k]
        v = col_val[k]
        for p in range(m):
            alpha[p] += v * Binv[p, i]


@njit
def primal_pivots(col_ptr, col_idx, col_val, c, lb, ub, x, status, basis, Binv, y,
                  max_pivots, tol_feas, tol_opt, tol_piv, bland_after, degen):
    m = basis.shape[0]
    n = c.shape[0]
    alpha = np.empty(m)
    lims = np.empty(m)
    pivots = 0
    while pivots < max_pivots:
        bland = degen >= bland_after
        q = -1
        best = 0.0
        dq = 0.0
        for j in range(n):
            st = status[j]
            if st == 0 or lb[j] == ub[j]:
                continue
            d = c[j]
            for k in range(col_ptr[j], col_ptr[j + 1]):
                d -= col_val[k] * y[col_idx[k]]
            tol = tol_opt * (1.0 + abs(c[j]))
            v = 0.0
            if st == 1:
                if d < -tol:
                    v = -d
            elif st == 2:
                if d > tol:
                    v = d
            elif abs(d) > tol:
                v = abs(d)
            if v > best:
                best = v
                q = j
                dq = d
                if bland:
                    break
        if q < 0:
            return 0, pivots, degen
        direction = 1.0 if dq < 0.0 else -1.0
        _ftran(col_ptr, col_idx, col_val, Binv, q, alpha, m)

        theta = ub[q] - lb[q]
        for p in range(m):
            a = direction * alpha[p]
            lims[p] = np.inf
            if abs(a) <= tol_piv:
                continue
            bv = basis[p]
            if a > 0.0:
                if lb[bv] > -np.inf:
                    lims[p] = max((x[bv] - lb[bv]) / a, 0.0)
            elif ub[bv] < np.inf:
                lims[p] = max((ub[bv] - x[bv]) / (-a), 0.0)
            if lims[p] < theta:
                theta = lims[p]
        if theta == np.inf:
            return 1, pivots, degen
        r = -1
        if not theta >= ub[q] - lb[q] - _TIE:
            cut = theta + _TIE
            best_a = -1.0
            for p in range(m):
                if lims[p] <= cut:
                    a = abs(alpha[p])
                    if r < 0:
                        r = p
                        best_a = a
                    elif bland:
                        if basis[p] < basis[r]:
                            r = p
                    elif a > best_a:
                        r = p
                        best_a = a
            theta = lims[r]

        if theta > 0.0:
            x[q] += direction * theta
            for p in range(m):
                x[basis[p]] -= direction * theta * alpha[p]
        if r < 0:
            if direction > 0.0:
                status[q] = 2
                x[q] = ub[q]
            else:
                status[q] = 1
                x[q] = lb[q]
        else:
            leave = basis[r]
            if direction * alpha[r] > 0.0:
                x[leave] = lb[leave]
                status[leave] = 1
            else:
                x[leave] = ub[leave]
                status[leave] = 2
            _pivot_update(Binv, y, alpha, r, dq, m)
            basis[r] = q
            status[q] = 0
        if theta <= tol_feas:
            degen += 1
        else:
            degen = 0
        pivots += 1
    return 2, pivots, degen


@njit
def dual_pivots(col_ptr, col_idx, col_val, c, lb, ub, x, status, basis, Binv, y, d,
                max_pivots, tol_feas, tol_opt, tol_piv):
    m = basis.shape[0]
    n = c.shape[0]
    alpha = np.empty(m)
    arow = np.zeros(n)
    pivots = 0
    while pivots < max_pivots:
        r = -1
        worst = 0.0
        for p in range(m):
            bv = basis[p]
            inf = 0.0
            if x[bv] < lb[bv] - tol_feas:
                inf = lb[bv] - x[bv]
            elif x[bv] > ub[bv] + tol_feas:
                inf = x[bv] - ub[bv]
            if inf > worst:
                worst = inf
                r = p
        if r < 0:
            return 0, pivots, 0
        leave = basis[r]
        below = x[leave] < lb[leave]

        best_ratio = np.inf
        for j in range(n):
            arow[j] = 0.0
            if status[j] == 0:
                continue
            a = 0.0
            for k in range(col_ptr[j], col_ptr[j + 1]):
                a += col_val[k] * Binv[r, col_idx[k]]
            arow[j] = a
            if lb[j] == ub[j] or abs(a) <= tol_piv:
                continue
            st = status[j]
            if below:
                ok = (st == 1 and a < 0.0) or (st == 2 and a > 0.0) or st == 3
            else:
                ok = (st == 1 and a > 0.0) or (st == 2 and a < 0.0) or st == 3
            if ok:
                ratio = abs(d[j]) / abs(a)
                if ratio < best_ratio:
                    best_ratio = ratio
        if best_ratio == np.inf:
            return 3, pivots, 0
        q = -1
        best_a = -1.0
        cut = best_ratio + _TIE
        for j in range(n):
            a = arow[j]
            if status[j] == 0 or lb[j] == ub[j] or abs(a) <= tol_piv:
                continue
            st = status[j]
            if below:
                ok = (st == 1 and a < 0.0) or (st == 2 and a > 0.0) or st == 3
            else:
                ok = (st == 1 and a > 0.0) or (st == 2 and a < 0.0) or st == 3
            if ok and abs(d[j]) / abs(a) <= cut and abs(a) > best_a:
                best_a = abs(a)
                q = j

        _ftran(col_ptr, col_idx, col_val, Binv, q, alpha, m)
        target = lb[leave] if below else ub[leave]
        t = (x[leave] - target) / alpha[r]
        x[q] += t
        for p in range(m):
            x[basis[p]] -= t * alpha[p]
        x[leave] = target
        status[leave] = 1 if below else 2

        theta_d = d[q] / alpha[r]
        for j in range(n):
            if status[j] != 0:
                d[j] -= theta_d * arow[j]
        d[leave] = -theta_d
        d[q] = 0.0
        _pivot_update(Binv, y, alpha, r, theta_d * alpha[r], m)
        basis[r] = q
        status[q] = 0
        pivots += 1
    return 2, pivots, 0
