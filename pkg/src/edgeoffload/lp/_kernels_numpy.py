"""Vectorised numpy twins of the compiled pivot loops (same pivot rules)."""
import numpy as np
import scipy.sparse as sp

_TIE = 1e-12


def _pivot_update(Binv, y, alpha, r, dq):
    piv = alpha[r]
    y += (dq / piv) * Binv[r]
    Binv[r] /= piv
    a = alpha.copy()
    a[r] = 0.0
    Binv -= np.outer(a, Binv[r])


def _ftran(col_ptr, col_idx, col_val, Binv, q):
    s, e = col_ptr[q], col_ptr[q + 1]
    return Binv[:, col_idx[s:e]] @ col_val[s:e]


def _transpose(col_ptr, col_idx, col_val, m):
    n = len(col_ptr) - 1
    return sp.csc_matrix((col_val, col_idx, col_ptr), shape=(m, n)).T.tocsr()


def primal_pivots(col_ptr, col_idx, col_val, c, lb, ub, x, status, basis, Binv, y,
                  max_pivots, tol_feas, tol_opt, tol_piv, bland_after, degen, AT=None):
    m = basis.shape[0]
    if AT is None:
        AT = _transpose(col_ptr, col_idx, col_val, m)
    movable = lb != ub
    tol = tol_opt * (1.0 + np.abs(c))
    pivots = 0
    while pivots < max_pivots:
        bland = degen >= bland_after
        d = c - AT @ y
        v = np.zeros_like(d)
        st = status
        lo = (st == 1) & (d < -tol)
        hi = (st == 2) & (d > tol)
        fr = (st == 3) & (np.abs(d) > tol)
        v[lo] = -d[lo]
        v[hi] = d[hi]
        v[fr] = np.abs(d[fr])
        v[~movable] = 0.0
        if not np.any(v > 0.0):
            return 0, pivots, degen
        q = int(np.flatnonzero(v > 0.0)[0]) if bland else int(np.argmax(v))
        dq = d[q]
        direction = 1.0 if dq < 0.0 else -1.0
        alpha = _ftran(col_ptr, col_idx, col_val, Binv, q)

        a = direction * alpha
        bl, bu, xb = lb[basis], ub[basis], x[basis]
        lims = np.full(m, np.inf)
        pos = (a > tol_piv) & (bl > -np.inf)
        neg = (a < -tol_piv) & (bu < np.inf)
        lims[pos] = np.maximum((xb[pos] - bl[pos]) / a[pos], 0.0)
        lims[neg] = np.maximum((bu[neg] - xb[neg]) / (-a[neg]), 0.0)
        own = ub[q] - lb[q]
        theta = min(own, lims.min()) if m else own
        if theta == np.inf:
            return 1, pivots, degen
        r = -1
        if not theta >= own - _TIE:
            cand = np.flatnonzero(lims <= theta + _TIE)
            if bland:
                r = int(cand[np.argmin(basis[cand])])
            else:
                r = int(cand[np.argmax(np.abs(alpha[cand]))])
            theta = lims[r]

        if theta > 0.0:
            x[q] += direction * theta
            x[basis] -= direction * theta * alpha
        if r < 0:
            status[q] = 2 if direction > 0.0 else 1
            x[q] = ub[q] if direction > 0.0 else lb[q]
        else:
            leave = basis[r]
            if direction * alpha[r] > 0.0:
                x[leave] = lb[leave]
                status[leave] = 1
            else:
                x[leave] = ub[leave]
                status[leave] = 2
            _pivot_update(Binv, y, alpha, r, dq)
            basis[r] = q
            status[q] = 0
        degen = degen + 1 if theta <= tol_feas else 0
        pivots += 1
    return 2, pivots, degen


def dual_pivots(col_ptr, col_idx, col_val, c, lb, ub, x, status, basis, Binv, y, d,
                max_pivots, tol_feas, tol_opt, tol_piv, AT=None):
    m = basis.shape[0]
    if AT is None:
        AT = _transpose(col_ptr, col_idx, col_val, m)
    movable = lb != ub
    pivots = 0
    while pivots < max_pivots:
        xb, bl, bu = x[basis], lb[basis], ub[basis]
        inf = np.zeros(m)
        below_mask = xb < bl - tol_feas
        above_mask = xb > bu + tol_feas
        inf[below_mask] = (bl - xb)[below_mask]
        inf[above_mask] = (xb - bu)[above_mask]
        if not np.any(inf > 0.0):
            return 0, pivots, 0
        r = int(np.argmax(inf))
        leave = basis[r]
        below = x[leave] < lb[leave]

        arow = AT @ Binv[r]
        arow[status == 0] = 0.0
        st = status
        big = movable & (np.abs(arow) > tol_piv)
        if below:
            ok = big & (((st == 1) & (arow < 0.0)) | ((st == 2) & (arow > 0.0)) | (st == 3))
        else:
            ok = big & (((st == 1) & (arow > 0.0)) | ((st == 2) & (arow < 0.0)) | (st == 3))
        if not np.any(ok):
            return 3, pivots, 0
        idx = np.flatnonzero(ok)
        ratio = np.abs(d[idx]) / np.abs(arow[idx])
        cand = idx[ratio <= ratio.min() + _TIE]
        q = int(cand[np.argmax(np.abs(arow[cand]))])

        alpha = _ftran(col_ptr, col_idx, col_val, Binv, q)
        target = lb[leave] if below else ub[leave]
        t = (x[leave] - target) / alpha[r]
        x[q] += t
        x[basis] -= t * alpha
        x[leave] = target
        status[leave] = 1 if below else 2

        theta_d = d[q] / alpha[r]
        nb = status != 0
        d[nb] -= theta_d * arow[nb]
        d[leave] = -theta_d
        d[q] = 0.0
        _pivot_update(Binv, y, alpha, r, theta_d * alpha[r])
        basis[r] = q
        status[q] = 0
        pivots += 1
    return 2, pivots, 0
