"""Bounded-variable revised simplex with an explicit dense basis inverse.

The working problem is ``[A | I | diag(s)] (x, slack, art) = b`` where the
slack bounds encode each row's sense (``<=``: [0, inf), ``>=``: (-inf, 0],
``=``: [0, 0]) and the artificials are only opened for rows whose starting
slack value would be out of bounds.  Phase 1 minimises the artificials, phase 2
runs Dantzig pricing and switches to Bland's rule after a run of degenerate
pivots.  ``warm_solve`` re-optimises after bound changes with the dual simplex,
which is what branch-and-bound and the SeLR warm starts use.  The dual runs on
slightly perturbed costs; a final primal pass on the true costs restores
optimality.
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .._accel import resolve_backend
from . import _kernels_numpy
from .model import EQ, GE, LE, LinearProgram, LPSolution, LPStatus

try:
    from . import _kernels_numba
except ImportError:  # pragma: no cover
    _kernels_numba = None

OPTIMAL, UNBOUNDED, LIMIT, INFEASIBLE = 0, 1, 2, 3


class SingularBasisError(RuntimeError):
    pass


class IterationLimitError(RuntimeError):
    pass


class SimplexSolver:
    def __init__(self, lp: LinearProgram, *, tol_feas: float = 1e-7, tol_opt: float = 1e-9,
                 tol_piv: float = 1e-9, refactor_every: int = 100, bland_after: int = 50,
                 max_iter: int = 200_000, perturb: float = 1e-7, backend: str | None = None):
        self.lp = lp
        self.tol_feas = tol_feas
        self.tol_opt = tol_opt
        self.tol_piv = tol_piv
        self.refactor_every = refactor_every
        self.bland_after = bland_after
        self.max_iter = max_iter
        self.perturb = perturb
        self.backend = resolve_backend(backend)
        self._k = _kernels_numba if self.backend == "numba" else _kernels_numpy

        m, n = lp.num_rows, lp.num_vars
        self.m, self.n = m, n
        A = lp.A
        nnz = A.nnz
        self.col_ptr = np.concatenate([A.indptr, nnz + 1 + np.arange(2 * m)]).astype(np.int64)
        self.col_idx = np.concatenate([A.indices, np.arange(m), np.arange(m)]).astype(np.int64)
        self.col_val = np.concatenate([A.data, np.ones(2 * m)]).astype(float)
        self._art_off = nnz + m
        N = n + 2 * m
        self.N = N
        self.c = np.concatenate([lp.c, np.zeros(2 * m)])
        self.lb = np.concatenate([lp.lb, np.zeros(2 * m)])
        self.ub = np.concatenate([lp.ub, np.zeros(2 * m)])
        sl = slice(n, n + m)
        self.lb[sl][lp.sense == GE] = -np.inf
        self.ub[sl][lp.sense == LE] = np.inf
        self.b = lp.b.astype(float)

        self.x = np.zeros(N)
        self.status = np.ones(N, dtype=np.int8)
        self.basis = np.arange(n, n + m, dtype=np.int64)
        self.Binv = np.eye(m)
        self.y = np.zeros(m)
        self.iterations = 0
        self._factored = False
        self._degen = 0
        self._restarted = False
        self._ext = self._ext_T = None

    # -- helpers -------------------------------------------------------------
    def _set_art_signs(self, sign):
        sign = np.asarray(sign, dtype=float)
        cur = self.col_val[self._art_off:self._art_off + self.m]
        if not np.array_equal(cur, sign):
            cur[:] = sign
            self._ext = self._ext_T = None

    def _ext_matrix(self):
        if self._ext is None:
            self._ext = sp.csc_matrix((self.col_val, self.col_idx, self.col_ptr), shape=(self.m, self.N))
        return self._ext

    def _AT(self):
        if self._ext_T is None:
            self._ext_T = self._ext_matrix().T.tocsr()
        return self._ext_T

    def _place_nonbasic(self):
        """Put every nonbasic variable on the bound its status names."""
        nb = self.status != 0
        lb, ub = self.lb, self.ub
        st = self.status
        at_lo = nb & (st == 1)
        at_hi = nb & (st == 2)
        # a requested bound may be infinite: fall back to the other one, else free
        bad_lo = at_lo & ~np.isfinite(lb)
        st[bad_lo & np.isfinite(ub)] = 2
        st[bad_lo & ~np.isfinite(ub)] = 3
        bad_hi = at_hi & ~np.isfinite(ub)
        st[bad_hi & np.isfinite(lb)] = 1
        st[bad_hi & ~np.isfinite(lb)] = 3
        self.x[nb & (st == 1)] = lb[nb & (st == 1)]
        self.x[nb & (st == 2)] = ub[nb & (st == 2)]
        self.x[nb & (st == 3)] = 0.0

    def _refactor(self):
        m, n = self.m, self.n
        basis = self.basis
        unit_pos = np.flatnonzero(basis >= n)
        str_pos = np.flatnonzero(basis < n)
        unit_rows = (basis[unit_pos] - n) % m
        if len(np.unique(unit_rows)) != len(unit_rows):
            raise SingularBasisError("two unit columns on one row")
        sign = self.col_val[self.col_ptr[basis[unit_pos]]]
        free_rows = np.setdiff1d(np.arange(m), unit_rows)
        if len(free_rows) != len(str_pos):
            raise SingularBasisError("basis is not square")
        Binv = np.zeros((m, m))
        if len(str_pos):
            cols = self.lp.A[:, basis[str_pos]].toarray()
            A11 = cols[free_rows]
            try:
                inv11 = np.linalg.inv(A11)
            except np.linalg.LinAlgError as exc:
                raise SingularBasisError(str(exc)) from None
            if not np.all(np.isfinite(inv11)):
                raise SingularBasisError("non-finite basis inverse")
            Binv[np.ix_(str_pos, free_rows)] = inv11
            if len(unit_pos):
                Binv[np.ix_(unit_pos, free_rows)] = -sign[:, None] * (cols[unit_rows] @ inv11)
        Binv[unit_pos, unit_rows] = sign
        self.Binv = Binv
        self._recompute_primal()
        self._factored = True

    def _recompute_primal(self):
        xn = self.x.copy()
        xn[self.basis] = 0.0
        rhs = self.b - self._ext_matrix() @ xn
        self.x[self.basis] = self.Binv @ rhs

    def _prices(self, cost):
        self.y = cost[self.basis] @ self.Binv

    def _reduced(self, cost):
        d = cost - self._AT() @ self.y
        d[self.basis] = 0.0
        return d

    def _budget(self):
        left = self.max_iter - self.iterations
        if left <= 0:
            raise IterationLimitError(f"simplex exceeded {self.max_iter} pivots")
        return min(self.refactor_every, left)

    def _primal(self, cost):
        AT = self._AT() if self.backend == "numpy" else None
        self._prices(cost)
        while True:
            args = (self.col_ptr, self.col_idx, self.col_val, cost, self.lb, self.ub, self.x,
                    self.status, self.basis, self.Binv, self.y, self._budget(), self.tol_feas,
                    self.tol_opt, self.tol_piv, self.bland_after, self._degen)
            if AT is not None:
                code, piv, self._degen = self._k.primal_pivots(*args, AT=AT)
            else:
                code, piv, self._degen = self._k.primal_pivots(*args)
            self.iterations += piv
            if code != LIMIT:
                return code
            self._refactor()
            self._prices(cost)

    def _perturbed(self, cost):
        """Shift nonbasic costs away from their bound so that ties in ``d`` are broken.

        Options that differ only in their route share a utility, which makes
        the dual heavily degenerate; unperturbed, the ratio test stalls.  The
        shifts keep the current basis dual feasible and are removed again by
        ``_polish``.
        """
        if self.perturb <= 0:
            return cost
        j = np.arange(self.N)
        frac = (j * 0.6180339887498949) % 1.0  # deterministic, spread over [0, 1)
        xi = self.perturb * (1.0 + np.abs(cost)) * (1.0 + frac)
        st = self.status
        sign = np.where(st == 1, 1.0, np.where(st == 2, -1.0, 0.0))
        sign[self.lb == self.ub] = 0.0
        return cost + sign * xi

    def _dual(self, cost):
        AT = self._AT() if self.backend == "numpy" else None
        cost = self._perturbed(cost)
        self._prices(cost)
        d = self._reduced(cost)
        while True:
            args = (self.col_ptr, self.col_idx, self.col_val, cost, self.lb, self.ub, self.x,
                    self.status, self.basis, self.Binv, self.y, d, self._budget(),
                    self.tol_feas, self.tol_opt, self.tol_piv)
            if AT is not None:
                code, piv, _ = self._k.dual_pivots(*args, AT=AT)
            else:
                code, piv, _ = self._k.dual_pivots(*args)
            self.iterations += piv
            if code != LIMIT:
                return code
            self._refactor()
            self._prices(cost)
            d = self._reduced(cost)

    def _primal_infeasible(self):
        xb = self.x[self.basis]
        return np.any(xb < self.lb[self.basis] - self.tol_feas) or np.any(xb > self.ub[self.basis] + self.tol_feas)

    def _dual_infeasible(self, cost):
        d = self._reduced(cost)
        tol = self.tol_opt * (1.0 + np.abs(cost))
        mov = self.lb != self.ub
        st = self.status
        bad = mov & (((st == 1) & (d < -tol)) | ((st == 2) & (d > tol)) | ((st == 3) & (np.abs(d) > tol)))
        return bool(np.any(bad))

    def _flip_to_dual_feasible(self, cost):
        """Move boxed nonbasics to the bound their reduced cost prefers."""
        self._prices(cost)
        d = self._reduced(cost)
        tol = self.tol_opt * (1.0 + np.abs(cost))
        st = self.status
        to_hi = (st == 1) & (d < -tol) & np.isfinite(self.ub)
        to_lo = (st == 2) & (d > tol) & np.isfinite(self.lb)
        st[to_hi] = 2
        st[to_lo] = 1
        self._place_nonbasic()
        self._recompute_primal()

    def _polish(self, cost):
        """Alternate dual/primal passes until the refactored basis is optimal."""
        for _ in range(5):
            self._refactor()
            self._prices(cost)
            if self._primal_infeasible():
                if self._dual_infeasible(cost):
                    return None
                code = self._dual(cost)
                if code == INFEASIBLE:
                    return INFEASIBLE
                continue
            if self._dual_infeasible(cost):
                code = self._primal(cost)
                if code == UNBOUNDED:
                    return UNBOUNDED
                continue
            return OPTIMAL
        raise IterationLimitError("simplex did not settle after repeated refactoring")

    # -- public API ----------------------------------------------------------
    def solve(self, crash=None) -> LPSolution:
        """Solve from scratch.

        ``crash`` optionally names one structural column per row (``-1`` keeps
        the row's slack) for the starting basis.  If that basis is dual feasible
        once nonbasics sit on their cheaper bound, the dual simplex runs from
        it; otherwise the two-phase primal simplex starts from the slack basis.
        """
        if crash is not None and self._crash(np.asarray(crash, dtype=np.int64)):
            self.iterations = 0
            self._degen = 0
            code = self._dual(self.c)
            if code == INFEASIBLE:
                return LPSolution(LPStatus.INFEASIBLE, iterations=self.iterations)
            return self._finish(self.c)
        return self._two_phase()

    def _crash(self, crash) -> bool:
        m, n = self.m, self.n
        if crash.shape != (m,):
            raise ValueError(f"crash basis needs {m} entries")
        used = crash[crash >= 0]
        if len(np.unique(used)) != len(used) or np.any(used >= n):
            raise ValueError("crash columns must be distinct structural indices")
        art = slice(n + m, n + 2 * m)
        self.lb[art] = 0.0
        self.ub[art] = 0.0
        self._set_art_signs(np.ones(m))
        self.basis = np.where(crash >= 0, crash, n + np.arange(m))
        st = self.status
        st[:] = 1
        st[self.basis] = 0
        c = self.c
        nb = st != 0
        if np.any(nb & ((np.isinf(self.lb) & (c > 0)) | (np.isinf(self.ub) & (c < 0)))):
            return False
        self.x[:] = 0.0
        self._place_nonbasic()
        try:
            self._refactor()
        except SingularBasisError:
            return False
        self._flip_to_dual_feasible(c)
        return not self._dual_infeasible(c)

    def _two_phase(self) -> LPSolution:
        m, n = self.m, self.n
        self.iterations = 0
        self._degen = 0
        art = slice(n + m, n + 2 * m)
        self.lb[art] = 0.0
        self.ub[art] = 0.0
        st = self.status
        st[:] = 1
        self.x[:] = 0.0
        self._place_nonbasic()
        r = self.b - self.lp.A @ self.x[:n]
        slo, shi = self.lb[n:n + m], self.ub[n:n + m]
        inside = (r >= slo - self.tol_feas) & (r <= shi + self.tol_feas)
        self.basis = np.empty(m, dtype=np.int64)
        sign = np.ones(m)
        for i in range(m):
            if inside[i]:
                self.basis[i] = n + i
                st[n + i] = 0
                self.x[n + i] = r[i]
            else:
                sb = min(max(r[i], slo[i]), shi[i])
                st[n + i] = 1 if sb == slo[i] else 2
                self.x[n + i] = sb
                sign[i] = 1.0 if r[i] > sb else -1.0
                self.basis[i] = n + m + i
                st[n + m + i] = 0
                self.ub[n + m + i] = np.inf
                self.x[n + m + i] = abs(r[i] - sb)
        self._set_art_signs(sign)
        self.Binv = np.diag(np.where(inside, 1.0, sign))
        self._factored = True

        need_phase1 = not np.all(inside)
        if need_phase1:
            c1 = np.zeros(self.N)
            c1[art] = 1.0
            self._primal(c1)
            self._refactor()
            if np.max(self.x[art]) > self.tol_feas:
                return LPSolution(LPStatus.INFEASIBLE, iterations=self.iterations)
            self.ub[art] = 0.0
            self.x[art] = 0.0
            self._recompute_primal()
        code = self._primal(self.c)
        if code == UNBOUNDED:
            return LPSolution(LPStatus.UNBOUNDED, iterations=self.iterations)
        return self._finish(self.c)

    def set_bounds(self, lb=None, ub=None, idx=None):
        """Change structural bounds (all of them, or those at ``idx``)."""
        sel = slice(0, self.n) if idx is None else np.asarray(idx)
        if lb is not None:
            self.lb[:self.n][sel] = lb
        if ub is not None:
            self.ub[:self.n][sel] = ub

    def set_cost(self, c):
        """Replace the structural objective (kept basis stays valid)."""
        c = np.asarray(c, dtype=float)
        if c.shape != (self.n,):
            raise ValueError(f"cost has shape {c.shape}, expected ({self.n},)")
        self.c[:self.n] = c

    def snapshot(self):
        return self.basis.copy(), self.status.copy()

    def warm_solve(self, snapshot=None) -> LPSolution:
        """Re-optimise from ``snapshot`` (or the current basis) with the dual simplex."""
        self.iterations = 0
        self._degen = 0
        if snapshot is not None:
            basis, status = snapshot
            if not (self._factored and np.array_equal(basis, self.basis)):
                self._factored = False
            self.basis = basis.copy()
            self.status = status.copy()
        self._place_nonbasic()
        try:
            if self._factored:
                self._recompute_primal()
            else:
                self._refactor()
            self._flip_to_dual_feasible(self.c)
            if self._dual_infeasible(self.c):
                if self._primal_infeasible():
                    return self.solve()
                code = self._primal(self.c)
                if code == UNBOUNDED:
                    return LPSolution(LPStatus.UNBOUNDED, iterations=self.iterations)
                return self._finish(self.c)
            code = self._dual(self.c)
        except SingularBasisError:
            return self.solve()
        if code == INFEASIBLE:
            return LPSolution(LPStatus.INFEASIBLE, iterations=self.iterations)
        return self._finish(self.c)

    def _finish(self, cost) -> LPSolution:
        try:
            code = self._polish(cost)
        except SingularBasisError:
            code = None
        if code is None:
            if self._restarted:
                raise SingularBasisError("basis lost feasibility twice")
            self._restarted = True
            try:
                return self._two_phase()
            finally:
                self._restarted = False
        if code == INFEASIBLE:
            return LPSolution(LPStatus.INFEASIBLE, iterations=self.iterations)
        if code == UNBOUNDED:
            return LPSolution(LPStatus.UNBOUNDED, iterations=self.iterations)
        n, m = self.n, self.m
        self._prices(cost)
        x = np.clip(self.x[:n], self.lp.lb, self.lp.ub)
        # clip to the (possibly tightened) working bounds as well
        x = np.clip(x, self.lb[:n], self.ub[:n])
        sign = np.where(self.lp.sense == LE, -1.0, 1.0)
        d = self._reduced(cost)[:n]
        obj = float(cost[:n] @ x) + self.lp.constant
        return LPSolution(LPStatus.OPTIMAL, x, obj, self.y * sign, self.iterations, d)


def solve_lp(lp: LinearProgram, tol_feas: float = 1e-7, *, backend: str | None = None, **kw) -> LPSolution:
    """Solve ``lp`` from scratch.  Infeasible/unbounded are statuses, not exceptions."""
    return SimplexSolver(lp, tol_feas=tol_feas, backend=backend, **kw).solve()


__all__ = ["SimplexSolver", "solve_lp", "SingularBasisError", "IterationLimitError", "EQ", "GE", "LE"]
