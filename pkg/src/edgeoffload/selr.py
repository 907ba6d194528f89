"""Sparsified Lagrangian relaxation (SeLR) scheduler.

Each iteration solves one LP.  After any task was assigned (and at the
start) it is the plain relaxation under the residual capacities, with the
multipliers reset.  Otherwise capacities are dualised and an L1 term with
reweighting drives every task towards a single option:

    min  sum_j (u_j + gamma * w_j + (R' mu)_j) x_j
    s.t. sum_{j in J_i} x_j = 1,   max(0, x_prev - delta) <= x <= min(1, x_prev + delta)

Shrinking the problem is realised by bound fixings on one persistent LP per
kind (assigned option at 1, removed options at 0), which keeps the previous
basis usable as a warm start.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .assignment import Assignment, InfeasibleInstanceError, make_assignment
from .baselines import scan_assign, utility_order
from .formulation import relaxation_lp, task_crash
from .lp import LinearProgram, LPStatus, SimplexSolver
from .options import ProblemInstance

FALLBACKS = ("greedy-u", "fail")


class SelrFallbackError(RuntimeError):
    """Iterations ran out with unassigned tasks and the fallback is disabled."""


@dataclass(frozen=True)
class SelrConfig:
    gamma: float = 1.0
    alpha: float = 1.0
    delta: float = 0.1
    epsilon: float = 1e-4
    max_iters: int = 50
    tol_int: float = 1e-6
    fallback: str = "greedy-u"

    def __post_init__(self):
        for name in ("gamma", "alpha", "delta"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not 0 < self.epsilon < 1:
            raise ValueError("epsilon must lie in (0, 1)")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not 0 < self.tol_int < 0.5:
            raise ValueError("tol_int must lie in (0, 0.5)")
        if self.fallback not in FALLBACKS:
            raise ValueError(f"fallback must be one of {FALLBACKS}")


@dataclass
class IterationRecord:
    k: int
    warm_start: bool
    assigned: list[int]
    max_violation: float
    sparsity: int
    lp_iterations: int
    x: np.ndarray | None = field(default=None, repr=False)
    w: np.ndarray | None = field(default=None, repr=False)
    mu: np.ndarray | None = field(default=None, repr=False)
    lb: np.ndarray | None = field(default=None, repr=False)
    ub: np.ndarray | None = field(default=None, repr=False)
    active: np.ndarray | None = field(default=None, repr=False)

    def as_dict(self) -> dict:
        return {"k": self.k, "warm_start": self.warm_start, "assigned_tasks": self.assigned,
                "max_violation": self.max_violation, "sparsity": self.sparsity,
                "lp_iterations": self.lp_iterations}


def update_weights(x, epsilon: float) -> np.ndarray:
    return 1.0 / (np.abs(np.asarray(x, dtype=float)) + epsilon)


def constraint_violations(instance: ProblemInstance, x, capacity=None) -> np.ndarray:
    """``R x - C`` per resource row; positive entries are violated."""
    x = np.asarray(x, dtype=float)
    if x.shape != (instance.num_options,):
        raise ValueError(f"x has shape {x.shape}, expected ({instance.num_options},)")
    cap = instance.capacity if capacity is None else capacity
    return instance.usage @ x - cap


def dual_ascent_step(mu, violations, alpha: float) -> np.ndarray:
    return np.maximum(0.0, np.asarray(mu, dtype=float) + alpha * np.asarray(violations, dtype=float))


def trust_bounds(x_prev, delta: float) -> tuple[np.ndarray, np.ndarray]:
    x_prev = np.asarray(x_prev, dtype=float)
    return np.maximum(0.0, x_prev - delta), np.minimum(1.0, x_prev + delta)


def sparse_cost(instance: ProblemInstance, mu, w, gamma: float) -> np.ndarray:
    return instance.utility + gamma * np.asarray(w, dtype=float) + instance.usage.T @ np.asarray(mu, dtype=float)


def task_rows(instance: ProblemInstance) -> sp.csc_matrix:
    n = instance.num_options
    return sp.csc_matrix((np.ones(n), (instance.option_task, np.arange(n))), shape=(instance.num_tasks, n))


def build_relaxed_lp(instance: ProblemInstance, mu, w, gamma: float, x_prev=None, delta: float = 0.1,
                     *, fixed_one=(), fixed_zero=()) -> LinearProgram:
    """The dualised, L1-weighted subproblem for one iteration.

    ``fixed_one`` / ``fixed_zero`` pin already-assigned and removed options.
    The objective constant is ``-mu'C`` so the LP value equals the Lagrangian.
    """
    mu = np.asarray(mu, dtype=float)
    w = np.asarray(w, dtype=float)
    n = instance.num_options
    if mu.shape != instance.capacity.shape:
        raise ValueError(f"mu has shape {mu.shape}, expected {instance.capacity.shape}")
    if w.shape != (n,):
        raise ValueError(f"w has shape {w.shape}, expected ({n},)")
    if np.any(mu < 0) or np.any(w < 0):
        raise ValueError("mu and w must be non-negative")
    if x_prev is None:
        lb, ub = np.zeros(n), np.ones(n)
    else:
        if np.shape(x_prev) != (n,):
            raise ValueError(f"x_prev has shape {np.shape(x_prev)}, expected ({n},)")
        lb, ub = trust_bounds(x_prev, delta)
    lb[list(fixed_zero)] = 0.0
    ub[list(fixed_zero)] = 0.0
    lb[list(fixed_one)] = 1.0
    ub[list(fixed_one)] = 1.0
    c = sparse_cost(instance, mu, w, gamma)
    return LinearProgram.build(c, task_rows(instance), ["="] * instance.num_tasks, np.ones(instance.num_tasks),
                               lb, ub, constant=-float(mu @ instance.capacity))


class _Run:
    """Mutable state of one SeLR run."""

    def __init__(self, instance: ProblemInstance, config: SelrConfig, backend, record: bool):
        self.inst = instance
        self.cfg = config
        self.record = record
        n = instance.num_options
        self.active = np.ones(n, dtype=bool)     # option still selectable
        self.one = np.zeros(n, dtype=bool)       # assigned options
        self.chosen = np.full(instance.num_tasks, -1, dtype=np.int64)
        self.residual = instance.capacity.astype(float).copy()
        self.R = instance.usage
        self.Rr = instance.usage.tocsr()
        self.warm_lp = relaxation_lp(instance)
        self.warm = SimplexSolver(self.warm_lp, backend=backend)
        self.sparse = None
        self.backend = backend
        self.warm_snap = None
        self.sparse_snap = None
        self.trace: list[IterationRecord] = []

    def fixed_bounds(self):
        lb = self.one.astype(float)
        ub = (self.active | self.one).astype(float)
        return lb, ub

    def solve_warm(self):
        lb, ub = self.fixed_bounds()
        self.warm.set_bounds(lb, ub)
        if self.warm_snap is None:
            sol = self.warm.solve(crash=task_crash(self.warm_lp, self.inst))
        else:
            sol = self.warm.warm_solve(self.warm_snap)
        if sol.status is LPStatus.OPTIMAL:
            self.warm_snap = self.warm.snapshot()
        return sol

    def solve_sparse(self, mu, w, x_prev):
        cfg = self.cfg
        c = sparse_cost(self.inst, mu, w, cfg.gamma)
        lb, ub = trust_bounds(x_prev, cfg.delta)
        flb, fub = self.fixed_bounds()
        fixed = ~self.active | self.one
        lb[fixed], ub[fixed] = flb[fixed], fub[fixed]
        if self.sparse is None:
            lp = LinearProgram.build(c, task_rows(self.inst), ["="] * self.inst.num_tasks,
                                     np.ones(self.inst.num_tasks), lb, ub)
            self.sparse = SimplexSolver(lp, backend=self.backend)
            sol = self.sparse.solve(crash=task_crash(lp, self.inst))
        else:
            self.sparse.set_cost(c)
            self.sparse.set_bounds(lb, ub)
            sol = self.sparse.warm_solve(self.sparse_snap)
        if sol.status is LPStatus.OPTIMAL:
            self.sparse_snap = self.sparse.snapshot()
        return sol, lb, ub

    def fits(self, j):
        s, e = self.R.indptr[j], self.R.indptr[j + 1]
        return bool(np.all(self.R.data[s:e] <= self.residual[self.R.indices[s:e]]))

    def assign(self, t, j):
        inst = self.inst
        s, e = self.R.indptr[j], self.R.indptr[j + 1]
        rows = self.R.indices[s:e]
        self.residual[rows] -= self.R.data[s:e]
        self.chosen[t] = j
        self.one[j] = True
        self.active[inst.task_ptr[t]:inst.task_ptr[t + 1]] = False
        # prune options that no longer fit on the touched resources
        for r in rows:
            a, b = self.Rr.indptr[r], self.Rr.indptr[r + 1]
            cols = self.Rr.indices[a:b]
            over = self.Rr.data[a:b] > self.residual[r]
            self.active[cols[over]] = False

    def assign_integral(self, x):
        inst, tol = self.inst, self.cfg.tol_int
        done = []
        for t in range(inst.num_tasks):
            if self.chosen[t] >= 0:
                continue
            s, e = inst.task_ptr[t], inst.task_ptr[t + 1]
            xs = x[s:e]
            hi = np.flatnonzero(xs >= 1.0 - tol)
            if len(hi) == 0:
                continue
            j = s + int(hi[0])  # lowest id if several are (numerically) at one
            others = np.delete(xs, hi)
            if np.any(others > tol) or not self.active[j] or not self.fits(j):
                continue
            self.assign(t, j)
            done.append(t)
        return done


def run_selr(instance: ProblemInstance, config: SelrConfig | None = None, *, backend=None,
             record_iterates: bool = False) -> Assignment:
    config = config or SelrConfig()
    t0 = time.perf_counter()
    T, n = instance.num_tasks, instance.num_options
    if T == 0:
        return make_assignment(instance, [], "selr", runtime_ms=(time.perf_counter() - t0) * 1e3, trace=[])
    st = _Run(instance, config, backend, record_iterates)
    m_res = len(instance.capacity)
    mu = np.zeros(m_res)
    w = np.zeros(n)
    x = np.zeros(n)
    assigned_last = True  # forces the warm start at k = 1
    k = 0
    while np.any(st.chosen < 0) and k < config.max_iters:
        k += 1
        warm = assigned_last
        if warm:
            mu = np.zeros(m_res)
            sol = st.solve_warm()
            lb, ub = st.fixed_bounds()
            if sol.status is not LPStatus.OPTIMAL:
                if k == 1:
                    raise InfeasibleInstanceError(f"selr: relaxation is {sol.status.value}")
                break
        else:
            sol, lb, ub = st.solve_sparse(mu, w, x)
            if sol.status is not LPStatus.OPTIMAL:  # cannot happen: x itself is feasible
                break
        mu_used, w_used = mu, w
        x = np.clip(sol.x, lb, ub)
        done = st.assign_integral(x)
        viol = constraint_violations(instance, x)
        assigned_last = bool(done)
        if not done:
            w = update_weights(x, config.epsilon)
            mu = dual_ascent_step(mu, viol, config.alpha)
        live = st.active & ~st.one
        rec = IterationRecord(k, warm, [instance.tasks[t].id for t in done], float(viol.max(initial=0.0)),
                              int(np.count_nonzero(x[live] > config.tol_int)), sol.iterations)
        if record_iterates:
            rec.x, rec.w, rec.mu, rec.lb, rec.ub = x.copy(), w_used.copy(), mu_used.copy(), lb.copy(), ub.copy()
            rec.active = live.copy()
        st.trace.append(rec)

    fallback = False
    left = np.flatnonzero(st.chosen < 0)
    if len(left):
        if config.fallback == "fail":
            raise SelrFallbackError(f"selr: {len(left)} tasks unassigned after {k} iterations")
        fallback = True
        cand = np.flatnonzero(st.active & np.isin(instance.option_task, left))
        got = scan_assign(instance, utility_order(instance, cand), residual=st.residual, backend=backend)
        missing = [t for t in left if got[t] < 0]
        if missing:
            ids = [instance.tasks[t].id for t in missing]
            raise InfeasibleInstanceError(f"selr: fallback could not place tasks {ids}", ids)
        st.chosen[left] = got[left]
    rt = (time.perf_counter() - t0) * 1e3
    return make_assignment(instance, st.chosen, "selr", runtime_ms=rt, iterations=k, fallback_used=fallback,
                           trace=st.trace)
