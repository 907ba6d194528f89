"""Exact branch-and-bound, the brute-force oracle and the heuristic schedulers."""
from __future__ import annotations

import heapq
import itertools
import time
from dataclasses import dataclass

import numpy as np

from . import _greedy_kernels as gk
from ._accel import resolve_backend
from .assignment import Assignment, InfeasibleInstanceError, make_assignment
from .formulation import capacity_violations, relaxation_lp, task_crash
from .lp import LPStatus, SimplexSolver
from .options import ProblemInstance

ORACLE_LIMIT = 10_000_000
TOL_INT = 1e-6


class NodeLimitError(RuntimeError):
    pass


class OracleSizeError(ValueError):
    pass


def _ms(t0: float) -> float:
    return (time.perf_counter() - t0) * 1e3


def _csc(instance: ProblemInstance):
    R = instance.usage
    return R.indptr.astype(np.int64), R.indices.astype(np.int64), R.data.astype(float)


def _raise_unplaced(instance, chosen, who):
    missing = np.flatnonzero(chosen < 0)
    if len(missing):
        ids = [instance.tasks[i].id for i in missing]
        raise InfeasibleInstanceError(f"{who}: no feasible option left for tasks {ids}", ids)


def scan_assign(instance: ProblemInstance, order, residual=None, backend=None) -> np.ndarray:
    """Walk ``order`` once; give each unplaced task the first option that still fits."""
    residual = instance.capacity.astype(float).copy() if residual is None else residual
    order = np.asarray(order, dtype=np.int64)
    fn = gk.scan_assign_numba if resolve_backend(backend) == "numba" else gk.scan_assign_numpy
    return fn(order, instance.option_task.astype(np.int64), instance.num_tasks, *_csc(instance), residual)


def utility_order(instance: ProblemInstance, subset=None) -> np.ndarray:
    idx = np.arange(instance.num_options) if subset is None else np.asarray(subset, dtype=np.int64)
    return idx[np.lexsort((idx, instance.utility[idx]))]


# -- heuristics --------------------------------------------------------------

def greedy_u(instance: ProblemInstance, *, backend=None) -> Assignment:
    t0 = time.perf_counter()
    chosen = scan_assign(instance, utility_order(instance), backend=backend)
    rt = _ms(t0)
    _raise_unplaced(instance, chosen, "greedy-u")
    return make_assignment(instance, chosen, "greedy-u", runtime_ms=rt)


def _greedy_t_chosen(instance, perm, backend):
    fn = gk.per_task_numba if resolve_backend(backend) == "numba" else gk.per_task_numpy
    residual = instance.capacity.astype(float).copy()
    return fn(np.asarray(perm, dtype=np.int64), instance.task_ptr.astype(np.int64),
              instance.utility.astype(float), *_csc(instance), residual)


def _check_perm(perm, n):
    perm = np.asarray(perm, dtype=np.int64)
    if perm.shape != (n,) or not np.array_equal(np.sort(perm), np.arange(n)):
        raise ValueError(f"permutation must be a bijection over {n} tasks")
    return perm


def greedy_t(instance: ProblemInstance, permutation=None, *, backend=None) -> Assignment:
    """Tasks in ``permutation`` order (identity by default), each takes its best option that fits."""
    n = instance.num_tasks
    perm = np.arange(n) if permutation is None else _check_perm(permutation, n)
    t0 = time.perf_counter()
    chosen = _greedy_t_chosen(instance, perm, backend)
    rt = _ms(t0)
    _raise_unplaced(instance, chosen, "greedy-t")
    return make_assignment(instance, chosen, "greedy-t", runtime_ms=rt)


def permutations(num_tasks: int, M: int, seed: int) -> list[np.ndarray]:
    """``M`` permutations from one stream, so the first k are the same for every M >= k."""
    rng = np.random.default_rng(seed)
    return [rng.permutation(num_tasks) for _ in range(M)]


def greedy_t_multi(instance: ProblemInstance, M: int = 100, seed: int = 0, *, backend=None) -> Assignment:
    """Best of ``M`` seeded Greedy-T runs (ties go to the earlier permutation)."""
    if M < 1:
        raise ValueError("M must be >= 1")
    t0 = time.perf_counter()
    best, best_u, utils = None, np.inf, []
    for perm in permutations(instance.num_tasks, M, seed):
        chosen = _greedy_t_chosen(instance, perm, backend)
        _raise_unplaced(instance, chosen, "greedy-t-multi")
        u = float(np.sum(instance.utility[chosen]))
        utils.append(u)
        if u < best_u:
            best, best_u = chosen, u
    rt = _ms(t0)
    return make_assignment(instance, best, "greedy-t-multi", runtime_ms=rt, utilities=utils)


def linear_relax_order(instance: ProblemInstance, x: np.ndarray, tol: float = TOL_INT) -> np.ndarray:
    """Positive LP values in descending order, then zero-valued options by utility (ids break ties)."""
    ids = np.arange(instance.num_options)
    pos = x > tol
    p = ids[pos]
    p = p[np.lexsort((p, -x[p]))]
    return np.concatenate([p, utility_order(instance, ids[~pos])])


def linear_relax(instance: ProblemInstance, *, backend=None) -> Assignment:
    t0 = time.perf_counter()
    if instance.num_tasks == 0:
        return make_assignment(instance, [], "linear-relax", runtime_ms=_ms(t0))
    lp = relaxation_lp(instance)
    sol = SimplexSolver(lp, backend=backend).solve(crash=task_crash(lp, instance))
    if sol.status is not LPStatus.OPTIMAL:
        raise InfeasibleInstanceError(f"linear-relax: relaxation is {sol.status.value}")
    chosen = scan_assign(instance, linear_relax_order(instance, sol.x), backend=backend)
    rt = _ms(t0)
    _raise_unplaced(instance, chosen, "linear-relax")
    return make_assignment(instance, chosen, "linear-relax", runtime_ms=rt, lp_objective=sol.objective)


# -- brute force -------------------------------------------------------------

def brute_force_oracle(instance: ProblemInstance, *, limit: int = ORACLE_LIMIT, chunk: int = 65536) -> Assignment:
    """Enumerate every combination; minimum utility, ties to the lexicographically smallest ids."""
    t0 = time.perf_counter()
    T = instance.num_tasks
    sizes = [len(instance.task_options(i)) for i in range(T)]
    total = int(np.prod(sizes, dtype=object)) if T else 1
    if total > limit:
        raise OracleSizeError(f"{total} combinations exceed the oracle limit {limit}")
    if T == 0:
        return make_assignment(instance, [], "brute-force", runtime_ms=_ms(t0), evaluated=1)
    if total == 0:
        raise InfeasibleInstanceError("brute-force: some task has no options")
    U = instance.usage.toarray()
    cap = instance.capacity
    slack = 1e-9 * np.maximum(1.0, np.abs(cap))
    ranges = [list(instance.task_options(i)) for i in range(T)]
    best, best_u = None, np.inf
    it = itertools.product(*ranges)
    evaluated = 0
    while True:
        block = list(itertools.islice(it, chunk))
        if not block:
            break
        combos = np.asarray(block, dtype=np.int64)
        evaluated += len(combos)
        load = U[:, combos].sum(axis=2)
        ok = np.all(load <= (cap + slack)[:, None], axis=0)
        util = instance.utility[combos[:, 0]].copy()
        for t in range(1, T):
            util += instance.utility[combos[:, t]]
        # candidates in (utility, enumeration) order; enumeration order is lexicographic
        for k in np.flatnonzero(ok)[np.argsort(util[ok], kind="stable")]:
            if util[k] >= best_u:
                break
            if not capacity_violations(instance, combos[k]):
                best, best_u = combos[k], util[k]
                break
    if best is None:
        raise InfeasibleInstanceError("brute-force: no feasible combination")
    return make_assignment(instance, best, "brute-force", runtime_ms=_ms(t0), evaluated=evaluated)


# -- branch and bound --------------------------------------------------------

@dataclass
class BnbStats:
    nodes: int = 0
    lp_iterations: int = 0
    max_depth: int = 0
    pruned: int = 0


def _most_fractional(x: np.ndarray, tol: float) -> int:
    frac = np.minimum(x, 1.0 - x)
    j = int(np.argmax(frac))  # lowest index among equals
    return j if frac[j] > tol else -1


def solve_exact(instance: ProblemInstance, gap_tol: float = 0.0, *, node_limit: int | None = None,
                backend=None, incumbent: Assignment | None = None, tol_int: float = TOL_INT) -> Assignment:
    """Best-bound branch-and-bound on the option variables.

    Branches on the most fractional ``x_j``, the ``x_j = 1`` child (siblings
    fixed to 0) first.  Each child re-optimises the parent's basis with the
    dual simplex.  Nodes are pruned when their bound is within ``gap_tol`` of
    the incumbent.
    """
    t0 = time.perf_counter()
    T = instance.num_tasks
    if T == 0:
        return make_assignment(instance, [], "optimal", runtime_ms=_ms(t0), nodes=0)
    lp = relaxation_lp(instance, cardinality=True)
    solver = SimplexSolver(lp, backend=backend)
    stats = BnbStats()

    best_chosen, best_u = None, np.inf
    seeds = [incumbent] if incumbent is not None else []
    for h in (greedy_u,):
        try:
            seeds.append(h(instance, backend=backend))
        except InfeasibleInstanceError:
            pass
    for a in seeds:
        if a.total_utility < best_u and not capacity_violations(instance, a.chosen):
            best_chosen, best_u = np.asarray(a.chosen), a.total_utility

    root = solver.solve(crash=task_crash(lp, instance))
    stats.nodes = 1
    stats.lp_iterations += root.iterations
    if root.status is not LPStatus.OPTIMAL:
        raise InfeasibleInstanceError(f"optimal: relaxation is {root.status.value}")

    task_ptr = instance.task_ptr
    option_task = instance.option_task
    margin = gap_tol + 1e-9
    heap = []
    seq = itertools.count()

    def consider(sol, lb, ub, depth):
        nonlocal best_chosen, best_u
        if sol.objective >= best_u - margin:
            stats.pruned += 1
            return
        j = _most_fractional(sol.x, tol_int)
        if j < 0:
            chosen = np.array([task_ptr[i] + int(np.argmax(sol.x[task_ptr[i]:task_ptr[i + 1]]))
                               for i in range(T)])
            u = float(np.sum(instance.utility[chosen]))
            if u < best_u and not capacity_violations(instance, chosen):
                best_chosen, best_u = chosen, u
            return
        heapq.heappush(heap, (sol.objective, next(seq), depth, j, lb, ub, solver.snapshot()))

    consider(root, lp.lb.copy(), lp.ub.copy(), 0)
    while heap:
        bound, _, depth, j, lb, ub, snap = heapq.heappop(heap)
        if bound >= best_u - margin:
            stats.pruned += 1
            continue
        t = option_task[j]
        sib = np.arange(task_ptr[t], task_ptr[t + 1])
        one_lb, one_ub = lb.copy(), ub.copy()
        one_ub[sib] = 0.0
        one_lb[j] = one_ub[j] = 1.0
        zero_ub = ub.copy()
        zero_ub[j] = 0.0
        for clb, cub in ((one_lb, one_ub), (lb, zero_ub)):
            if node_limit is not None and stats.nodes >= node_limit:
                raise NodeLimitError(f"branch-and-bound exceeded {node_limit} nodes")
            stats.nodes += 1
            stats.max_depth = max(stats.max_depth, depth + 1)
            if np.any(clb > cub):
                continue
            solver.set_bounds(clb, cub)
            sol = solver.warm_solve(snap)
            stats.lp_iterations += sol.iterations
            if sol.status is LPStatus.OPTIMAL:
                consider(sol, clb, cub, depth + 1)

    if best_chosen is None:
        raise InfeasibleInstanceError("optimal: no feasible integer assignment")
    return make_assignment(instance, best_chosen, "optimal", runtime_ms=_ms(t0), nodes=stats.nodes,
                           lp_iterations=stats.lp_iterations, max_depth=stats.max_depth,
                           root_bound=root.objective)


SCHEDULERS = ("optimal", "selr", "linear-relax", "greedy-u", "greedy-t", "greedy-t-multi")
