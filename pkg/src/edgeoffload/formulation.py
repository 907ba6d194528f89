"""LP relaxation of the offloading MIP and exact feasibility checks."""
from __future__ import annotations

from fractions import Fraction

import numpy as np
import scipy.sparse as sp

from .lp import LinearProgram
from .options import ProblemInstance


def worst_case_load(instance: ProblemInstance) -> np.ndarray:
    """Largest possible load per resource when every task picks its costliest option there."""
    R = instance.usage
    out = np.zeros(R.shape[0])
    if instance.num_options == 0:
        return out
    coo = R.tocoo()
    task = instance.option_task[coo.col]
    # max over each (resource, task) pair, then sum over tasks
    key = coo.row.astype(np.int64) * max(instance.num_tasks, 1) + task
    order = np.lexsort((coo.data, key))
    k, v = key[order], coo.data[order]
    last = np.r_[k[1:] != k[:-1], True]
    np.add.at(out, k[last] // max(instance.num_tasks, 1), v[last])
    return out


def oversized_options(instance: ProblemInstance) -> np.ndarray:
    """Options that alone exceed some capacity; no integer assignment can use them."""
    R = instance.usage.tocoo()
    bad = R.data > instance.capacity[R.row]
    return np.unique(R.col[bad])


def binding_rows(instance: ProblemInstance) -> np.ndarray:
    """Resource rows that some integer or fractional assignment could violate."""
    return np.flatnonzero(worst_case_load(instance) > instance.capacity)


def cardinality_rows(instance: ProblemInstance, rows=None) -> tuple[sp.csr_matrix, np.ndarray]:
    """Valid inequalities ``sum_{j: R_rj > C_r/(k+1)} x_j <= k`` for binary ``x``.

    Any ``k + 1`` options that each use more than ``C_r/(k+1)`` of resource
    ``r`` overflow it, so at most ``k`` of them can be chosen.  Only
    inequalities that cut off something (more than ``k`` candidates) are kept.
    """
    rows = binding_rows(instance) if rows is None else rows
    R = instance.usage.tocsr()
    sets, rhs = [], []
    for r in rows:
        s, e = R.indptr[r], R.indptr[r + 1]
        cols, u = R.indices[s:e], R.data[s:e]
        cap = instance.capacity[r]
        kmax = int(np.searchsorted(np.cumsum(np.sort(u)), cap, side="right"))
        for k in range(1, kmax + 1):
            sel = np.sort(cols[u > cap / (k + 1)])
            if len(sel) > k:
                sets.append(sel)
                rhs.append(float(k))
    n = instance.num_options
    if not sets:
        return sp.csr_matrix((0, n)), np.zeros(0)
    ptr = np.r_[0, np.cumsum([len(a) for a in sets])]
    ind = np.concatenate(sets)
    return sp.csr_matrix((np.ones(len(ind)), ind, ptr), shape=(len(sets), n)), np.asarray(rhs)


def relaxation_lp(instance: ProblemInstance, rows=None, capacity=None, cost=None,
                  cardinality: bool = False) -> LinearProgram:
    """``min u'x`` over one-option-per-task equalities and capacity rows, ``0 <= x <= 1``.

    Row order: one equality per task, then the selected capacity rows, then
    (with ``cardinality``) the inequalities from ``cardinality_rows``; that
    mode also fixes ``oversized_options`` to zero.  Redundant capacity rows are
    dropped by default.
    """
    rows = binding_rows(instance) if rows is None else np.asarray(rows, dtype=np.int64)
    cap = instance.capacity if capacity is None else np.asarray(capacity, dtype=float)
    n = instance.num_options
    T = instance.num_tasks
    E = sp.csr_matrix((np.ones(n), (instance.option_task, np.arange(n))), shape=(T, n))
    blocks = [E, instance.usage[rows]]
    b = [np.ones(T), cap[rows]]
    if cardinality:
        K, kb = cardinality_rows(instance, rows)
        blocks.append(K)
        b.append(kb)
    A = sp.vstack(blocks, format="csc")
    b = np.concatenate(b)
    sense = ["="] * T + ["<="] * (len(b) - T)
    c = instance.utility if cost is None else cost
    ub = np.ones(n)
    if cardinality:
        ub[oversized_options(instance)] = 0.0
    return LinearProgram.build(c, A, sense, b, np.zeros(n), ub)


def task_crash(lp: LinearProgram, instance: ProblemInstance) -> np.ndarray:
    """Starting basis for ``relaxation_lp``-shaped LPs: each task row's cheapest open option."""
    crash = np.full(lp.num_rows, -1, dtype=np.int64)
    open_ = lp.ub > 0
    for i in range(instance.num_tasks):
        s, e = instance.task_ptr[i], instance.task_ptr[i + 1]
        cand = np.flatnonzero(open_[s:e])
        if len(cand):
            crash[i] = s + cand[np.argmin(lp.c[s + cand])]
    return crash


def assignment_load(instance: ProblemInstance, chosen) -> np.ndarray:
    chosen = np.asarray(chosen, dtype=np.int64)
    return np.asarray(instance.usage[:, chosen].sum(axis=1)).ravel()


def capacity_violations(instance: ProblemInstance, chosen) -> list[tuple[int, Fraction, Fraction]]:
    """Exact-arithmetic check of every capacity row; returns (row, load, capacity) for violated rows."""
    chosen = [int(j) for j in chosen]
    R = instance.usage
    load: dict[int, Fraction] = {}
    for j in chosen:
        s, e = R.indptr[j], R.indptr[j + 1]
        for r, v in zip(R.indices[s:e], R.data[s:e]):
            load[int(r)] = load.get(int(r), Fraction(0)) + Fraction(float(v))
    bad = []
    for r, tot in sorted(load.items()):
        cap = Fraction(float(instance.capacity[r]))
        if tot > cap:
            bad.append((r, tot, cap))
    return bad


def check_assignment(instance: ProblemInstance, chosen) -> list[str]:
    """All violated constraints of an integer assignment, as readable messages (empty = feasible)."""
    chosen = list(chosen)
    problems = []
    if len(chosen) != instance.num_tasks:
        problems.append(f"{len(chosen)} choices for {instance.num_tasks} tasks")
    for i, j in enumerate(chosen[:instance.num_tasks]):
        if j is None or j < 0 or not instance.task_ptr[i] <= j < instance.task_ptr[i + 1]:
            problems.append(f"task {i}: option {j} is not one of its options")
    if problems:
        return problems
    for r, load, cap in capacity_violations(instance, chosen):
        problems.append(f"{instance.resource_label(r)}: load {float(load)} > capacity {float(cap)}")
    return problems
