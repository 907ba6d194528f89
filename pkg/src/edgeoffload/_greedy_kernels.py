"""Greedy assignment loops over the CSC resource matrix.

``residual`` is updated in place; unplaced tasks keep ``-1`` in ``chosen``.
The numpy twins follow the same scan order and tie rules.
"""
import numpy as np

from ._accel import njit


@njit
def _fits(j, indptr, indices, data, residual):
    for k in range(indptr[j], indptr[j + 1]):
        if data[k] > residual[indices[k]]:
            return False
    return True


@njit
def _take(j, indptr, indices, data, residual):
    for k in range(indptr[j], indptr[j + 1]):
        residual[indices[k]] -= data[k]


@njit
def scan_assign_numba(order, option_task, num_tasks, indptr, indices, data, residual):
    chosen = np.full(num_tasks, -1, dtype=np.int64)
    left = num_tasks
    for j in order:
        t = option_task[j]
        if chosen[t] >= 0:
            continue
        if _fits(j, indptr, indices, data, residual):
            chosen[t] = j
            _take(j, indptr, indices, data, residual)
            left -= 1
            if left == 0:
                break
    return chosen


@njit
def per_task_numba(perm, task_ptr, utility, indptr, indices, data, residual):
    chosen = np.full(task_ptr.shape[0] - 1, -1, dtype=np.int64)
    for t in perm:
        best = -1
        for j in range(task_ptr[t], task_ptr[t + 1]):
            if best >= 0 and utility[j] >= utility[best]:
                continue
            if _fits(j, indptr, indices, data, residual):
                best = j
        if best >= 0:
            chosen[t] = best
            _take(best, indptr, indices, data, residual)
    return chosen


def scan_assign_numpy(order, option_task, num_tasks, indptr, indices, data, residual):
    chosen = np.full(num_tasks, -1, dtype=np.int64)
    left = num_tasks
    for j in order:
        t = option_task[j]
        if chosen[t] >= 0:
            continue
        s, e = indptr[j], indptr[j + 1]
        rows = indices[s:e]
        if np.all(data[s:e] <= residual[rows]):
            chosen[t] = j
            residual[rows] -= data[s:e]
            left -= 1
            if left == 0:
                break
    return chosen


def per_task_numpy(perm, task_ptr, utility, indptr, indices, data, residual):
    chosen = np.full(len(task_ptr) - 1, -1, dtype=np.int64)
    # a task's options are contiguous columns, so their nonzeros are one slice
    owner = np.repeat(np.arange(len(indptr) - 1), np.diff(indptr))
    for t in perm:
        a, b = task_ptr[t], task_ptr[t + 1]
        if a == b:
            continue
        s, e = indptr[a], indptr[b]
        ok = np.ones(b - a, dtype=bool)
        ok[owner[s:e][data[s:e] > residual[indices[s:e]]] - a] = False
        if not ok.any():
            continue
        util = np.where(ok, utility[a:b], np.inf)
        best = a + int(np.argmin(util))  # argmin keeps the lowest id on ties
        s, e = indptr[best], indptr[best + 1]
        residual[indices[s:e]] -= data[s:e]
        chosen[t] = best
    return chosen
