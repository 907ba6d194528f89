"""Small instance builders shared by the test modules."""
from itertools import product

import numpy as np

from edgeoffload.network import (DeviceType, Link, NetworkGraph, Node, NodeKind, Scenario, ServiceProfile,
                                 Task)
from edgeoffload.options import build_instance


def profile(name, acc, exec_time, cpu, ram, bw=5.0, *, sensor=False, max_hop=2):
    if sensor:
        return ServiceProfile(name, acc, exec_time, 0.0, 0.0, False, 0, cpu, ram, ram, 0.0, DeviceType.SENSOR)
    return ServiceProfile(name, acc, exec_time, 0.0, 0.0, False, max_hop, cpu, ram, ram, bw, DeviceType.SERVER)


def star_scenario(num_tasks, *, edge_cpu=6000.0, edge_ram=15000.0, core_cpu=6000.0, link_bw=7.0,
                  sensor_cpu=2000.0, sensor_ram=2900.0, edge_profiles=(), core_profiles=(), sensor_profiles=(),
                  gbw=9000.0, min_accuracy=1.0, max_latency=100.0, sensor_profiles_by_task=None):
    """Core 0 -- edge 1 -- sensors 2.. ; every sensor hosts one task."""
    nodes = [Node(0, NodeKind.CORE, core_cpu, 15000.0, True, 0), Node(1, NodeKind.EDGE, edge_cpu, edge_ram, False, 0)]
    nodes += [Node(2 + i, NodeKind.SENSOR, sensor_cpu, sensor_ram, False, 0) for i in range(num_tasks)]
    pairs = [(0, 1), (1, 0)] + [p for i in range(num_tasks) for p in ((2 + i, 1), (1, 2 + i))]
    graph = NetworkGraph(tuple(nodes), tuple(Link(a, b, link_bw) for a, b in sorted(pairs)), gbw)
    profiles = {0: tuple(core_profiles), 1: tuple(edge_profiles)}
    for i in range(num_tasks):
        own = sensor_profiles if sensor_profiles_by_task is None else sensor_profiles_by_task[i]
        profiles[2 + i] = tuple(own)
    tasks = tuple(Task(i, 2 + i, min_accuracy, max_latency, 2, 5000) for i in range(num_tasks))
    return Scenario(graph, profiles, tasks, 0)


def greedy_trap():
    """Two tasks, room for one offload at the edge.

    Utilities at lambda 0.5 (latencies equal, so only accuracy counts):
    edge -0.5 for both tasks, on-device -0.4375 for task 0 and 0 for task 1.
    Option ids: task 0 -> (0 edge, 1 on-device), task 1 -> (2 edge, 3 on-device).
    Optimum: task 1 offloads, task 0 stays local, total -0.9375.
    """
    edge = profile("E", 90.0, 0.1, 4000.0, 1000.0)
    return build_instance(star_scenario(
        2, edge_cpu=6000.0, edge_profiles=[edge],
        sensor_profiles_by_task=[[profile("S0", 85.0, 0.1, 1000.0, 500.0, sensor=True)],
                                 [profile("S1", 50.0, 0.1, 1000.0, 500.0, sensor=True)]]), 0.5)


def random_tiny(rng: np.random.Generator, *, max_tasks=8, max_options=5, lam=0.5, contended=True):
    """Random star instance with at most ``max_options`` options per task.

    Capacities are drawn around the total demand so that resources bind.
    """
    T = int(rng.integers(1, max_tasks + 1))
    n_opts = int(rng.integers(1, max_options + 1))
    n_sensor = int(rng.integers(1, n_opts + 1))
    n_rest = n_opts - n_sensor
    n_edge = int(rng.integers(0, n_rest + 1))
    n_core = n_rest - n_edge

    def draw(k, prefix, sensor=False):
        return [profile(f"{prefix}{i}", float(rng.uniform(40, 90)), float(rng.uniform(0.01, 0.3)),
                        float(rng.choice([500.0, 1000.0, 1500.0, 2500.0, 4000.0])),
                        float(rng.uniform(100, 3000)), float(rng.choice([1.0, 2.0, 3.5, 5.0])), sensor=sensor)
                for i in range(k)]

    scale = rng.uniform(0.3, 1.2) if contended else 10.0
    scen = star_scenario(
        T,
        edge_cpu=float(max(1.0, scale * T * 1500)), core_cpu=float(max(1.0, scale * T * 2000)),
        edge_ram=float(max(1.0, scale * T * 1500)), link_bw=float(rng.choice([5.0, 7.0, 10.0])),
        sensor_cpu=float(rng.choice([1000.0, 2000.0, 4000.0])), sensor_ram=float(rng.uniform(1500, 3500)),
        edge_profiles=draw(n_edge, "E"), core_profiles=draw(n_core, "C"),
        sensor_profiles=draw(n_sensor, "S", sensor=True), gbw=float(max(1.0, scale * T * 6)),
    )
    return build_instance(scen, lam)


def enumerate_feasible(instance):
    """Every feasible assignment (float check, for oracle use on tiny instances)."""
    U = instance.usage.toarray()
    out = []
    for combo in product(*[list(instance.task_options(i)) for i in range(instance.num_tasks)]):
        if np.all(U[:, list(combo)].sum(axis=1) <= instance.capacity + 1e-9):
            out.append(combo)
    return out


# -- LP oracles ----------------------------------------------------------------

def random_lp(rng: np.random.Generator, max_vars=6, max_rows=6):
    """Small LP with a finite box, mixed row senses and integer-ish data."""
    from edgeoffload.lp import LinearProgram
    n = int(rng.integers(1, max_vars + 1))
    m = int(rng.integers(0, max_rows + 1))
    A = rng.integers(-4, 5, size=(m, n)).astype(float)
    A[rng.random((m, n)) < 0.3] = 0.0
    c = rng.integers(-5, 6, size=n).astype(float)
    lb = -rng.integers(0, 4, size=n).astype(float)
    ub = lb + rng.integers(1, 6, size=n).astype(float)
    # rows are satisfied by an interior point x0, except for an occasional shift that may break feasibility
    x0 = np.round(rng.uniform(lb, ub), 2)
    ax = A @ x0
    sense = rng.choice(["<=", ">=", "="], size=m, p=[0.5, 0.3, 0.2])
    slack = np.round(rng.uniform(0.0, 2.0, size=m), 2)
    slack[rng.random(m) < 0.15] *= -3.0
    b = np.where(sense == "<=", ax + slack, np.where(sense == ">=", ax - slack, ax))
    return LinearProgram.build(c, A, list(sense), b, lb, ub)


def vertex_enumeration(lp):
    """Minimum of ``c'x`` over all basic feasible points of a bounded LP (``None`` if infeasible).

    Every choice of ``n`` constraints (rows or bounds) taken as equalities is
    solved; nonsingular, feasible solutions are the vertices.
    """
    from itertools import combinations
    n = lp.num_vars
    G = np.vstack([lp.A.toarray(), np.eye(n), np.eye(n)])
    h = np.concatenate([lp.b, lp.lb, lp.ub])
    idx = np.array(list(combinations(range(len(h)), n)), dtype=np.int64)
    M, rhs = G[idx], h[idx]
    ok = np.abs(np.linalg.det(M)) > 1e-10
    if not ok.any():
        return None
    X = np.linalg.solve(M[ok], rhs[ok][..., None])[..., 0]
    feas = [x for x in X if lp.is_feasible(x, tol=1e-7)]
    if not feas:
        return None
    return float(min(lp.c @ x for x in feas)) + lp.constant


def dual_objective(lp, sol):
    """Lagrangian dual value from the reported multipliers; raises if they are not dual feasible."""
    from edgeoffload.lp import LE, GE
    sign = np.where(lp.sense == LE, -1.0, 1.0)
    y = sol.duals * sign
    tol = 1e-7
    assert np.all(y[lp.sense == LE] <= tol) and np.all(y[lp.sense == GE] >= -tol)
    d = lp.c - lp.A.T @ y
    assert np.allclose(d, sol.reduced_costs, atol=1e-7)
    val = float(lp.b @ y) + lp.constant
    for j in range(lp.num_vars):
        if d[j] > tol:
            assert np.isfinite(lp.lb[j])
            val += d[j] * lp.lb[j]
        elif d[j] < -tol:
            assert np.isfinite(lp.ub[j])
            val += d[j] * lp.ub[j]
        else:
            val += d[j] * sol.x[j]
    return val


# -- SeLR trace invariants ------------------------------------------------------

def selr_trace_violations(instance, assignment, config):
    """List of broken per-iteration invariants for a run with recorded iterates (empty if all hold).

    Also returns the number of sparse (non warm-start) iterations seen.
    """
    from edgeoffload.selr import constraint_violations, dual_ascent_step, update_weights
    bad = []
    trace = assignment.extras["trace"]
    prev = None
    sparse = 0
    for rec in trace:
        where = f"k={rec.k}"
        if np.any(rec.x < rec.lb) or np.any(rec.x > rec.ub) or np.any(rec.lb < 0) or np.any(rec.ub > 1):
            bad.append(f"{where}: iterate outside its box")
        if np.any(rec.mu < 0):
            bad.append(f"{where}: negative multiplier")
        if rec.warm_start:
            if np.any(rec.mu != 0):
                bad.append(f"{where}: warm start with nonzero multipliers")
        else:
            sparse += 1
            if prev is None or prev.assigned:
                bad.append(f"{where}: sparse iteration right after an assignment")
            else:
                if np.max(np.abs(rec.x - prev.x)) > config.delta + 1e-7:
                    bad.append(f"{where}: step exceeds the trust region")
                if not np.array_equal(rec.w, update_weights(prev.x, config.epsilon)):
                    bad.append(f"{where}: weights differ from the reweighting rule")
                expect = dual_ascent_step(prev.mu, constraint_violations(instance, prev.x), config.alpha)
                if not np.array_equal(rec.mu, expect):
                    bad.append(f"{where}: multipliers differ from the ascent step")
        prev = rec
    if len(assignment.chosen) != instance.num_tasks:
        bad.append("final assignment incomplete")
    for i, j in enumerate(assignment.chosen):
        if instance.option_task[j] != i:
            bad.append(f"task {i}: option {j} belongs to another task")
    return bad, sparse
