"""Offloading-option construction and the solver-facing problem instance.

Every capacity constraint is one row of a resource-usage matrix ``R``
(resources x options): node CPU rows, node RAM rows, link bandwidth rows and a
single global-bandwidth row.  Solvers only ever see ``R``, the capacity vector
and the per-task option ranges.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .network import NetworkGraph, Node, Scenario, ServiceProfile, Task

DEFAULT_ROUTE_CAP = 10_000


class InvalidPairError(ValueError):
    """A GPU-only profile was paired with a GPU-less server."""


class RouteLimitError(RuntimeError):
    pass


class TaskInfeasibleError(ValueError):
    def __init__(self, task_ids):
        self.task_ids = list(task_ids)
        super().__init__(f"tasks without any feasible offloading option: {self.task_ids}")


@dataclass(frozen=True)
class Route:
    nodes: tuple[int, ...]
    links: tuple[int, ...]

    @property
    def hop_count(self) -> int:
        return len(self.links)

    @property
    def src(self) -> int:
        return self.nodes[0]

    @property
    def dst(self) -> int:
        return self.nodes[-1]


def enumerate_routes(graph: NetworkGraph, src: int, max_hop: int, *, cap: int = DEFAULT_ROUTE_CAP,
                     adjacency=None, link_index=None) -> dict[int, list[Route]]:
    """All simple paths of at most ``max_hop`` links from ``src``, grouped by destination.

    Destinations are sorted by id and each destination's routes are in
    lexicographic node order; the zero-hop route to ``src`` is always present.
    """
    if not 0 <= src < graph.num_nodes:
        raise ValueError(f"unknown node {src}")
    if max_hop < 0:
        raise ValueError("max_hop must be non-negative")
    adj = adjacency if adjacency is not None else graph.adjacency()
    lidx = link_index if link_index is not None else graph.link_index()
    found: dict[int, list[Route]] = {}
    count = 0
    path = [src]
    on_path = {src}

    def visit():
        nonlocal count
        count += 1
        if count > cap:
            raise RouteLimitError(f"more than {cap} routes from node {src} within {max_hop} hops")
        nodes = tuple(path)
        links = tuple(lidx[(a, b)] for a, b in zip(nodes, nodes[1:]))
        found.setdefault(nodes[-1], []).append(Route(nodes, links))
        if len(path) - 1 == max_hop:
            return
        for nxt in adj[path[-1]]:
            if nxt not in on_path:
                path.append(nxt)
                on_path.add(nxt)
                visit()
                on_path.discard(nxt)
                path.pop()

    visit()
    return dict(sorted(found.items()))


def effective_profile_metrics(profile: ServiceProfile, server: Node, num_samples: int) -> tuple[float, float]:
    """Per-sample latency and RAM cost of running ``profile`` on ``server``."""
    if profile.uses_gpu and not server.has_gpu:
        raise InvalidPairError(f"profile {profile.model_id} needs a GPU, node {server.id} has none")
    if profile.uses_gpu:
        load, ram = profile.load_time_gpu, profile.ram_cost_gpu
    else:
        load, ram = profile.load_time_cpu, profile.ram_cost_cpu
    return profile.exec_time + load / num_samples, ram


@dataclass(frozen=True)
class OffloadingOption:
    option_id: int
    task_id: int
    server: int
    route: Route
    profile: ServiceProfile
    accuracy: float
    latency: float
    cpu_cost: float
    ram_cost: float
    bandwidth_cost: float
    gpu_cost: float
    utility: float = 0.0

    @property
    def on_device(self) -> bool:
        return self.route.hop_count == 0


@dataclass(frozen=True)
class NormalizationContext:
    latency_min: float
    latency_max: float
    accuracy_min: float
    accuracy_max: float

    @staticmethod
    def _scale(v, lo, hi):
        v = np.asarray(v, dtype=float)
        out = np.zeros_like(v) if hi <= lo else (v - lo) / (hi - lo)
        return out if out.ndim else float(out)

    def latency(self, v):
        return self._scale(v, self.latency_min, self.latency_max)

    def accuracy(self, v):
        return self._scale(v, self.accuracy_min, self.accuracy_max)

    def as_dict(self) -> dict:
        return {"latency_min": self.latency_min, "latency_max": self.latency_max,
                "accuracy_min": self.accuracy_min, "accuracy_max": self.accuracy_max}


def build_normalization(options) -> NormalizationContext:
    """Min-max statistics of latency and accuracy over the whole option universe."""
    if not options:
        raise ValueError("cannot normalise an empty option universe")
    lat = [o.latency for o in options]
    acc = [o.accuracy for o in options]
    return NormalizationContext(min(lat), max(lat), min(acc), max(acc))


def _check_lambda(lam: float) -> None:
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"lambda must lie in [0, 1], got {lam}")


def compute_utility(option: OffloadingOption, lam: float, norm: NormalizationContext) -> float:
    """Weighted latency/accuracy score; lower is better."""
    _check_lambda(lam)
    return lam * float(norm.latency(option.latency)) - (1.0 - lam) * float(norm.accuracy(option.accuracy))


def option_passes(task: Task, route: Route, profile: ServiceProfile, latency: float,
                  link_caps) -> bool:
    """The five admission predicates for a (task, route, profile) triple."""
    hops = route.hop_count
    if hops > profile.max_hop or hops > task.max_hop:
        return False
    if latency > task.max_latency or profile.accuracy < task.min_accuracy:
        return False
    if hops and profile.bandwidth_cost > min(link_caps[e] for e in route.links):
        return False
    return True


def enumerate_task_options(graph: NetworkGraph, profiles, task: Task, *, route_cap=DEFAULT_ROUTE_CAP,
                           adjacency=None, link_index=None) -> list[tuple]:
    """Admissible (server, route, profile, latency, ram) tuples for one task, in option-id order."""
    link_caps = [ln.bandwidth_capacity for ln in graph.links]
    routes = enumerate_routes(graph, task.source_sensor, task.max_hop, cap=route_cap,
                              adjacency=adjacency, link_index=link_index)
    out = []
    for dst, rlist in routes.items():
        server = graph.nodes[dst]
        for route in rlist:
            for prof in profiles.get(dst, ()):
                if prof.uses_gpu and not server.has_gpu:
                    continue
                lat, ram = effective_profile_metrics(prof, server, task.num_samples)
                if option_passes(task, route, prof, lat, link_caps):
                    out.append((dst, route, prof, lat, ram))
    return out


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    """Options, utilities and the resource model for one (scenario, lambda) pair."""

    scenario: Scenario
    lam: float
    options: tuple[OffloadingOption, ...]
    norm: NormalizationContext | None
    task_ptr: np.ndarray      # options of task i are task_ptr[i]:task_ptr[i+1]
    option_task: np.ndarray   # task index of every option
    utility: np.ndarray
    latency: np.ndarray
    accuracy: np.ndarray
    usage: sp.csc_matrix      # resources x options
    capacity: np.ndarray

    @property
    def graph(self) -> NetworkGraph:
        return self.scenario.graph

    @property
    def tasks(self) -> tuple[Task, ...]:
        return self.scenario.tasks

    @property
    def num_tasks(self) -> int:
        return len(self.task_ptr) - 1

    @property
    def num_options(self) -> int:
        return len(self.options)

    def task_options(self, i: int) -> range:
        return range(int(self.task_ptr[i]), int(self.task_ptr[i + 1]))

    # resource row layout
    def cpu_row(self, v: int) -> int:
        return v

    def ram_row(self, v: int) -> int:
        return self.graph.num_nodes + v

    def bw_row(self, e: int) -> int:
        return 2 * self.graph.num_nodes + e

    @property
    def gbw_row(self) -> int:
        return 2 * self.graph.num_nodes + len(self.graph.links)

    def resource_label(self, r: int) -> str:
        n = self.graph.num_nodes
        if r < n:
            return f"cpu[{r}]"
        if r < 2 * n:
            return f"ram[{r - n}]"
        if r < self.gbw_row:
            ln = self.graph.links[r - 2 * n]
            return f"bw[{ln.src}->{ln.dst}]"
        return "gbw"

    def with_lambda(self, lam: float) -> "ProblemInstance":
        """Same options and normalisation, utilities recomputed for ``lam``."""
        _check_lambda(lam)
        util = _utilities(self.latency, self.accuracy, lam, self.norm)
        opts = tuple(_replace_utility(o, u) for o, u in zip(self.options, util))
        return ProblemInstance(self.scenario, lam, opts, self.norm, self.task_ptr, self.option_task,
                               util, self.latency, self.accuracy, self.usage, self.capacity)


def _replace_utility(o: OffloadingOption, u: float) -> OffloadingOption:
    return OffloadingOption(o.option_id, o.task_id, o.server, o.route, o.profile, o.accuracy,
                            o.latency, o.cpu_cost, o.ram_cost, o.bandwidth_cost, o.gpu_cost, float(u))


def _utilities(lat, acc, lam, norm):
    if norm is None:
        return np.zeros(0)
    return lam * norm.latency(lat) - (1.0 - lam) * norm.accuracy(acc)


def build_instance(scenario: Scenario, lam: float = 0.5, *, route_cap: int = DEFAULT_ROUTE_CAP) -> ProblemInstance:
    """Enumerate every task's options and assemble the solver input."""
    _check_lambda(lam)
    graph = scenario.graph
    adj = graph.adjacency()
    lidx = graph.link_index()
    raw = []
    ptr = [0]
    empty = []
    for task in scenario.tasks:
        found = enumerate_task_options(graph, scenario.profiles, task, route_cap=route_cap,
                                       adjacency=adj, link_index=lidx)
        if not found:
            empty.append(task.id)
        raw.append((task, found))
        ptr.append(ptr[-1] + len(found))
    if empty:
        raise TaskInfeasibleError(empty)

    options = []
    for task, found in raw:
        for server, route, prof, lat, ram in found:
            options.append(OffloadingOption(
                option_id=len(options), task_id=task.id, server=server, route=route, profile=prof,
                accuracy=prof.accuracy, latency=lat, cpu_cost=prof.cpu_cost, ram_cost=ram,
                bandwidth_cost=prof.bandwidth_cost, gpu_cost=1.0 if prof.uses_gpu else 0.0,
            ))
    norm = build_normalization(options) if options else None
    lat = np.array([o.latency for o in options], dtype=float)
    acc = np.array([o.accuracy for o in options], dtype=float)
    util = _utilities(lat, acc, lam, norm)
    options = [_replace_utility(o, u) for o, u in zip(options, util)]

    n = graph.num_nodes
    n_res = 2 * n + len(graph.links) + 1
    gbw = n_res - 1
    rows, cols, vals = [], [], []
    for j, o in enumerate(options):
        entries = [(o.server, o.cpu_cost), (n + o.server, o.ram_cost)]
        entries += [(2 * n + e, o.bandwidth_cost) for e in o.route.links]
        if o.route.hop_count and o.bandwidth_cost:
            entries.append((gbw, o.bandwidth_cost * o.route.hop_count))
        for r, v in entries:
            if v:
                rows.append(r)
                cols.append(j)
                vals.append(v)
    usage = sp.csc_matrix((vals, (rows, cols)), shape=(n_res, len(options)))
    usage.sort_indices()
    cap = np.empty(n_res)
    cap[:n] = [v.cpu_capacity for v in graph.nodes]
    cap[n:2 * n] = [v.ram_capacity for v in graph.nodes]
    cap[2 * n:gbw] = [ln.bandwidth_capacity for ln in graph.links]
    cap[gbw] = graph.global_bandwidth_capacity
    option_task = np.repeat(np.arange(len(scenario.tasks)), np.diff(ptr)).astype(np.int64)
    return ProblemInstance(scenario, lam, tuple(options), norm, np.asarray(ptr, dtype=np.int64),
                           option_task, util, lat, acc, usage, cap)


def dump_options(instance: ProblemInstance, path) -> None:
    """Write the option universe and its normalisation statistics as JSON."""
    records = []
    for o in instance.options:
        records.append({
            "option_id": o.option_id, "task_id": o.task_id, "server": o.server,
            "route": list(o.route.nodes), "profile": o.profile.model_id, "uses_gpu": o.profile.uses_gpu,
            "accuracy": o.accuracy, "latency": o.latency, "cpu_cost": o.cpu_cost, "ram_cost": o.ram_cost,
            "bandwidth_cost": o.bandwidth_cost, "gpu_cost": o.gpu_cost, "utility": o.utility,
        })
    doc = {"lambda": instance.lam,
           "normalization": instance.norm.as_dict() if instance.norm else None,
           "options": records}
    Path(path).write_text(json.dumps(doc, indent=1))
