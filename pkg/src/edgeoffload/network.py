"""Network, service-profile and task data model plus the random instance generator.

Units: CPU in MIPS, RAM in MB (1 GB = 1000 MB), bandwidth in Mbps, times in
seconds.  Randomness comes from one ``numpy.random.SeedSequence`` per instance
with fixed spawn keys, so each sub-stream (topology, capacities, profiles,
tasks) is independent of the others.
"""
from __future__ import annotations

import dataclasses
import enum
from dataclasses import dataclass

import numpy as np

# sub-stream spawn keys
_TOPOLOGY, _CAPACITY, _PROFILES, _TASKS = 0, 1, 2, 3

SENSOR_CPU_MIPS = 2000.0
SERVER_CPU_MIPS = 6000.0
SENSOR_RAM_MB = (2800.0, 2900.0)
LINK_MBPS = 7.0
GLOBAL_MBPS = 9000.0


class NodeKind(str, enum.Enum):
    SENSOR = "sensor"
    CORE = "core"
    EDGE = "edge"

    @property
    def is_server(self) -> bool:
        return self is not NodeKind.SENSOR


class DeviceType(str, enum.Enum):
    SENSOR = "sensor"
    SERVER = "server"


class InvariantError(ValueError):
    """A model object violates one of its structural invariants."""


@dataclass(frozen=True)
class Node:
    id: int
    kind: NodeKind
    cpu_capacity: float
    ram_capacity: float
    has_gpu: bool
    group_id: int

    def __post_init__(self):
        if not self.cpu_capacity > 0 or not self.ram_capacity > 0:
            raise InvariantError(f"node {self.id}: capacities must be positive")
        if self.kind is NodeKind.SENSOR and self.has_gpu:
            raise InvariantError(f"node {self.id}: sensors cannot have a GPU")
        if self.kind is NodeKind.CORE and not self.has_gpu:
            raise InvariantError(f"node {self.id}: core servers always have a GPU")


@dataclass(frozen=True)
class Link:
    src: int
    dst: int
    bandwidth_capacity: float

    def __post_init__(self):
        if self.src == self.dst:
            raise InvariantError(f"self-loop on node {self.src}")
        if not self.bandwidth_capacity > 0:
            raise InvariantError(f"link {self.src}->{self.dst}: bandwidth must be positive")


@dataclass(frozen=True)
class ServiceProfile:
    model_id: str
    accuracy: float
    exec_time: float
    load_time_cpu: float
    load_time_gpu: float
    uses_gpu: bool
    max_hop: int
    cpu_cost: float
    ram_cost_cpu: float
    ram_cost_gpu: float
    bandwidth_cost: float
    device_type: DeviceType

    def __post_init__(self):
        if not 0 < self.accuracy <= 100:
            raise InvariantError(f"{self.model_id}: accuracy {self.accuracy} outside (0, 100]")
        costs = (self.exec_time, self.load_time_cpu, self.load_time_gpu, self.cpu_cost,
                 self.ram_cost_cpu, self.ram_cost_gpu, self.bandwidth_cost, self.max_hop)
        if min(costs) < 0:
            raise InvariantError(f"{self.model_id}: negative cost")
        if self.device_type is DeviceType.SENSOR and (self.max_hop != 0 or self.bandwidth_cost != 0):
            raise InvariantError(f"{self.model_id}: sensor profiles must have max_hop 0 and no bandwidth")


@dataclass(frozen=True)
class Task:
    id: int
    source_sensor: int
    min_accuracy: float
    max_latency: float
    max_hop: int = 2
    num_samples: int = 5000

    def __post_init__(self):
        if not 0 < self.min_accuracy <= 100:
            raise InvariantError(f"task {self.id}: min_accuracy outside (0, 100]")
        if not self.max_latency > 0:
            raise InvariantError(f"task {self.id}: max_latency must be positive")
        if self.max_hop < 0 or self.num_samples < 1:
            raise InvariantError(f"task {self.id}: bad max_hop / num_samples")


@dataclass(frozen=True)
class NetworkGraph:
    nodes: tuple[Node, ...]
    links: tuple[Link, ...]
    global_bandwidth_capacity: float = GLOBAL_MBPS

    def __post_init__(self):
        ids = [n.id for n in self.nodes]
        if ids != list(range(len(ids))):
            raise InvariantError("node ids must be 0..N-1 in order")
        if not self.global_bandwidth_capacity > 0:
            raise InvariantError("global_bandwidth_capacity must be positive")
        seen = set()
        for ln in self.links:
            if not (0 <= ln.src < len(ids) and 0 <= ln.dst < len(ids)):
                raise InvariantError(f"link {ln.src}->{ln.dst} references an unknown node")
            if (ln.src, ln.dst) in seen:
                raise InvariantError(f"duplicate link {ln.src}->{ln.dst}")
            seen.add((ln.src, ln.dst))

    @property
    def num_nodes(self) -> int:
        return len(self.nodes)

    def sensors(self) -> list[int]:
        return [n.id for n in self.nodes if n.kind is NodeKind.SENSOR]

    def servers(self) -> list[int]:
        return [n.id for n in self.nodes if n.kind.is_server]

    def adjacency(self) -> list[list[int]]:
        """Sorted out-neighbour lists."""
        adj: list[list[int]] = [[] for _ in self.nodes]
        for ln in self.links:
            adj[ln.src].append(ln.dst)
        for a in adj:
            a.sort()
        return adj

    def link_index(self) -> dict[tuple[int, int], int]:
        return {(ln.src, ln.dst): i for i, ln in enumerate(self.links)}

    def check_invariants(self) -> None:
        """Topology invariants of generated graphs (raises InvariantError)."""
        kinds = [n.kind for n in self.nodes]
        pairs = {(ln.src, ln.dst) for ln in self.links}
        for a, b in pairs:
            if (b, a) not in pairs:
                raise InvariantError(f"link {a}->{b} has no reverse")
            if kinds[a] is NodeKind.SENSOR and kinds[b] is NodeKind.SENSOR:
                raise InvariantError(f"sensor-sensor link {a}->{b}")
        adj = self.adjacency()
        for n in self.nodes:
            if n.kind is NodeKind.SENSOR and not any(kinds[d] is NodeKind.EDGE for d in adj[n.id]):
                raise InvariantError(f"sensor {n.id} has no edge-server neighbour")
        cores = [n.id for n in self.nodes if n.kind is NodeKind.CORE]
        for a in cores:
            for b in cores:
                if a != b and (a, b) not in pairs:
                    raise InvariantError(f"core servers {a},{b} not connected")
        if not is_strongly_connected(self):
            raise InvariantError("graph is not strongly connected")


def is_strongly_connected(graph: NetworkGraph) -> bool:
    n = graph.num_nodes
    if n == 0:
        return True
    fwd = graph.adjacency()
    rev: list[list[int]] = [[] for _ in range(n)]
    for ln in graph.links:
        rev[ln.dst].append(ln.src)

    def reach(adj):
        seen = np.zeros(n, dtype=bool)
        seen[0] = True
        stack = [0]
        while stack:
            u = stack.pop()
            for v in adj[u]:
                if not seen[v]:
                    seen[v] = True
                    stack.append(v)
        return bool(seen.all())

    return reach(fwd) and reach(rev)


@dataclass(frozen=True)
class GeneratorConfig:
    num_nodes: int = 300
    core_fraction_range: tuple[float, float] = (0.05, 0.10)
    edge_fraction_range: tuple[float, float] = (0.20, 0.30)
    sensor_to_core_probability: float = 0.10
    edge_gpu_probability: float = 0.50
    seed: int = 0

    def __post_init__(self):
        if self.num_nodes < 10:
            raise ValueError("num_nodes must be at least 10")
        for name in ("core_fraction_range", "edge_fraction_range"):
            lo, hi = getattr(self, name)
            if not 0 <= lo <= hi <= 1:
                raise ValueError(f"{name} must satisfy 0 <= lo <= hi <= 1, got {(lo, hi)}")
        if self.core_fraction_range[1] + self.edge_fraction_range[1] >= 1:
            raise ValueError("core and edge fractions must sum below 1")
        for name in ("sensor_to_core_probability", "edge_gpu_probability"):
            if not 0 <= getattr(self, name) <= 1:
                raise ValueError(f"{name} must lie in [0, 1]")

    @classmethod
    def for_availability(cls, mode: str, num_nodes: int = 300, seed: int = 0) -> "GeneratorConfig":
        if mode == "standard":
            return cls(num_nodes=num_nodes, seed=seed)
        if mode == "richer":
            return cls(num_nodes=num_nodes, edge_fraction_range=(0.30, 0.40), seed=seed)
        raise ValueError(f"unknown server availability {mode!r}")


def substream(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


def _count(rng: np.random.Generator, n: int, frac: tuple[float, float]) -> int:
    lo = int(np.ceil(frac[0] * n - 1e-9))
    hi = int(np.floor(frac[1] * n + 1e-9))
    return max(1, int(rng.integers(lo, hi + 1)) if hi >= lo else lo)


def generate_topology(config: GeneratorConfig) -> NetworkGraph:
    """Hierarchical topology: core clique, edge groups around each core, sensors below."""
    n = config.num_nodes
    rng = substream(config.seed, _TOPOLOGY)
    n_core = _count(rng, n, config.core_fraction_range)
    n_edge = _count(rng, n, config.edge_fraction_range)
    n_sensor = n - n_core - n_edge
    if n_sensor < 1:
        raise ValueError("no room left for sensors")

    cores = list(range(n_core))
    edges = list(range(n_core, n_core + n_edge))
    sensors = list(range(n_core + n_edge, n))
    group = np.empty(n, dtype=np.int64)
    group[cores] = cores
    for k, e in enumerate(edges):
        group[e] = k % n_core
    edge_gpu = rng.random(n_edge) < config.edge_gpu_probability

    pairs: set[tuple[int, int]] = set()

    def connect(a, b):
        pairs.add((a, b))
        pairs.add((b, a))

    for i, a in enumerate(cores):
        for b in cores[i + 1:]:
            connect(a, b)
    for c in cores:
        members = [c] + [e for e in edges if group[e] == c]
        for i, a in enumerate(members):
            for b in members[i + 1:]:
                connect(a, b)
    attach = rng.integers(0, n_edge, size=n_sensor)
    to_core = rng.random(n_sensor) < config.sensor_to_core_probability
    for s, e_idx, c_flag in zip(sensors, attach, to_core):
        e = edges[int(e_idx)]
        group[s] = group[e]
        connect(s, e)
        if c_flag:
            connect(s, int(group[e]))

    cap = substream(config.seed, _CAPACITY)
    sensor_ram = cap.choice(np.asarray(SENSOR_RAM_MB), size=n_sensor)
    n_low = int(round(0.25 * n_core))
    low_ram_cores = set(cap.choice(n_core, size=n_low, replace=False).tolist()) if n_low else set()
    server_ram = cap.uniform(15000.0, 15300.0, size=n_core + n_edge)
    low_ram = 13000.0 + cap.uniform(100.0, 1000.0, size=n_core)

    nodes = []
    for v in range(n):
        if v < n_core:
            ram = low_ram[v] if v in low_ram_cores else server_ram[v]
            nodes.append(Node(v, NodeKind.CORE, SERVER_CPU_MIPS, float(ram), True, v))
        elif v < n_core + n_edge:
            nodes.append(Node(v, NodeKind.EDGE, SERVER_CPU_MIPS, float(server_ram[v]),
                              bool(edge_gpu[v - n_core]), int(group[v])))
        else:
            nodes.append(Node(v, NodeKind.SENSOR, SENSOR_CPU_MIPS,
                              float(sensor_ram[v - n_core - n_edge]), False, int(group[v])))
    links = tuple(Link(a, b, LINK_MBPS) for a, b in sorted(pairs))
    return NetworkGraph(tuple(nodes), links, GLOBAL_MBPS)


# Server model families: accuracy range, cpu choices, exec, load-cpu, load-gpu,
# ram-cpu, ram-gpu ranges.
SERVER_MODELS = {
    "M_1": ((66, 72), (4500,), (0.039, 0.161), (3.63, 5.02), (0.031, 0.048), (2853, 2900), (206, 309)),
    "M_2": ((63, 69), (4000,), (0.042, 0.134), (3.52, 4.14), (0.030, 0.073), (2854, 2922), (193, 347)),
    "M_3": ((62, 69), (3500,), (0.047, 0.157), (3.34, 3.97), (0.028, 0.077), (2855, 2867), (190, 290)),
    "M_4": ((57, 63), (3000,), (0.048, 0.161), (3.35, 4.23), (0.025, 0.062), (2854, 2910), (180, 212)),
    "M_5": ((50, 56), (2500, 4500), (0.048, 0.155), (3.66, 3.98), (0.023, 0.064), (2851, 2869), (177, 194)),
    "M_6": ((47, 52), (2000, 4000), (0.057, 0.147), (3.41, 4.16), (0.024, 0.071), (2854, 2869), (180, 202)),
    "M_7": ((45, 51), (4500, 3500), (0.039, 0.159), (3.68, 4.06), (0.022, 0.068), (2857, 2876), (179, 190)),
}
SERVER_BANDWIDTH_MBPS = 5.0

# Sensor models: accuracy, exec, load, ram.  Sensors have no GPU, so the single
# load/RAM figure is used for both the CPU and GPU columns.
SENSOR_MODELS = {
    "M_8": (72, 0.123, 0.15, 461),
    "M_9": (70, 0.138, 0.16, 464),
    "M_10": (69, 0.105, 0.14, 448),
    "M_11": (63, 0.087, 0.10, 441),
    "M_12": (56, 0.064, 0.11, 427),
    "M_13": (52, 0.076, 0.12, 434),
    "M_14": (51, 0.064, 0.10, 439),
}
SENSOR_PROFILE_CPU = 1000.0


def sensor_profiles() -> tuple[ServiceProfile, ...]:
    return tuple(
        ServiceProfile(name, float(acc), ex, ld, ld, False, 0, SENSOR_PROFILE_CPU,
                       float(ram), float(ram), 0.0, DeviceType.SENSOR)
        for name, (acc, ex, ld, ram) in SENSOR_MODELS.items()
    )


def generate_profiles(graph: NetworkGraph, seed: int) -> dict[int, tuple[ServiceProfile, ...]]:
    """Attach all seven server families to every server and all sensor families to every sensor.

    Server profile values (and the GPU flag) are drawn per (server, family).
    """
    rng = substream(seed, _PROFILES)
    on_sensor = sensor_profiles()
    out: dict[int, tuple[ServiceProfile, ...]] = {}
    for node in graph.nodes:
        if node.kind is NodeKind.SENSOR:
            out[node.id] = on_sensor
            continue
        profs = []
        for name, (acc, cpus, ex, ldc, ldg, rc, rg) in SERVER_MODELS.items():
            gpu = bool(rng.random() < 0.5) and node.has_gpu
            cpu = float(cpus[int(rng.integers(len(cpus)))]) if len(cpus) > 1 else float(cpus[0])
            profs.append(ServiceProfile(
                model_id=name,
                accuracy=float(rng.uniform(*acc)),
                exec_time=float(rng.uniform(*ex)),
                load_time_cpu=float(rng.uniform(*ldc)),
                load_time_gpu=float(rng.uniform(*ldg)),
                uses_gpu=gpu,
                max_hop=2,
                cpu_cost=cpu,
                ram_cost_cpu=float(rng.uniform(*rc)),
                ram_cost_gpu=float(rng.uniform(*rg)),
                bandwidth_cost=SERVER_BANDWIDTH_MBPS,
                device_type=DeviceType.SERVER,
            ))
        out[node.id] = tuple(profs)
    return out


def generate_tasks(graph: NetworkGraph, max_tasks: int, seed: int) -> list[Task]:
    """Tasks on a fixed random ordering of the sensors.

    Each task's requirements come from its own spawned stream, so the list for
    ``max_tasks = N`` is always a prefix of the list for ``N + 1``.
    """
    sensors = graph.sensors()
    if max_tasks < 0:
        raise ValueError("max_tasks must be non-negative")
    if max_tasks > len(sensors):
        raise ValueError(f"graph has {len(sensors)} sensors, cannot place {max_tasks} tasks")
    order = substream(seed, _TASKS).permutation(len(sensors))
    tasks = []
    for i in range(max_tasks):
        r = substream(seed, _TASKS, i)
        acc = float(np.clip(r.normal(60.0, 0.1), np.nextafter(0.0, 1.0), 100.0))
        lat = float(max(r.normal(1.0, 0.1), 1e-9))
        tasks.append(Task(i, sensors[int(order[i])], acc, lat, 2, 5000))
    return tasks


def scale_cpu(graph: NetworkGraph, beta: float) -> NetworkGraph:
    """Copy of ``graph`` with every server's CPU capacity multiplied by ``beta``."""
    if not beta > 0:
        raise ValueError("beta must be positive")
    nodes = tuple(
        dataclasses.replace(n, cpu_capacity=n.cpu_capacity * beta) if n.kind.is_server else n
        for n in graph.nodes
    )
    return dataclasses.replace(graph, nodes=nodes)


@dataclass(frozen=True)
class Scenario:
    """Everything needed to pose an offloading problem: network, profiles and tasks."""

    graph: NetworkGraph
    profiles: dict[int, tuple[ServiceProfile, ...]]
    tasks: tuple[Task, ...] = ()
    seed: int = 0

    def with_tasks(self, tasks) -> "Scenario":
        return dataclasses.replace(self, tasks=tuple(tasks))

    def with_graph(self, graph: NetworkGraph) -> "Scenario":
        return dataclasses.replace(self, graph=graph)


def generate_scenario(config: GeneratorConfig, num_tasks: int = 0, task_seed: int | None = None) -> Scenario:
    graph = generate_topology(config)
    profiles = generate_profiles(graph, config.seed)
    tseed = config.seed if task_seed is None else task_seed
    return Scenario(graph, profiles, tuple(generate_tasks(graph, num_tasks, tseed)), config.seed)


__all__ = [
    "NodeKind", "DeviceType", "InvariantError", "Node", "Link", "ServiceProfile", "Task",
    "NetworkGraph", "GeneratorConfig", "Scenario", "generate_topology", "generate_profiles",
    "generate_tasks", "generate_scenario", "scale_cpu", "sensor_profiles", "is_strongly_connected",
    "substream",
]
