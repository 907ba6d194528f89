"""Versioned JSON documents for networks, task lists and full instances.

Floats are written with ``repr`` (shortest round-tripping form), so
``load(save(x)) == x`` holds bit for bit.  One document layout serves all
three uses; a network file simply has an empty ``tasks`` list.
"""
from __future__ import annotations

import json
from pathlib import Path

import jsonschema

from .network import (DeviceType, InvariantError, Link, NetworkGraph, Node, NodeKind, Scenario,
                      ServiceProfile, Task)

SCHEMA_VERSION = 1

_num = {"type": "number"}
_int = {"type": "integer"}
_bool = {"type": "boolean"}


def _obj(props: dict) -> dict:
    return {"type": "object", "required": sorted(props), "properties": props, "additionalProperties": False}


NODE_SCHEMA = _obj({"id": _int, "kind": {"enum": [k.value for k in NodeKind]}, "cpu_capacity": _num,
                    "ram_capacity": _num, "has_gpu": _bool, "group_id": _int})
LINK_SCHEMA = _obj({"src": _int, "dst": _int, "bandwidth_capacity": _num})
PROFILE_SCHEMA = _obj({"node": _int, "model_id": {"type": "string"}, "accuracy": _num, "exec_time": _num,
                       "load_time_cpu": _num, "load_time_gpu": _num, "uses_gpu": _bool, "max_hop": _int,
                       "cpu_cost": _num, "ram_cost_cpu": _num, "ram_cost_gpu": _num, "bandwidth_cost": _num,
                       "device_type": {"enum": [d.value for d in DeviceType]}})
TASK_SCHEMA = _obj({"id": _int, "source_sensor": _int, "min_accuracy": _num, "max_latency": _num,
                    "max_hop": _int, "num_samples": _int})

INSTANCE_SCHEMA = _obj({
    "version": _int,
    "seed": _int,
    "nodes": {"type": "array", "items": NODE_SCHEMA},
    "links": {"type": "array", "items": LINK_SCHEMA},
    "global_bandwidth_mbps": _num,
    "profiles": {"type": "array", "items": PROFILE_SCHEMA},
    "tasks": {"type": "array", "items": TASK_SCHEMA},
})

TASKS_SCHEMA = _obj({"version": _int, "seed": _int, "tasks": {"type": "array", "items": TASK_SCHEMA}})


class SchemaError(ValueError):
    """Document does not match the schema; ``path`` locates the offending field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


class VersionError(SchemaError):
    pass


class InstanceInvariantError(InvariantError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


def _path(parts) -> str:
    out = "$"
    for p in parts:
        out += f"[{p}]" if isinstance(p, int) else f".{p}"
    return out


def _validate(doc, schema) -> None:
    if isinstance(doc, dict) and "version" in doc and doc["version"] != SCHEMA_VERSION:
        raise VersionError("$.version", f"unsupported version {doc['version']!r}, expected {SCHEMA_VERSION}")
    err = jsonschema.exceptions.best_match(jsonschema.Draft7Validator(schema).iter_errors(doc))
    if err is None:
        return
    parts = list(err.absolute_path)
    if err.validator == "required":
        missing = [f for f in err.validator_value if f not in err.instance]
        parts.append(missing[0] if missing else "?")
        raise SchemaError(_path(parts), "required field is missing")
    raise SchemaError(_path(parts), err.message)


def _build(path: str, fn, **kw):
    try:
        return fn(**kw)
    except InvariantError as exc:
        raise InstanceInvariantError(path, str(exc)) from None


def _task_doc(t: Task) -> dict:
    return {"id": t.id, "source_sensor": t.source_sensor, "min_accuracy": t.min_accuracy,
            "max_latency": t.max_latency, "max_hop": t.max_hop, "num_samples": t.num_samples}


def _task(i: int, d: dict) -> Task:
    return _build(f"$.tasks[{i}]", Task, **d)


def scenario_to_dict(scenario: Scenario) -> dict:
    g = scenario.graph
    profiles = []
    for node in sorted(scenario.profiles):
        for p in scenario.profiles[node]:
            profiles.append({"node": node, "model_id": p.model_id, "accuracy": p.accuracy,
                             "exec_time": p.exec_time, "load_time_cpu": p.load_time_cpu,
                             "load_time_gpu": p.load_time_gpu, "uses_gpu": p.uses_gpu, "max_hop": p.max_hop,
                             "cpu_cost": p.cpu_cost, "ram_cost_cpu": p.ram_cost_cpu,
                             "ram_cost_gpu": p.ram_cost_gpu, "bandwidth_cost": p.bandwidth_cost,
                             "device_type": p.device_type.value})
    return {
        "version": SCHEMA_VERSION,
        "seed": scenario.seed,
        "nodes": [{"id": n.id, "kind": n.kind.value, "cpu_capacity": n.cpu_capacity,
                   "ram_capacity": n.ram_capacity, "has_gpu": n.has_gpu, "group_id": n.group_id}
                  for n in g.nodes],
        "links": [{"src": ln.src, "dst": ln.dst, "bandwidth_capacity": ln.bandwidth_capacity} for ln in g.links],
        "global_bandwidth_mbps": g.global_bandwidth_capacity,
        "profiles": profiles,
        "tasks": [_task_doc(t) for t in scenario.tasks],
    }


def scenario_from_dict(doc: dict) -> Scenario:
    _validate(doc, INSTANCE_SCHEMA)
    nodes = []
    for i, d in enumerate(doc["nodes"]):
        nodes.append(_build(f"$.nodes[{i}]", Node, **{**d, "kind": NodeKind(d["kind"])}))
    links = [_build(f"$.links[{i}]", Link, **d) for i, d in enumerate(doc["links"])]
    graph = _build("$", NetworkGraph, nodes=tuple(nodes), links=tuple(links),
                   global_bandwidth_capacity=doc["global_bandwidth_mbps"])
    profiles: dict[int, list] = {}
    for i, d in enumerate(doc["profiles"]):
        node = d["node"]
        if not 0 <= node < len(nodes):
            raise InstanceInvariantError(f"$.profiles[{i}].node", f"unknown node {node}")
        kw = {k: v for k, v in d.items() if k != "node"}
        kw["device_type"] = DeviceType(kw["device_type"])
        profiles.setdefault(node, []).append(_build(f"$.profiles[{i}]", ServiceProfile, **kw))
    tasks = tuple(_task(i, d) for i, d in enumerate(doc["tasks"]))
    _check_tasks(graph, tasks)
    return Scenario(graph, {k: tuple(v) for k, v in profiles.items()}, tasks, doc["seed"])


def _check_tasks(graph: NetworkGraph, tasks) -> None:
    for i, t in enumerate(tasks):
        if not 0 <= t.source_sensor < graph.num_nodes or graph.nodes[t.source_sensor].kind is not NodeKind.SENSOR:
            raise InstanceInvariantError(f"$.tasks[{i}].source_sensor", f"node {t.source_sensor} is not a sensor")


def _write(path, doc) -> None:
    path = Path(path)
    if not path.parent.is_dir():
        raise FileNotFoundError(f"directory {path.parent} does not exist")
    path.write_text(json.dumps(doc, indent=1) + "\n")


def _read(path):
    path = Path(path)
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError("$", f"{path} is not valid JSON: {exc}") from None


def save_scenario(path, scenario: Scenario) -> None:
    _write(path, scenario_to_dict(scenario))


def load_scenario(path) -> Scenario:
    return scenario_from_dict(_read(path))


def save_tasks(path, tasks, seed: int) -> None:
    _write(path, {"version": SCHEMA_VERSION, "seed": int(seed), "tasks": [_task_doc(t) for t in tasks]})


def load_tasks(path) -> tuple[Task, ...]:
    doc = _read(path)
    _validate(doc, TASKS_SCHEMA)
    return tuple(_task(i, d) for i, d in enumerate(doc["tasks"]))


def attach_tasks(scenario: Scenario, tasks) -> Scenario:
    tasks = tuple(tasks)
    _check_tasks(scenario.graph, tasks)
    return scenario.with_tasks(tasks)
