"""Experiment driver: instance sweeps, CSV emission and run manifests.

Seeds are split with ``numpy.random.SeedSequence``: the master seed spawns
one stream per instance, and each randomized scheduler draws from a stream
keyed by its own name, so adding or removing a scheduler leaves the others'
randomness untouched.
"""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import math
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from importlib import metadata
from pathlib import Path

import numpy as np
import yaml

from .assignment import Assignment, normalized_utility, verify_assignment
from .baselines import SCHEDULERS, greedy_t, greedy_t_multi, greedy_u, linear_relax, permutations, solve_exact
from .network import GeneratorConfig, generate_scenario, scale_cpu
from .options import ProblemInstance, build_instance
from .selr import SelrConfig, run_selr

KINDS = ("utility-vs-load", "pareto", "cpu-scaling", "runtime", "histogram")

RESULT_FIELDS = ("instance_id", "seed", "scheduler", "num_tasks", "lambda", "beta", "total_utility",
                 "normalized_utility", "avg_accuracy_percent", "avg_latency_s", "on_device_count",
                 "runtime_ms", "iterations", "fallback_used")

_AGG_METRICS = ("total_utility", "normalized_utility", "avg_accuracy_percent", "avg_latency_s",
                "on_device_count", "runtime_ms", "iterations")


class ConfigError(ValueError):
    pass


class RunError(RuntimeError):
    """A scheduler failed; carries the (instance, load, scheduler) context."""

    def __init__(self, instance_id, num_tasks, lam, beta, scheduler, cause: BaseException):
        super().__init__(f"instance {instance_id}, load {num_tasks}, lambda {lam}, beta {beta}, "
                         f"scheduler {scheduler}: {type(cause).__name__}: {cause}")
        self.context = dict(instance_id=instance_id, num_tasks=num_tasks, lam=lam, beta=beta, scheduler=scheduler)
        self.cause = cause


# -- configuration -----------------------------------------------------------

_DEFAULT_LOADS = {"utility-vs-load": (5, 10, 15, 25, 50, 75, 100), "pareto": (100,), "cpu-scaling": (30, 60, 90),
                  "runtime": (25, 50, 75, 100), "histogram": (100,)}
_DEFAULT_LAMBDAS = {"pareto": (0.1, 0.15, 0.4, 0.6, 0.8)}
_DEFAULT_BETAS = {"cpu-scaling": (0.5, 0.75, 1.0, 1.25, 1.5)}


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    num_nodes: int = 300
    availability: str = "standard"
    instances: int = 30
    loads: tuple[int, ...] = ()
    lambdas: tuple[float, ...] = ()
    betas: tuple[float, ...] = ()
    schedulers: tuple[str, ...] = SCHEDULERS
    seed: int = 0
    permutations: int = 100
    repeats: int = 3
    measure_runtime: bool = True
    node_limit: int | None = None
    workers: int = 1
    backend: str | None = None
    selr: dict = field(default_factory=dict)
    out_dir: str = "results"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"kind: unknown experiment {self.kind!r}, expected one of {KINDS}")
        fill = {"loads": _DEFAULT_LOADS[self.kind], "lambdas": _DEFAULT_LAMBDAS.get(self.kind, (0.5,)),
                "betas": _DEFAULT_BETAS.get(self.kind, (1.0,))}
        for name, default in fill.items():
            object.__setattr__(self, name, tuple(getattr(self, name)) or default)
        object.__setattr__(self, "schedulers", tuple(self.schedulers))
        if not self.schedulers:
            raise ConfigError("schedulers: must not be empty")
        for s in self.schedulers:
            if s not in SCHEDULERS:
                raise ConfigError(f"schedulers: unknown scheduler {s!r}")
        if len(set(self.schedulers)) != len(self.schedulers):
            raise ConfigError("schedulers: duplicates")
        if self.instances < 1:
            raise ConfigError("instances: must be >= 1")
        if any(int(n) != n or n < 0 for n in self.loads):
            raise ConfigError("loads: must be non-negative integers")
        if any(not 0 <= lam <= 1 for lam in self.lambdas):
            raise ConfigError("lambdas: every lambda must lie in [0, 1]")
        if any(not b > 0 for b in self.betas):
            raise ConfigError("betas: every beta must be positive")
        if self.permutations < 1 or self.repeats < 1 or self.workers < 1:
            raise ConfigError("permutations, repeats and workers must be >= 1")
        if self.node_limit is not None and self.node_limit < 1:
            raise ConfigError("node_limit: must be >= 1")
        if self.kind == "histogram" and "greedy-t-multi" not in self.schedulers:
            raise ConfigError("schedulers: the histogram experiment needs greedy-t-multi")
        try:
            GeneratorConfig.for_availability(self.availability, self.num_nodes)
            SelrConfig(**self.selr)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None

    @property
    def selr_config(self) -> SelrConfig:
        return SelrConfig(**self.selr)

    def as_dict(self) -> dict:
        d = dataclasses.asdict(self)
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return d

    def config_hash(self) -> str:
        blob = json.dumps(self.as_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def load_config(path, *, kind: str | None = None, out_dir: str | None = None) -> ExperimentConfig:
    """Read a YAML (or JSON) experiment file; ``kind``/``out_dir`` override the file."""
    try:
        doc = yaml.safe_load(Path(path).read_text()) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    names = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = sorted(set(doc) - names)
    if unknown:
        raise ConfigError(f"{path}: unknown field {unknown[0]!r}")
    if kind is not None:
        if "kind" in doc and doc["kind"] != kind:
            raise ConfigError(f"{path}: kind {doc['kind']!r} does not match subcommand {kind!r}")
        doc["kind"] = kind
    if out_dir is not None:
        doc["out_dir"] = str(out_dir)
    if "kind" not in doc:
        raise ConfigError(f"{path}: missing field 'kind'")
    return ExperimentConfig(**doc)


# -- seeds -------------------------------------------------------------------

def derive_seed(master: int, *key: int) -> int:
    state = np.random.SeedSequence(master, spawn_key=tuple(int(k) for k in key)).generate_state(2, np.uint32)
    return int(state[0]) << 31 | int(state[1]) >> 1


def scheduler_key(name: str) -> int:
    return zlib.crc32(name.encode())


def instance_seed(cfg: ExperimentConfig, instance_id: int) -> int:
    return derive_seed(cfg.seed, instance_id)


# -- records -----------------------------------------------------------------

@dataclass(frozen=True)
class ResultRecord:
    instance_id: int
    seed: int
    scheduler: str
    num_tasks: int
    lam: float
    beta: float
    total_utility: float
    normalized_utility: float | None
    avg_accuracy_percent: float
    avg_latency_s: float
    on_device_count: int
    runtime_ms: float | None
    iterations: int | None
    fallback_used: bool

    def __post_init__(self):
        if self.runtime_ms is not None and self.runtime_ms < 0:
            raise ValueError("runtime_ms must be non-negative")

    def row(self) -> list:
        return [self.instance_id, self.seed, self.scheduler, self.num_tasks, _fmt(self.lam), _fmt(self.beta),
                _fmt(self.total_utility), _fmt(self.normalized_utility), _fmt(self.avg_accuracy_percent),
                _fmt(self.avg_latency_s), self.on_device_count, _fmt(self.runtime_ms),
                "" if self.iterations is None else self.iterations, int(self.fallback_used)]

    def key(self):
        return (self.instance_id, self.beta, self.num_tasks, self.lam, SCHEDULERS.index(self.scheduler))


def _fmt(v) -> str:
    if v is None:
        return ""
    return repr(float(v))


@dataclass(frozen=True)
class RunFailure:
    instance_id: int
    num_tasks: int
    lam: float
    beta: float
    scheduler: str
    error: str


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    records: list[ResultRecord]
    failures: list[RunFailure]
    seeds: list[int]
    histograms: list[tuple] = field(default_factory=list)  # (instance_id, num_tasks, lam, k, utility)

    @property
    def ok(self) -> bool:
        return not self.failures


# -- scheduler dispatch ------------------------------------------------------

def run_scheduler(instance: ProblemInstance, name: str, *, seed: int = 0, permutations_m: int = 100,
                  selr_config: SelrConfig | None = None, node_limit: int | None = None, backend=None) -> Assignment:
    """Solve with one of ``SCHEDULERS``; ``seed`` drives the randomized greedy variants."""
    if name == "optimal":
        return solve_exact(instance, node_limit=node_limit, backend=backend)
    if name == "selr":
        return run_selr(instance, selr_config, backend=backend)
    if name == "linear-relax":
        return linear_relax(instance, backend=backend)
    if name == "greedy-u":
        return greedy_u(instance, backend=backend)
    if name == "greedy-t":
        return greedy_t(instance, permutations(instance.num_tasks, 1, seed)[0], backend=backend)
    if name == "greedy-t-multi":
        return greedy_t_multi(instance, permutations_m, seed, backend=backend)
    raise ValueError(f"unknown scheduler {name!r}")


def _timed(instance, name, cfg: ExperimentConfig, seed: int) -> Assignment:
    kw = dict(seed=seed, permutations_m=cfg.permutations, selr_config=cfg.selr_config,
              node_limit=cfg.node_limit, backend=cfg.backend)
    a = run_scheduler(instance, name, **kw)
    if cfg.kind == "runtime" and cfg.repeats > 1:
        times = [a.runtime_ms] + [run_scheduler(instance, name, **kw).runtime_ms for _ in range(cfg.repeats - 1)]
        a = dataclasses.replace(a, runtime_ms=float(np.median(times)))
    return a


def _run_instance(cfg: ExperimentConfig, instance_id: int):
    """Every (beta, load, lambda, scheduler) combination on one network instance."""
    if cfg.measure_runtime and cfg.workers > 1 and instance_id < cfg.workers:
        _warm_up(cfg)
    seed = instance_seed(cfg, instance_id)
    gen = GeneratorConfig.for_availability(cfg.availability, cfg.num_nodes, seed)
    base = generate_scenario(gen, max(cfg.loads))
    records, failures, hist = [], [], []
    for beta in cfg.betas:
        scen = base if beta == 1.0 else base.with_graph(scale_cpu(base.graph, beta))
        for load in cfg.loads:
            sub = scen.with_tasks(scen.tasks[:load])  # prefix: load N is nested in load N+1
            for lam in cfg.lambdas:
                try:
                    inst = build_instance(sub, lam)
                except Exception as exc:
                    failures += [RunFailure(instance_id, load, lam, beta, s, f"{type(exc).__name__}: {exc}")
                                 for s in cfg.schedulers]
                    continue
                exact = None
                order = sorted(cfg.schedulers, key=lambda s: s != "optimal")  # exact first, for normalization
                done = {}
                for name in order:
                    try:
                        a = _timed(inst, name, cfg, derive_seed(seed, scheduler_key(name)))
                        verify_assignment(inst, a)
                    except Exception as exc:
                        failures.append(RunFailure(instance_id, load, lam, beta, name,
                                                   f"{type(exc).__name__}: {exc}"))
                        continue
                    if name == "optimal":
                        exact = a
                    done[name] = a
                for name, a in done.items():
                    norm = normalized_utility(a.total_utility, exact.total_utility) if exact else None
                    if norm is not None and math.isnan(norm):
                        norm = None
                    records.append(ResultRecord(
                        instance_id, seed, name, load, lam, beta, a.total_utility, norm, a.avg_accuracy,
                        a.avg_latency, a.on_device_count, a.runtime_ms if cfg.measure_runtime else None,
                        a.iterations_used if name == "selr" else None, a.fallback_used))
                    if name == "greedy-t-multi" and cfg.kind == "histogram":
                        hist += [(instance_id, load, lam, beta, k, u, exact.total_utility if exact else None)
                                 for k, u in enumerate(a.extras["utilities"])]
    return records, failures, hist


def _warm_up(cfg: ExperimentConfig) -> None:
    """Load compiled kernels before the clock starts, so the first run is not charged for it."""
    scen = generate_scenario(GeneratorConfig(num_nodes=30, seed=0), 5)
    inst = build_instance(scen, 0.5)
    for name in cfg.schedulers:
        run_scheduler(inst, name, permutations_m=2, selr_config=cfg.selr_config, backend=cfg.backend)


def run_experiment(cfg: ExperimentConfig, *, strict: bool = True) -> ExperimentResult:
    """Run all instances; with ``strict`` the first failure is raised as ``RunError``."""
    ids = list(range(cfg.instances))
    if cfg.measure_runtime and cfg.workers == 1:
        _warm_up(cfg)
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            parts = list(pool.map(_run_instance, [cfg] * len(ids), ids))
    else:
        parts = [_run_instance(cfg, i) for i in ids]
    records = sorted((r for p in parts for r in p[0]), key=ResultRecord.key)
    failures = [f for p in parts for f in p[1]]
    hist = sorted(h for p in parts for h in p[2])
    if strict and failures:
        f = failures[0]
        raise RunError(f.instance_id, f.num_tasks, f.lam, f.beta, f.scheduler, RuntimeError(f.error))
    return ExperimentResult(cfg, records, failures, [instance_seed(cfg, i) for i in ids], hist)


def _kind(cfg: ExperimentConfig, kind: str) -> ExperimentConfig:
    if cfg.kind != kind:
        raise ConfigError(f"expected a {kind} config, got {cfg.kind}")
    return cfg


def run_utility_vs_load(cfg: ExperimentConfig, **kw) -> ExperimentResult:
    return run_experiment(_kind(cfg, "utility-vs-load"), **kw)


def run_pareto_sweep(cfg: ExperimentConfig, **kw) -> ExperimentResult:
    return run_experiment(_kind(cfg, "pareto"), **kw)


def run_cpu_scaling(cfg: ExperimentConfig, **kw) -> ExperimentResult:
    return run_experiment(_kind(cfg, "cpu-scaling"), **kw)


def run_runtime_bench(cfg: ExperimentConfig, **kw) -> ExperimentResult:
    return run_experiment(_kind(cfg, "runtime"), **kw)


def run_histogram(cfg: ExperimentConfig, **kw) -> ExperimentResult:
    return run_experiment(_kind(cfg, "histogram"), **kw)


# -- aggregation and emission ------------------------------------------------

def aggregate(records, by=("scheduler", "num_tasks", "lam", "beta")) -> list[dict]:
    """Mean and population std of each metric per group (blank values are skipped)."""
    groups: dict[tuple, list[ResultRecord]] = {}
    for r in records:
        groups.setdefault(tuple(getattr(r, k) for k in by), []).append(r)
    out = []
    for key in sorted(groups, key=lambda k: tuple((SCHEDULERS.index(v) if isinstance(v, str) else v) for v in k)):
        rows = groups[key]
        d = dict(zip(by, key))
        d["count"] = len(rows)
        for m in _AGG_METRICS:
            vals = [float(getattr(r, m)) for r in rows if getattr(r, m) is not None]
            d[f"{m}_mean"] = float(np.mean(vals)) if vals else None
            d[f"{m}_std"] = float(np.std(vals)) if vals else None
        out.append(d)
    return out


def runtime_table(records) -> tuple[list[str], list[list]]:
    """One row per scheduler, mean runtime per load."""
    loads = sorted({r.num_tasks for r in records})
    header = ["scheduler"] + [f"T={n}" for n in loads]
    rows = []
    for s in SCHEDULERS:
        cells = []
        for n in loads:
            v = [r.runtime_ms for r in records if r.scheduler == s and r.num_tasks == n and r.runtime_ms is not None]
            cells.append(_fmt(np.mean(v)) if v else "")
        if any(cells):
            rows.append([s] + cells)
    return header, rows


def _write_csv(path: Path, header, rows) -> None:
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def tool_version() -> str:
    try:
        return metadata.version("edgeoffload")
    except metadata.PackageNotFoundError:  # pragma: no cover
        return "unknown"


def emit_outputs(result: ExperimentResult, out_dir=None) -> dict[str, Path]:
    """Write results, aggregates and the manifest; returns the paths by role."""
    if not result.records and not result.failures:
        raise ValueError("nothing to emit")
    out = Path(out_dir or result.config.out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    paths = {"results": out / "results.csv", "aggregates": out / "aggregates.csv", "manifest": out / "manifest.json"}
    _write_csv(paths["results"], RESULT_FIELDS, [r.row() for r in result.records])
    agg = aggregate(result.records)
    agg_header = ["scheduler", "num_tasks", "lambda", "beta", "count"] + [
        f"{m}_{s}" for m in _AGG_METRICS for s in ("mean", "std")]
    _write_csv(paths["aggregates"], agg_header,
               [[d["scheduler"], d["num_tasks"], _fmt(d["lam"]), _fmt(d["beta"]), d["count"]]
                + [_fmt(d[f"{m}_{s}"]) for m in _AGG_METRICS for s in ("mean", "std")] for d in agg])
    if result.config.kind == "runtime":
        paths["runtime_table"] = out / "runtime_table.csv"
        _write_csv(paths["runtime_table"], *runtime_table(result.records))
    if result.config.kind == "histogram":
        paths["histogram"] = out / "histogram.csv"
        _write_csv(paths["histogram"], ["instance_id", "num_tasks", "lambda", "beta", "permutation",
                                        "total_utility", "normalized_utility"],
                   [[i, n, _fmt(lam), _fmt(b), k, _fmt(u),
                     _fmt(None if opt is None else normalized_utility(u, opt))]
                    for i, n, lam, b, k, u, opt in result.histograms])
    if result.failures:
        paths["failures"] = out / "failures.csv"
        _write_csv(paths["failures"], ["instance_id", "num_tasks", "lambda", "beta", "scheduler", "error"],
                   [[f.instance_id, f.num_tasks, _fmt(f.lam), _fmt(f.beta), f.scheduler, f.error]
                    for f in result.failures])
    manifest = {
        "tool": "edgeoffload", "version": tool_version(), "kind": result.config.kind,
        "config": result.config.as_dict(), "config_hash": result.config.config_hash(),
        "master_seed": result.config.seed, "instance_seeds": result.seeds,
        "scheduler_seed_keys": {s: scheduler_key(s) for s in result.config.schedulers},
        "records": len(result.records), "failures": len(result.failures),
        "files": sorted(p.name for k, p in paths.items() if k != "manifest"),
    }
    paths["manifest"].write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    return paths
