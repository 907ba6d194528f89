import csv
import json

import pytest

from edgeoffload.cli import main
from edgeoffload.serialization import load_scenario, load_tasks


@pytest.fixture(scope="module")
def files(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    net, tasks = d / "net.json", d / "tasks.json"
    assert main(["gen-network", "--nodes", "60", "--seed", "4", "--out", str(net)]) == 0
    assert main(["gen-tasks", "--network", str(net), "--count", "12", "--seed", "1", "--out", str(tasks)]) == 0
    return d, net, tasks


def test_generated_files_load(files):
    _, net, tasks = files
    scen = load_scenario(net)
    assert scen.graph.num_nodes == 60 and scen.tasks == ()
    assert len(load_tasks(tasks)) == 12


@pytest.mark.parametrize("scheduler", ["optimal", "selr", "linear-relax", "greedy-u", "greedy-t", "greedy-t-multi"])
def test_solve_every_scheduler(files, scheduler):
    d, net, tasks = files
    out = d / f"{scheduler}.json"
    assert main(["solve", "--scheduler", scheduler, "--network", str(net), "--tasks", str(tasks),
                 "--normalize", "--permutations", "5", "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["scheduler"] == scheduler and len(doc["assignment"]) == 12
    assert 0 < doc["normalized_utility"] <= 1.0 + 1e-12
    for a in doc["assignment"]:
        assert a["route"][-1] == a["server"]


def test_solve_artifacts(files):
    d, net, tasks = files
    base = ["solve", "--network", str(net), "--tasks", str(tasks), "--out", str(d / "x.json")]
    assert main(base + ["--scheduler", "selr", "--trace", str(d / "trace.jsonl"),
                        "--dump-options", str(d / "opts.json"), "--dump-lp", str(d / "lp.txt")]) == 0
    lines = [json.loads(x) for x in (d / "trace.jsonl").read_text().splitlines()]
    assert lines[0]["k"] == 1 and lines[0]["warm_start"] is True
    assert json.loads((d / "opts.json").read_text())["options"]
    assert (d / "lp.txt").read_text().startswith("minimize")
    assert main(base + ["--scheduler", "greedy-t-multi", "--permutations", "4",
                        "--utility-histogram", str(d / "hist.csv")]) == 0
    with open(d / "hist.csv") as fh:
        assert len(list(csv.reader(fh))) == 5


def test_solve_stdout(files, capsys):
    _, net, tasks = files
    assert main(["solve", "--scheduler", "greedy-u", "--network", str(net), "--tasks", str(tasks)]) == 0
    assert json.loads(capsys.readouterr().out)["normalized_utility"] is None


def test_input_errors_exit_2(files, tmp_path, capsys):
    d, net, tasks = files
    assert main(["solve", "--scheduler", "greedy-u", "--network", str(net), "--tasks", str(tasks),
                 "--trace", str(tmp_path / "t")]) == 2
    assert "--trace" in capsys.readouterr().err
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"version": 1}))
    assert main(["solve", "--scheduler", "greedy-u", "--network", str(bad), "--tasks", str(tasks)]) == 2
    assert main(["solve", "--scheduler", "greedy-u", "--network", str(tmp_path / "nope.json"),
                 "--tasks", str(tasks)]) == 2
    assert main(["solve", "--scheduler", "selr", "--network", str(net), "--tasks", str(tasks), "--gamma", "0"]) == 2
    with pytest.raises(SystemExit):
        main(["solve", "--scheduler", "quantum"])


def test_infeasible_exit_1(files, tmp_path):
    _, net, tasks = files
    doc = json.loads(tasks.read_text())
    for t in doc["tasks"]:
        t["min_accuracy"] = 100.0
    strict = tmp_path / "strict.json"
    strict.write_text(json.dumps(doc))
    assert main(["solve", "--scheduler", "optimal", "--network", str(net), "--tasks", str(strict)]) == 1


def test_experiment(tmp_path):
    cfg = tmp_path / "cfg.yaml"
    cfg.write_text("num_nodes: 40\ninstances: 1\nloads: [3]\nmeasure_runtime: false\n"
                   "schedulers: [optimal, greedy-u]\n")
    assert main(["experiment", "utility-vs-load", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    assert (tmp_path / "o" / "results.csv").exists()
    manifest = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert manifest["kind"] == "utility-vs-load" and manifest["records"] == 2
    cfg.write_text("bogus: 1\n")
    assert main(["experiment", "pareto", "--config", str(cfg)]) == 2
