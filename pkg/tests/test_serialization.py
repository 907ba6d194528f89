import json

import pytest

from edgeoffload.network import GeneratorConfig, Task, generate_scenario, generate_tasks
from edgeoffload.options import build_instance
from edgeoffload.serialization import (InstanceInvariantError, SchemaError, VersionError, attach_tasks,
                                       load_scenario, load_tasks, save_scenario, save_tasks, scenario_from_dict,
                                       scenario_to_dict)


@pytest.fixture(scope="module")
def scenario():
    return generate_scenario(GeneratorConfig(num_nodes=50, seed=12), 15)


def test_round_trip_is_exact(tmp_path, scenario):
    path = tmp_path / "inst.json"
    save_scenario(path, scenario)
    back = load_scenario(path)
    assert back == scenario
    a, b = build_instance(scenario), build_instance(back)
    assert a.utility.tobytes() == b.utility.tobytes()
    assert (a.usage != b.usage).nnz == 0


def test_tasks_file_round_trip(tmp_path, scenario):
    tasks = generate_tasks(scenario.graph, 7, seed=3)
    path = tmp_path / "tasks.json"
    save_tasks(path, tasks, 3)
    assert load_tasks(path) == tuple(tasks)
    assert attach_tasks(scenario.with_tasks(()), tasks).tasks == tuple(tasks)


def test_attach_rejects_non_sensor_source(scenario):
    core = scenario.graph.servers()[0]
    with pytest.raises(InstanceInvariantError, match=r"\$\.tasks\[0\]\.source_sensor"):
        attach_tasks(scenario, [Task(0, core, 10.0, 1.0, 2, 100)])


def test_missing_field_names_its_path(scenario):
    doc = scenario_to_dict(scenario)
    del doc["global_bandwidth_mbps"]
    with pytest.raises(SchemaError) as info:
        scenario_from_dict(doc)
    assert info.value.path == "$.global_bandwidth_mbps"
    doc = scenario_to_dict(scenario)
    del doc["links"][2]["bandwidth_capacity"]
    with pytest.raises(SchemaError) as info:
        scenario_from_dict(doc)
    assert info.value.path.startswith("$.links[2]")


def test_wrong_type_and_unknown_field(scenario):
    doc = scenario_to_dict(scenario)
    doc["nodes"][0]["cpu_capacity"] = "lots"
    with pytest.raises(SchemaError, match=r"\$\.nodes\[0\]\.cpu_capacity"):
        scenario_from_dict(doc)
    doc = scenario_to_dict(scenario)
    doc["extra"] = 1
    with pytest.raises(SchemaError):
        scenario_from_dict(doc)


def test_invariant_violation_is_located(scenario):
    doc = scenario_to_dict(scenario)
    doc["nodes"][3]["cpu_capacity"] = -1.0
    with pytest.raises(InstanceInvariantError, match=r"^\$\.nodes\[3\]"):
        scenario_from_dict(doc)
    doc = scenario_to_dict(scenario)
    doc["profiles"][0]["node"] = 10_000
    with pytest.raises(InstanceInvariantError, match=r"\$\.profiles\[0\]\.node"):
        scenario_from_dict(doc)


def test_version_and_io_errors(tmp_path, scenario):
    doc = scenario_to_dict(scenario)
    doc["version"] = 7
    with pytest.raises(VersionError):
        scenario_from_dict(doc)
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(SchemaError) as info:
        load_scenario(bad)
    assert info.value.path == "$"
    with pytest.raises(FileNotFoundError):
        save_scenario(tmp_path / "missing" / "x.json", scenario)
    with pytest.raises(SchemaError):
        p = tmp_path / "t.json"
        p.write_text(json.dumps({"version": 1, "seed": 0}))
        load_tasks(p)
