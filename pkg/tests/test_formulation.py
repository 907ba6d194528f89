import numpy as np
import pytest

from edgeoffload.assignment import AssignmentError, make_assignment, verify_assignment
from edgeoffload.formulation import (binding_rows, capacity_violations, cardinality_rows, check_assignment,
                                     oversized_options, relaxation_lp, worst_case_load)
from edgeoffload.lp import LPStatus, solve_lp

from edgeoffload.options import build_instance

from helpers import enumerate_feasible, greedy_trap, profile, random_tiny, star_scenario


def test_cardinality_rows_are_valid_for_every_feasible_assignment():
    rng = np.random.default_rng(4)
    cut_rows = 0
    for _ in range(60):
        inst = random_tiny(rng, max_tasks=6, max_options=4)
        K, rhs = cardinality_rows(inst)
        cut_rows += K.shape[0]
        for combo in enumerate_feasible(inst):
            x = np.zeros(inst.num_options)
            x[list(combo)] = 1.0
            assert np.all(K @ x <= rhs + 1e-12)
    assert cut_rows > 0


def test_strengthened_lp_is_a_valid_relaxation():
    rng = np.random.default_rng(6)
    for _ in range(40):
        inst = random_tiny(rng, max_tasks=5, max_options=4)
        feas = enumerate_feasible(inst)
        plain = solve_lp(relaxation_lp(inst))
        strong = solve_lp(relaxation_lp(inst, cardinality=True))
        if not feas:
            continue
        best = min(sum(inst.utility[list(c)]) for c in feas)
        assert plain.status is LPStatus.OPTIMAL and strong.status is LPStatus.OPTIMAL
        assert plain.objective <= strong.objective + 1e-9
        assert strong.objective <= best + 1e-9


def test_binding_rows_and_worst_case():
    inst = greedy_trap()
    load = worst_case_load(inst)
    # edge cpu: both tasks may pick the 4000-MIPS edge profile
    assert load[inst.cpu_row(1)] == 8000.0
    rows = binding_rows(inst)
    assert inst.cpu_row(1) in rows
    assert all(load[r] > inst.capacity[r] for r in rows)
    assert len(oversized_options(inst)) == 0


def test_exact_violation_check():
    inst = greedy_trap()
    assert check_assignment(inst, (1, 2)) == []
    bad = check_assignment(inst, (0, 2))
    assert bad == ["cpu[1]: load 8000.0 > capacity 6000.0"]
    (r, load, cap), = capacity_violations(inst, (0, 2))
    assert r == inst.cpu_row(1) and load == 8000 and cap == 6000
    assert check_assignment(inst, (2, 2))[0].startswith("task 0")
    assert "choices" in check_assignment(inst, (1,))[0]
    with pytest.raises(AssignmentError, match="cpu"):
        verify_assignment(inst, make_assignment(inst, (0, 2), "test"))


def test_exact_arithmetic_catches_float_rounding():
    # 1.0 + 2**-53 rounds to 1.0 in floats, but exceeds a capacity of 1.0
    tiny = 2.0 ** -53
    scen = star_scenario(2, edge_cpu=1.0, edge_profiles=[profile("A", 60.0, 0.1, 1.0, 1.0),
                                                         profile("B", 60.0, 0.1, tiny, 1.0)],
                         sensor_profiles=[profile("S", 50.0, 0.1, 100.0, 100.0, sensor=True)], link_bw=20.0)
    inst = build_instance(scen)
    a = next(j for j in inst.task_options(0) if inst.options[j].cpu_cost == 1.0)
    b = next(j for j in inst.task_options(1) if inst.options[j].cpu_cost == tiny)
    assert 1.0 + tiny <= 1.0
    (r, load, cap), = capacity_violations(inst, (a, b))
    assert r == inst.cpu_row(1) and load > cap
