import logging
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from pytest import mark

from netdiag.description import NetworkDescription
from netdiag.netgraph import FailureScenario, NetworkModel
from netdiag.structural import (
    Certification,
    Route,
    StructuralOutcome,
    TransferIndex,
    disjoint_isolability_shortcut,
    distance_index,
    generically_detectable,
    generically_isolable,
    pair_distance,
    pair_generically_distinguishable,
    satisfies_index_condition,
    subset_nonisolability_screen,
    transfer_index,
)
from netdiag.sysmodel import SubsystemDynamics


@pytest.fixture(scope="module")
def example2() -> NetworkDescription:
    return NetworkDescription.fixture("example2")


@pytest.fixture(scope="module")
def ieee9() -> NetworkDescription:
    return NetworkDescription.fixture("ieee9")


def test_transfer_index_of_nilpotent_coupling(example2: NetworkDescription):
    r_max = transfer_index(example2.dynamics)
    assert r_max.value == 2
    assert r_max.certified_by is Certification.ZERO_OUTPUT
    assert r_max.reach == 1
    assert str(r_max) == "2"
    assert r_max.to_dict() == {"value": 2, "certified_by": "zero-output"}


@mark.parametrize(
    "dyn",
    [
        SubsystemDynamics.single_integrator(),
        SubsystemDynamics.swing(),
        SubsystemDynamics.swing(damping_ratio=0.2),
    ],
)
def test_transfer_index_unbounded(dyn):
    r_max = transfer_index(dyn)
    assert r_max.is_infinite
    assert r_max.certified_by is Certification.CAP_RULE
    assert str(r_max) == "infinite"
    assert r_max.to_dict()["value"] == "infinite"


def test_transfer_index_with_zero_output(caplog):
    dyn = SubsystemDynamics(A=[[0.0]], B=[[1.0]], Gamma=[[1.0]], C=[[0.0]])
    with caplog.at_level(logging.WARNING, logger="netdiag.structural"):
        r_max = transfer_index(dyn)
    assert r_max.value == 0
    assert "Output matrix C is zero" in caplog.text


def test_transfer_index_when_coupling_is_unobserved():
    # The coupling only reaches the second state, which C never sees
    dyn = SubsystemDynamics(
        A=np.zeros((2, 2)), B=[[0.0], [1.0]], Gamma=[[1.0, 0.0]], C=[[1.0, 0.0]]
    )
    assert transfer_index(dyn).value == 0


def test_transfer_index_is_independent_of_seed(example2: NetworkDescription):
    assert {transfer_index(example2.dynamics, seed=s).value for s in range(5)} == {2}


def test_transfer_index_invariant():
    with pytest.raises(ValueError):
        TransferIndex(math.inf, Certification.ZERO_OUTPUT)
    with pytest.raises(ValueError):
        TransferIndex(3, Certification.CAP_RULE)


@mark.parametrize(
    "distance,value,expected",
    [
        (0, 1, True),
        (1, 1, False),
        (1, 2, True),
        (math.inf, math.inf, False),
        (40, math.inf, True),
    ],
)
def test_index_condition(distance, value, expected):
    cert = Certification.CAP_RULE if math.isinf(value) else Certification.ZERO_OUTPUT
    assert satisfies_index_condition(distance, TransferIndex(value, cert)) is expected


@mark.parametrize(
    "name,detectable,distance",
    [
        ("l12", False, 2),
        ("l23", False, 3),
        ("l34", False, 2),
        ("l25", True, 1),
        ("l45", True, 1),
        ("l51", True, 0),
    ],
)
def test_single_link_verdicts(example2: NetworkDescription, name, detectable, distance):
    verdict = generically_detectable(example2.dynamics, example2.model, example2.failure(name))
    assert verdict.holds is detectable
    assert verdict.distance == distance
    assert verdict.route is Route.DETECTION
    if detectable:
        assert verdict.verdict is StructuralOutcome.GENERICALLY_DETECTABLE
        assert verdict.witness_path is not None
        assert verdict.witness_path[-1] == 1
        assert len(verdict.witness_path) == distance + 1
        assert verdict.failing_pair is None
    else:
        assert verdict.verdict is StructuralOutcome.GENERICALLY_UNDETECTABLE
        assert verdict.witness_path is None
        assert verdict.failing_pair == (0, 1)


def test_distance_index(example2: NetworkDescription):
    assert distance_index(example2.model, example2.failure("e1")) == 1
    assert distance_index(example2.model, [(3, 4)]) == 2


def test_nested_failures_are_not_isolable(example2: NetworkDescription):
    fs = example2.failure_set()
    verdict = generically_isolable(example2.dynamics, example2.model, fs)
    assert verdict.verdict is StructuralOutcome.GENERICALLY_NOT_ISOLABLE
    assert verdict.failing_pair == (1, 2)
    assert verdict.pair_distances == {(0, 1): 1, (0, 2): 1, (1, 2): math.inf}
    assert verdict.distance == math.inf
    assert verdict.route is Route.PAIRWISE
    assert verdict.to_dict()["pair_distances"] == {"0,1": 1, "0,2": 1, "1,2": "infinite"}


def test_sensor_on_node_four_isolates(example2: NetworkDescription):
    desc = example2.with_sensors([1, 4])
    verdict = generically_isolable(desc.dynamics, desc.model, desc.failure_set())
    assert verdict.holds
    assert verdict.pair_distances[(1, 2)] == 0
    assert verdict.failing_pair is None


def test_pair_distance_is_symmetric(example2: NetworkDescription):
    names = ["l12", "l34", "l45", "l51", "e1"]
    for a in names:
        for b in names:
            if a == b or example2.failure(a) == example2.failure(b):
                continue
            e_a, e_b = example2.failure(a), example2.failure(b)
            assert pair_distance(example2.model, e_a, e_b) == pair_distance(
                example2.model, e_b, e_a
            )


def test_pair_against_faultless(example2: NetworkDescription):
    l45 = example2.failure("l45")
    assert pair_distance(example2.model, None, l45) == 1
    assert pair_generically_distinguishable(example2.dynamics, example2.model, None, l45)


def test_disjoint_shortcut(example2: NetworkDescription):
    dyn, model = example2.dynamics, example2.model
    assert disjoint_isolability_shortcut(dyn, model, example2.failure_set()) is None

    fs = example2.failure_set(["l45", "l51"])
    shortcut = disjoint_isolability_shortcut(dyn, model, fs)
    assert shortcut is not None
    assert shortcut.route is Route.DISJOINT_SHORTCUT
    assert shortcut.holds
    assert shortcut.holds == generically_isolable(dyn, model, fs).holds

    fs = example2.failure_set(["l45", "l12"])
    shortcut = disjoint_isolability_shortcut(dyn, model, fs)
    assert shortcut is not None
    assert not shortcut.holds
    assert shortcut.failing_pair == (0, 2)
    assert shortcut.holds == generically_isolable(dyn, model, fs).holds


def test_subset_screen(example2: NetworkDescription):
    counterexample = subset_nonisolability_screen(
        example2.dynamics, example2.model, example2.failure_set()
    )
    assert counterexample is not None
    assert counterexample.pair == (1, 2)
    assert counterexample.difference == {(3, 4)}
    assert counterexample.distance == math.inf
    assert counterexample.nominal_distance == 2
    assert not counterexample.nominal_reading_agrees
    assert counterexample.to_dict()["distance"] == "infinite"


def test_subset_screen_without_nesting(example2: NetworkDescription):
    fs = example2.failure_set(["l45", "l51"])
    assert subset_nonisolability_screen(example2.dynamics, example2.model, fs) is None


def test_subset_screen_with_detectable_difference(example2: NetworkDescription):
    desc = example2.with_sensors([1, 4])
    assert subset_nonisolability_screen(desc.dynamics, desc.model, desc.failure_set()) is None


def test_every_bus_failure_is_detectable(ieee9: NetworkDescription):
    r_max = transfer_index(ieee9.dynamics)
    for name, failure in ieee9.failures.items():
        for sensor in ieee9.model.nodes:
            model = ieee9.model.with_sensors([sensor])
            verdict = generically_detectable(ieee9.dynamics, model, failure, r_max)
            assert verdict.holds, (name, sensor)


def test_bus_failures_are_isolable_from_one_sensor(ieee9: NetworkDescription):
    verdict = generically_isolable(ieee9.dynamics, ieee9.model, ieee9.failure_set())
    assert verdict.holds
    assert len(verdict.pair_distances) == 45


def test_disjoint_shortcut_on_example1():
    desc = NetworkDescription.fixture("example1")
    fs = desc.failure_set()
    shortcut = disjoint_isolability_shortcut(desc.dynamics, desc.model, fs)
    assert shortcut is not None
    assert shortcut.holds
    assert shortcut.pair_distances == {(0, 1): 1, (0, 2): 0}
    assert generically_isolable(desc.dynamics, desc.model, fs).holds


def test_transfer_index_cap_is_enough():
    rng = np.random.default_rng(2024)
    for _ in range(100):
        n = int(rng.integers(2, 5))
        m = int(rng.integers(1, n))
        p = int(rng.integers(1, 3))
        dyn = SubsystemDynamics(
            A=rng.standard_normal((n, n)),
            B=rng.standard_normal((n, m)),
            Gamma=rng.standard_normal((m, n)),
            C=rng.standard_normal((p, n)),
        )
        at_n = transfer_index(dyn)
        assert at_n.is_infinite or at_n.value <= n - 1
        assert transfer_index(dyn, cap=2 * n) == at_n


@st.composite
def sensor_growth(draw) -> tuple[NetworkModel, FailureScenario, set[int], set[int]]:
    n = draw(st.integers(2, 6))
    pairs = [(i, j) for i in range(1, n + 1) for j in range(1, n + 1)]
    edges = draw(st.lists(st.sampled_from(pairs), min_size=1, max_size=12, unique=True))
    removed = draw(st.sets(st.sampled_from(sorted(edges)), min_size=1, max_size=3))
    sensors = draw(st.sets(st.integers(1, n), min_size=1, max_size=n))
    extra = draw(st.sets(st.integers(1, n), max_size=n))
    return NetworkModel.build(n, edges, sensors), FailureScenario(frozenset(removed)), sensors, extra


@settings(max_examples=200, deadline=None)
@given(sensor_growth())
def test_more_sensors_never_lose_detectability(case, example2: NetworkDescription):
    model, failure, sensors, extra = case
    dyn = example2.dynamics
    r_max = transfer_index(dyn)
    before = generically_detectable(dyn, model, failure, r_max)
    after = generically_detectable(dyn, model.with_sensors(sensors | extra), failure, r_max)
    assert after.distance <= before.distance
    if before.holds:
        assert after.holds
