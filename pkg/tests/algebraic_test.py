import logging

import numpy as np
import pytest
from pytest import mark

from netdiag.algebraic import (
    Distinguishability,
    Generic,
    GenericVerdict,
    certify_initial_state,
    generic_detectable_mc,
    generic_isolable_mc,
    is_detectable,
    is_distinguishable,
    is_isolable,
    stacked_check,
    transfer_check,
    unobservable_subspace,
    witness_initial_state,
)
from netdiag.description import NetworkDescription
from netdiag.errors import DimensionMismatchError, PreconditionError
from netdiag.sysmodel import assemble_lumped, delta_phi, realize_pattern, sample_weights

DIAG = np.diag([1.0, 2.0])
SHEARED = np.array([[1.0, 1.0], [0.0, 2.0]])
Q_FIRST = np.array([[1.0, 0.0]])


@pytest.fixture(scope="module")
def example2() -> NetworkDescription:
    return NetworkDescription.fixture("example2")


@pytest.fixture(scope="module")
def example1() -> NetworkDescription:
    return NetworkDescription.fixture("example1")


def test_unobservable_subspace_of_decoupled_states():
    u = unobservable_subspace(DIAG, Q_FIRST)
    assert u.shape == (2, 1)
    assert np.allclose(np.abs(u[:, 0]), [0.0, 1.0])


def test_unobservable_subspace_extremes():
    assert unobservable_subspace(SHEARED, Q_FIRST).shape == (2, 0)
    assert unobservable_subspace(DIAG, np.zeros((1, 2))).shape == (2, 2)
    with pytest.raises(DimensionMismatchError):
        unobservable_subspace(DIAG, np.ones((1, 3)))


@mark.parametrize(
    "phi_j,expected",
    [
        # Only the unobserved state changes
        (np.diag([1.0, 3.0]), Distinguishability.INDISTINGUISHABLE),
        # The unobserved state now drives the observed one
        (SHEARED, Distinguishability.DISTINGUISHABLE),
        (DIAG, Distinguishability.INDISTINGUISHABLE),
    ],
)
def test_is_distinguishable(phi_j, expected):
    report = is_distinguishable(DIAG, phi_j, Q_FIRST)
    assert report.verdict is expected
    assert stacked_check(DIAG, phi_j, Q_FIRST).verdict is expected
    assert transfer_check(DIAG, DIAG - phi_j, Q_FIRST).verdict is expected
    assert report.tolerance_used == 1e-9


def test_distinguishability_is_symmetric():
    assert is_distinguishable(SHEARED, DIAG, Q_FIRST).distinguishable
    assert not is_distinguishable(np.diag([1.0, 3.0]), DIAG, Q_FIRST).distinguishable


def test_shape_checks():
    with pytest.raises(DimensionMismatchError):
        is_distinguishable(DIAG, np.eye(3), Q_FIRST)
    with pytest.raises(DimensionMismatchError):
        is_distinguishable(DIAG, DIAG, np.ones((1, 3)))
    with pytest.raises(ValueError):
        is_distinguishable(DIAG, DIAG, Q_FIRST, tol=0.0)


def test_transfer_check_records_sample_points():
    report = transfer_check(DIAG, DIAG - SHEARED, Q_FIRST, samples=4, seed=7)
    assert len(report.evidence.points) == 4
    for lam in report.evidence.points:
        assert abs(lam) > 2 * 2.0
    assert report.to_dict()["evidence"]["kind"] == "transfer"


@mark.parametrize(
    "name,detectable",
    [
        ("l12", False),
        ("l23", False),
        ("l34", False),
        ("l25", True),
        ("l45", True),
        ("l51", True),
    ],
)
def test_single_link_detectability(example2: NetworkDescription, name, detectable):
    failure = example2.failure(name)
    weights = sample_weights(example2.model, seed=11)
    report = is_detectable(example2.dynamics, example2.model, failure, weights)
    assert report.distinguishable is detectable


def test_isolability_of_nested_failures(example2: NetworkDescription):
    weights = sample_weights(example2.model, seed=0)
    fs = example2.failure_set()
    report = is_isolable(example2.dynamics, example2.model, fs, weights)
    assert not report.isolable
    assert report.failing_pairs == [(1, 2)]
    assert set(report.pairs) == {(0, 1), (0, 2), (1, 2)}

    with_second_sensor = example2.with_sensors([1, 4])
    report = is_isolable(with_second_sensor.dynamics, with_second_sensor.model, fs, weights)
    assert report.isolable
    assert report.to_dict()["failing_pairs"] == []


def test_example1_link_failures(example1: NetworkDescription):
    dyn, model = example1.dynamics, example1.model
    for name in ("e1", "e2"):
        verdict = generic_detectable_mc(dyn, model, example1.failure(name), trials=3)
        assert verdict.holds
    assert generic_isolable_mc(dyn, model, example1.failure_set(), trials=3).holds


def test_generic_detectable_witnesses(example2: NetworkDescription):
    verdict = generic_detectable_mc(
        example2.dynamics, example2.model, example2.failure("l45"), trials=4, seed=10
    )
    assert verdict.verdict is Generic.GENERICALLY_TRUE
    assert verdict.witnesses == (10, 11, 12, 13)
    assert not verdict.probabilistic


def test_generic_undetectable_is_probabilistic(example2: NetworkDescription):
    verdict = generic_detectable_mc(
        example2.dynamics, example2.model, example2.failure("l23"), trials=3
    )
    assert verdict.verdict is Generic.GENERICALLY_FALSE
    assert verdict.witnesses == ()
    assert verdict.probabilistic
    assert verdict.failing_pairs == ((0, 1),)


def test_generic_isolable_reports_unseparated_pairs(example2: NetworkDescription):
    verdict = generic_isolable_mc(
        example2.dynamics, example2.model, example2.failure_set(), trials=3
    )
    assert not verdict.holds
    assert verdict.failing_pairs == ((1, 2),)
    assert verdict.to_dict()["failing_pairs"] == [[1, 2]]


def test_generic_verdict_invariant():
    with pytest.raises(ValueError):
        GenericVerdict(Generic.GENERICALLY_TRUE, 3, ())
    with pytest.raises(ValueError):
        GenericVerdict(Generic.GENERICALLY_FALSE, 3, (1,))
    assert GenericVerdict(Generic.GENERICALLY_TRUE, 3, (2, 0)).witnesses == (0, 2)


def test_monte_carlo_needs_a_trial(example2: NetworkDescription):
    with pytest.raises(ValueError):
        generic_detectable_mc(
            example2.dynamics, example2.model, example2.failure("l45"), trials=0
        )


def _scenario_phis(desc: NetworkDescription, names: list[str], seed: int):
    weights = sample_weights(desc.model, seed)
    sensors = desc.model.sensors
    phis = [assemble_lumped(desc.dynamics, weights, sensors).Phi]
    for name in names:
        failed = weights.without(desc.failure(name).removed_edges)
        phis.append(assemble_lumped(desc.dynamics, failed, sensors).Phi)
    q = assemble_lumped(desc.dynamics, weights, sensors).Q
    return phis, q


def test_witness_initial_state(example2: NetworkDescription):
    phis, q = _scenario_phis(example2, ["l45", "l51"], seed=5)
    witness = witness_initial_state(phis, q, seed=3)
    assert np.isclose(np.linalg.norm(witness.x0), 1.0)
    assert witness.seed == 3
    assert 1 <= witness.draws <= 20
    assert set(witness.margins) == {(0, 1), (0, 2), (1, 2)}
    assert all(m > 1e-9 for m in witness.margins.values())

    again = certify_initial_state(phis, q, witness.x0)
    assert again == pytest.approx(witness.margins)


def test_witness_needs_distinguishable_systems(example2: NetworkDescription):
    phis, q = _scenario_phis(example2, ["l45", "l12"], seed=5)
    with pytest.raises(PreconditionError) as exc:
        witness_initial_state(phis, q)
    assert exc.value.pair == (0, 2)


def test_zero_state_certifies_nothing(example2: NetworkDescription):
    phis, q = _scenario_phis(example2, ["l45"], seed=0)
    margins = certify_initial_state(phis, q, np.zeros(phis[0].shape[0]))
    assert margins == {(0, 1): 0.0}


def test_no_disagreement_warning_on_small_systems(example2: NetworkDescription, caplog):
    weights = sample_weights(example2.model, seed=1)
    with caplog.at_level(logging.WARNING, logger="netdiag.algebraic"):
        for failure in example2.failures.values():
            is_detectable(example2.dynamics, example2.model, failure, weights)
    assert "disagree" not in caplog.text


def test_first_witness_draw_almost_always_certifies(example2: NetworkDescription):
    desc = example2.with_sensors([1, 4])
    phis, q = _scenario_phis(desc, ["e1", "e2"], seed=0)
    first_draw = sum(witness_initial_state(phis, q, seed=s).draws == 1 for s in range(100))
    assert first_draw >= 99


@mark.parametrize("fixture", ["example1", "example2"])
@mark.parametrize("factor", [0.5, 2.0, 10.0])
def test_scaling_free_weights_keeps_verdicts(fixture: str, factor: float):
    desc = NetworkDescription.fixture(fixture)
    dyn, model = desc.dynamics, desc.model
    weights = sample_weights(model, seed=3)
    scaled = weights.scaled(factor)
    for failure in desc.failures.values():
        expected = is_detectable(dyn, model, failure, weights).distinguishable
        assert is_detectable(dyn, model, failure, scaled).distinguishable is expected

    fs = desc.failure_set()
    expected_pairs = is_isolable(dyn, model, fs, weights).failing_pairs
    assert is_isolable(dyn, model, fs, scaled).failing_pairs == expected_pairs


def test_example1_transfer_row_of_the_second_failure(example1: NetworkDescription):
    dyn, model = example1.dynamics, example1.model
    failure = example1.failure("e2")
    for weights in (realize_pattern(model), sample_weights(model, seed=42)):
        lumped = assemble_lumped(dyn, weights, model.sensors)
        delta = delta_phi(weights, weights.without(failure.removed_edges), dyn)
        # Node 3 only feeds node 2, which has no way back, so the resolvent
        # entry at node 3 is 1/l and the row is w(4,3)/l in the last column
        for lam in (5.0, 2.0 + 3.0j):
            row = lumped.Q @ np.linalg.solve(lam * np.eye(4) - lumped.Phi, delta)
            expected = np.array([[0.0, 0.0, 0.0, weights.weight((4, 3)) / lam]])
            assert np.allclose(row, expected)
        assert transfer_check(lumped.Phi, delta, lumped.Q).distinguishable
