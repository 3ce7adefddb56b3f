import csv
import json
import math

import numpy as np
import pytest
from pytest import mark

from netdiag.description import NetworkDescription
from netdiag.errors import ExportError, TrajectoryMismatchError
from netdiag.sim import (
    NOMINAL_LABEL,
    Trajectory,
    channel_noise,
    detection_time,
    export_csv,
    metadata_path,
    propagate,
    random_initial_state,
    residual,
    simulate_scenarios,
    uniform_grid,
    write_metadata,
)
from netdiag.sysmodel import (
    Channel,
    LumpedDims,
    LumpedRealization,
    assemble_lumped,
    realize_pattern,
)

DECAY = LumpedRealization(
    Phi=np.array([[-1.0]]),
    Q=np.array([[1.0]]),
    dims=LumpedDims(N=1, n=1, m=1, p=1, sensor_count=1),
    sensors=(1,),
)


@pytest.fixture(scope="module")
def example2() -> NetworkDescription:
    return NetworkDescription.fixture("example2")


def _trajectory(values: list[list[float]], label: str = "run") -> Trajectory:
    outputs = np.array(values, dtype=float)
    times = np.arange(outputs.shape[0], dtype=float)
    channels = tuple(Channel(k + 1, 1) for k in range(outputs.shape[1]))
    return Trajectory(times, outputs, label, np.ones(2), channels)


def test_uniform_grid():
    grid = uniform_grid(2.0, 4)
    assert grid.tolist() == [0.0, 0.5, 1.0, 1.5, 2.0]
    with pytest.raises(ValueError):
        uniform_grid(0.0, 10)


def test_propagate_matches_closed_form():
    grid = uniform_grid(3.0, 300)
    traj = propagate(DECAY, [2.0], grid)
    assert traj.label == NOMINAL_LABEL
    assert traj.channel_names == ["y1"]
    assert np.allclose(traj.outputs[:, 0], 2.0 * np.exp(-grid), rtol=1e-9)
    assert traj.final_state is not None
    assert traj.final_state[0] == pytest.approx(2.0 * math.exp(-3.0))


def test_propagate_on_irregular_grid():
    grid = np.array([0.0, 0.1, 0.5, 0.6, 2.0])
    traj = propagate(DECAY, [1.0], grid)
    assert np.allclose(traj.outputs[:, 0], np.exp(-grid))


@mark.parametrize(
    "grid",
    [
        np.array([0.5, 1.0]),
        np.array([0.0, 1.0, 1.0]),
        np.array([]),
    ],
)
def test_invalid_grids(grid):
    with pytest.raises(ValueError):
        propagate(DECAY, [1.0], grid)


def test_initial_state_size():
    with pytest.raises(TrajectoryMismatchError):
        propagate(DECAY, [1.0, 2.0], uniform_grid(1.0, 10))


def test_random_initial_state_is_unit_norm():
    x0 = random_initial_state(15, seed=4)
    assert x0.shape == (15,)
    assert np.linalg.norm(x0) == pytest.approx(1.0)
    assert np.array_equal(x0, random_initial_state(15, seed=4))


def test_residual_of_identical_runs():
    a = _trajectory([[1.0], [2.0]])
    res = residual(a, a)
    assert res.sup == 0.0
    assert res.relative_sup == 0.0
    assert res.first_exceeding(0.0) is None


def test_residual():
    a = _trajectory([[1.0, 0.0], [2.0, 0.0], [4.0, 0.0]])
    b = _trajectory([[1.0, 0.0], [2.0, 3.0], [4.0, 0.0]])
    res = residual(a, b)
    assert res.norms.tolist() == [0.0, 3.0, 0.0]
    assert res.sup == 3.0
    assert res.relative_sup == pytest.approx(0.75)
    assert res.first_exceeding(1.0) == 1


def test_residual_needs_matching_runs():
    a = _trajectory([[1.0], [2.0]])
    with pytest.raises(TrajectoryMismatchError):
        residual(a, _trajectory([[1.0], [2.0], [3.0]]))
    with pytest.raises(TrajectoryMismatchError):
        residual(a, _trajectory([[1.0, 0.0], [2.0, 0.0]]))


def test_select_channels():
    traj = _trajectory([[1.0, 2.0, 3.0]])
    picked = traj.select([Channel(3, 1), Channel(1, 1)])
    assert picked.outputs.tolist() == [[3.0, 1.0]]
    assert picked.channel_names == ["y3", "y1"]
    with pytest.raises(TrajectoryMismatchError):
        traj.select([Channel(9, 1)])


def test_detection_without_noise():
    nominal = _trajectory([[0.0], [0.0], [0.0], [0.0]])
    faulty = _trajectory([[0.0], [0.05], [0.2], [1.0]])
    experiment = detection_time(nominal, faulty, noise_std=0.0, threshold=0.1, seed=0)
    assert experiment.first_detection_time == 2.0
    assert experiment.first_detection_index == 2
    assert experiment.to_dict() == {
        "noise_std": 0.0,
        "threshold": 0.1,
        "seed": 0,
        "first_detection_time": 2.0,
    }


def test_no_detection():
    nominal = _trajectory([[0.0], [0.0]])
    experiment = detection_time(nominal, nominal, noise_std=0.0, threshold=0.1, seed=0)
    assert experiment.first_detection_time is None


@mark.parametrize("noise_std,threshold", [(-1.0, 0.1), (0.1, 0.0), (0.1, -2.0)])
def test_detection_arguments(noise_std, threshold):
    a = _trajectory([[0.0]])
    with pytest.raises(ValueError):
        detection_time(a, a, noise_std, threshold, seed=0)


def test_channel_noise_is_keyed_by_channel():
    a = channel_noise(Channel(4, 1), 50, 0.1, seed=2)
    assert np.array_equal(a, channel_noise(Channel(4, 1), 50, 0.1, seed=2))
    assert not np.array_equal(a, channel_noise(Channel(3, 1), 50, 0.1, seed=2))
    assert not np.array_equal(a, channel_noise(Channel(4, 1), 50, 0.1, seed=3))


def test_more_sensors_never_detect_later():
    rng = np.random.default_rng(0)
    nominal = _trajectory(np.zeros((200, 2)).tolist())
    faulty = _trajectory((rng.normal(0.0, 0.05, size=(200, 2)).cumsum(axis=0)).tolist())
    for seed in range(10):
        single = detection_time(
            nominal.select([Channel(1, 1)]), faulty.select([Channel(1, 1)]), 0.1, 0.3, seed
        )
        both = detection_time(nominal, faulty, 0.1, 0.3, seed)
        if single.first_detection_time is not None:
            assert both.first_detection_time is not None
            assert both.first_detection_time <= single.first_detection_time


def test_undetectable_failure_leaves_outputs_unchanged(example2: NetworkDescription):
    dyn, model = example2.dynamics, example2.model
    weights = realize_pattern(model)
    x0 = random_initial_state(model.node_count * dyn.n, seed=1)
    grid = uniform_grid(2.0, 200)
    nominal, l12, l45 = simulate_scenarios(
        dyn, weights, [1], [example2.failure("l12"), example2.failure("l45")], x0, grid
    )
    assert [t.label for t in (nominal, l12, l45)] == ["nominal", "l12", "l45"]
    assert residual(nominal, l12).relative_sup < 1e-8
    assert residual(nominal, l45).relative_sup > 1e-4


def test_second_sensor_sees_the_nested_difference(example2: NetworkDescription):
    dyn, model = example2.dynamics, example2.model
    weights = realize_pattern(model)
    e1, e2 = example2.failure("e1"), example2.failure("e2")
    x0 = random_initial_state(model.node_count * dyn.n, seed=2)
    grid = uniform_grid(2.0, 200)

    def runs(sensors):
        lumped = [
            assemble_lumped(dyn, weights.without(f.removed_edges), sensors) for f in (e1, e2)
        ]
        return [propagate(lp, x0, grid, f.label) for lp, f in zip(lumped, (e1, e2))]

    assert residual(*runs([1])).relative_sup < 1e-8
    assert residual(*runs([1, 4])).relative_sup > 1e-4


def test_export_csv(tmp_path, example2: NetworkDescription):
    dyn, model = example2.dynamics, example2.model
    x0 = random_initial_state(model.node_count * dyn.n, seed=0)
    grid = uniform_grid(1.0, 10)
    trajectories = simulate_scenarios(
        dyn, realize_pattern(model), [1, 4], [example2.failure("l45")], x0, grid
    )
    path = export_csv(trajectories, tmp_path / "runs.csv")

    with path.open() as f:
        rows = list(csv.reader(f))
    assert rows[0] == ["time", "nominal:y1", "nominal:y4", "l45:y1", "l45:y4"]
    assert len(rows) == 12
    assert float(rows[1][0]) == 0.0
    assert float(rows[-1][0]) == 1.0
    assert float(rows[1][1]) == pytest.approx(x0[0], rel=1e-8)


def test_metadata(tmp_path):
    target = write_metadata(tmp_path / "runs.csv", {"seed": 3})
    assert target == metadata_path(tmp_path / "runs.csv")
    assert target.name == "runs.csv.meta.json"
    assert json.loads(target.read_text()) == {"seed": 3}


def test_export_errors(tmp_path):
    traj = propagate(DECAY, [1.0], uniform_grid(1.0, 4))
    with pytest.raises(ExportError):
        export_csv([traj], tmp_path / "missing" / "runs.csv")
    other = propagate(DECAY, [1.0], uniform_grid(2.0, 4))
    with pytest.raises(TrajectoryMismatchError):
        export_csv([traj, other], tmp_path / "runs.csv")


def test_export_without_trajectories(tmp_path):
    path = export_csv([], tmp_path / "empty.csv")
    assert path.read_text() == "time\n"


def test_restart_from_final_state(example2: NetworkDescription):
    lumped = assemble_lumped(example2.dynamics, realize_pattern(example2.model), [1])
    x0 = random_initial_state(lumped.dims.n_x, seed=6)
    whole = propagate(lumped, x0, uniform_grid(2.0, 200))
    first = propagate(lumped, x0, uniform_grid(1.0, 100))
    second = propagate(lumped, first.final_state, uniform_grid(1.0, 100))

    assert np.allclose(second.outputs, whole.outputs[100:], rtol=1e-8, atol=1e-12)
    assert np.allclose(second.final_state, whole.final_state, rtol=1e-8)


def test_noiseless_detection_matches_residual(example2: NetworkDescription):
    dyn, model = example2.dynamics, example2.model
    x0 = random_initial_state(model.node_count * dyn.n, seed=3)
    nominal, faulty = simulate_scenarios(
        dyn, realize_pattern(model), [1], [example2.failure("l25")], x0, uniform_grid(1.0, 50)
    )
    experiment = detection_time(nominal, faulty, noise_std=0.0, threshold=1e-300, seed=0)
    assert experiment.first_detection_index == residual(nominal, faulty).first_exceeding(0.0)
    assert experiment.first_detection_index is not None


def test_single_link_outputs_over_initial_states(example2: NetworkDescription):
    dyn, model = example2.dynamics, example2.model
    weights = realize_pattern(model)
    names = ["l12", "l23", "l34", "l25", "l45", "l51"]
    failures = [example2.failure(n) for n in names]
    grid = uniform_grid()

    for seed in range(100):
        x0 = random_initial_state(model.node_count * dyn.n, seed=seed)
        nominal, *faulty = simulate_scenarios(dyn, weights, [1], failures, x0, grid)
        series = {traj.label: residual(nominal, traj) for traj in faulty}
        for n in ("l12", "l23", "l34"):
            assert series[n].sup < 1e-8, (seed, n, series[n].sup)
            assert series[n].relative_sup < 1e-8, (seed, n)
        for n in ("l25", "l45", "l51"):
            assert series[n].sup > 1e-6 * np.linalg.norm(x0), (seed, n, series[n].sup)
            assert series[n].relative_sup > 1e-6, (seed, n)


def test_more_sensors_detect_bus_failure_sooner():
    ieee9 = NetworkDescription.fixture("ieee9")
    dyn, model = ieee9.dynamics, ieee9.model
    x0 = random_initial_state(model.node_count * dyn.n, seed=0)
    nominal, bus1 = simulate_scenarios(
        dyn, realize_pattern(model), [3, 4, 5], [ieee9.failure("bus1")], x0, uniform_grid()
    )

    medians = []
    for sensors in ([4], [4, 3], [4, 5, 3]):
        channels = [Channel(s, 1) for s in sensors]
        times = [
            detection_time(
                nominal.select(channels), bus1.select(channels), 0.05, 0.15, seed
            ).first_detection_time
            for seed in range(20)
        ]
        medians.append(float(np.median([math.inf if v is None else v for v in times])))
    assert medians == sorted(medians, reverse=True)
