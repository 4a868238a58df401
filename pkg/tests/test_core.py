import numpy as np
import pytest

from fshnnlib.core import (
    FieldState,
    PhaseState,
    TrajectoryDataset,
    derivative_estimate,
    derivative_estimates,
    derivative_pairs,
    frame_pairs,
    subsample,
    training_window,
    wrap_angle,
)
from fshnnlib.errors import ShapeError
from fshnnlib.integrators import leapfrog_step, rollout, split_stepper
from fshnnlib.systems.params import PendulumParams
from fshnnlib.systems.pendulum import pendulum_rhs, pendulum_split


def ramp(n_frames, dt=1.0):
    states = np.arange(n_frames, dtype=np.float64)[None, :, None]
    return TrajectoryDataset(states=states, dt=dt)


def test_phase_state_layout():
    z = PhaseState.from_qp([1.0, 2.0], [3.0, 4.0])
    assert z.dof == 2
    np.testing.assert_array_equal(z.q, [1.0, 2.0])
    np.testing.assert_array_equal(z.p, [3.0, 4.0])
    with pytest.raises(ShapeError):
        PhaseState(np.zeros(3), dof=2)
    with pytest.raises(ShapeError):
        PhaseState.from_qp([1.0], [1.0, 2.0])


def test_field_state_checks_channels():
    field = FieldState(np.zeros((3, 4, 4)), dx=0.5, dy=0.25, channels=("h", "mx", "my"))
    assert field.grid_shape == (4, 4)
    assert field.cell_area == pytest.approx(0.125)
    assert field.channel("mx").shape == (4, 4)
    with pytest.raises(ShapeError):
        FieldState(np.zeros((2, 4, 4)), dx=1.0, dy=1.0, channels=("h", "mx", "my"))
    with pytest.raises(ShapeError):
        FieldState(np.zeros((4, 4)), dx=1.0, dy=1.0, channels=("h",))


def test_dataset_shape_properties():
    data = TrajectoryDataset(states=np.zeros((2, 5, 3, 4, 4)), dt=0.1)
    assert data.n_traj == 2
    assert data.n_frames == 5
    assert data.state_shape == (3, 4, 4)
    assert data.state_dim == 48
    assert data.is_field
    np.testing.assert_allclose(data.times, [0.0, 0.1, 0.2, 0.3, 0.4])
    with pytest.raises(ShapeError):
        TrajectoryDataset(states=np.zeros((5, 2)), dt=0.1)
    with pytest.raises(ShapeError):
        TrajectoryDataset(states=np.zeros((2, 5, 2)), dt=0.1, energy=np.zeros((2, 4)))


def test_dataset_save_and_load(tmp_path):
    data = TrajectoryDataset(
        states=np.random.default_rng(0).normal(size=(2, 4, 4)),
        dt=0.25,
        energy=np.ones((2, 4)),
        system="double_pendulum",
        wrapped_dims=(0, 1),
        metadata={"seed": 3},
    )
    path = str(tmp_path / "data.fsh")
    data.save(path)
    loaded = TrajectoryDataset.load(path)
    np.testing.assert_array_equal(loaded.states, data.states)
    np.testing.assert_array_equal(loaded.energy, data.energy)
    assert loaded.dt == 0.25
    assert loaded.system == "double_pendulum"
    assert loaded.wrapped_dims == (0, 1)
    assert loaded.metadata == {"seed": 3}
    with pytest.raises(FileNotFoundError):
        TrajectoryDataset.load(str(tmp_path / "missing.fsh"))


def test_subsample_examples():
    data = ramp(10, dt=0.1)
    sub = subsample(data, 3)
    assert sub.n_frames == 4
    np.testing.assert_array_equal(sub.states[0, :, 0], [0, 3, 6, 9])
    assert sub.dt == pytest.approx(0.3)
    assert sub.metadata["interval"] == 3

    same = subsample(data, 1)
    np.testing.assert_array_equal(same.states, data.states)

    twice = subsample(subsample(data, 2), 2)
    np.testing.assert_array_equal(twice.states, subsample(data, 4).states)
    assert twice.dt == pytest.approx(subsample(data, 4).dt)
    assert twice.metadata["interval"] == 4

    with pytest.raises(ValueError):
        subsample(data, 0)


def test_training_window_keeps_leading_steps():
    window = training_window(ramp(20), 10)
    assert window.n_frames == 11
    np.testing.assert_array_equal(window.states[0, -1], [10.0])
    with pytest.raises(ValueError):
        training_window(ramp(20), 0)


def test_derivative_estimates_are_exact_for_affine_data(linear_dataset):
    derivatives = derivative_estimates(linear_dataset)
    assert derivatives.shape == linear_dataset.states.shape
    np.testing.assert_allclose(derivatives, np.broadcast_to([2.0, -4.0], derivatives.shape))
    np.testing.assert_allclose(derivative_estimate(linear_dataset, 0), [[2.0, -4.0]] * 2)

    constant = TrajectoryDataset(states=np.ones((1, 6, 2)), dt=0.1)
    np.testing.assert_array_equal(derivative_estimates(constant), 0.0)


def test_derivative_estimate_needs_two_frames():
    with pytest.raises(ShapeError):
        derivative_estimates(ramp(1))
    np.testing.assert_allclose(derivative_estimates(ramp(2, dt=0.5)), 2.0)
    with pytest.raises(IndexError):
        derivative_estimate(ramp(5), 5)


def test_derivative_estimate_matches_pendulum_rhs():
    params = PendulumParams()
    step = split_stepper(leapfrog_step, pendulum_split(params), 1)
    traj = rollout(step, np.array([1.0, 0.5]), 0.01, 50)
    estimate = derivative_estimates(traj)[0, 1:-1]
    exact = pendulum_rhs(params, traj.states[0, 1:-1])
    assert np.max(np.abs(estimate - exact)) < 1e-3


def test_derivatives_unwrap_angles():
    theta = wrap_angle(np.pi - 0.1 + 0.05 * np.arange(5))
    states = np.stack([theta, np.zeros(5)], axis=-1)[None]
    data = TrajectoryDataset(states=states, dt=0.05, wrapped_dims=(0,))
    np.testing.assert_allclose(derivative_estimates(data)[0, :, 0], 1.0, atol=1e-9)


def test_wrap_angle():
    assert wrap_angle(np.pi + 0.1) == pytest.approx(-np.pi + 0.1)
    assert wrap_angle(np.pi) == pytest.approx(np.pi)
    assert wrap_angle(-np.pi) == pytest.approx(np.pi)
    assert wrap_angle(0.3) == pytest.approx(0.3)


def test_pairs(linear_dataset):
    z, zdot = derivative_pairs(linear_dataset)
    assert z.shape == zdot.shape == (10, 2)

    current, following = frame_pairs(linear_dataset)
    assert current.shape == following.shape == (8, 2)
    np.testing.assert_allclose(following - current, [[1.0, -2.0]] * 8)

    current, following = frame_pairs(linear_dataset, offset=2)
    assert current.shape == (6, 2)
    with pytest.raises(ShapeError):
        frame_pairs(linear_dataset, offset=5)
