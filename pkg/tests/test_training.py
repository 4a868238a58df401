import numpy as np
import pytest

from fshnnlib.analysis import energy_deviation, rollout_mse
from fshnnlib.autodiff import ParamVector
from fshnnlib.config import ModelConfig, TrainConfig
from fshnnlib.core import TrajectoryDataset
from fshnnlib.errors import ConfigError, TrainingError
from fshnnlib.models import (
    AnalyticHamiltonian,
    FsHnnOdeModel,
    FsHnnPdeModel,
    HnnModel,
    MlpDynamicsModel,
    build_model,
    energy_and_gradient,
    field_hamiltonian,
    model_rollout,
)
from fshnnlib.systems import generate_dataset, make_system
from fshnnlib.training import (
    AdamState,
    adam_step,
    hnn_grad_loss,
    mlp_onestep_loss,
    pde_onestep_loss,
    train_fs_hnn,
    train_hnn,
    train_mlp,
    train_model,
    union_resolutions,
)
from fshnnlib.training.losses import default_loss, resolve_loss


def loss_of_group(model, group, loss_fn):
    """Scalar function of one group's flat values, for finite differences."""
    params = model.groups[group]

    def f(values):
        saved = params.values.copy()
        params.values[:] = values
        try:
            return loss_fn()[0]
        finally:
            params.values[:] = saved

    return f


@pytest.fixture(scope="module")
def pendulum_data():
    system = make_system("pendulum")
    return generate_dataset(system, n_traj=3, n_steps=40, dt=0.05, seed=11)


def small_pde_model(rng):
    return FsHnnPdeModel.create(
        channels=2,
        grid_shape=(4, 4),
        intervals=[1, 2],
        rng=rng,
        latent=3,
        hidden=(4,),
        stencil=2,
        operator_channels=2,
        operator_depth=1,
        combiner_hidden=(3,),
    )


def test_hnn_loss_vanishes_for_exact_hamiltonian(rng):
    system = make_system("pendulum")
    z = rng.normal(size=(8, 2))
    loss, grads = hnn_grad_loss(AnalyticHamiltonian(system), z, system.rhs(z))
    assert loss == pytest.approx(0.0, abs=1e-20)
    assert grads == {}


def test_hnn_loss_matches_definition(rng):
    model = HnnModel.create(1, (4,), rng)
    z = rng.normal(size=(5, 2))
    zdot = rng.normal(size=(5, 2))
    loss, _ = hnn_grad_loss(model, z, zdot)
    _, g = energy_and_gradient(model, z)
    expected = np.mean((g[:, 1] - zdot[:, 0]) ** 2 + (g[:, 0] + zdot[:, 1]) ** 2)
    assert loss == pytest.approx(expected)


def test_hnn_loss_gradient_matches_finite_differences(rng, finite_difference):
    model = HnnModel.create(1, (5,), rng)
    z = rng.normal(size=(6, 2))
    zdot = rng.normal(size=(6, 2))
    _, grads = hnn_grad_loss(model, z, zdot)
    f = loss_of_group(model, "H", lambda: hnn_grad_loss(model, z, zdot))
    np.testing.assert_allclose(
        grads["H"], finite_difference(f, model.params.values), rtol=1e-5, atol=1e-8
    )


@pytest.mark.parametrize("component, group", [(0, "component0"), (None, "combiner"), (None, "component1")])
def test_fs_hnn_loss_gradients_match_finite_differences(component, group, rng, finite_difference):
    model = FsHnnOdeModel.create(1, [1, 2], (4,), (3,), rng)
    # Move the combiner off its plain-sum start so every path carries gradient.
    model.combiner_params.values[:] += rng.normal(scale=0.3, size=len(model.combiner_params))
    z = rng.normal(size=(5, 2))
    zdot = rng.normal(size=(5, 2))

    def loss_fn():
        return hnn_grad_loss(model, z, zdot, component=component, trainable=[group])

    _, grads = loss_fn()
    assert list(grads) == [group]
    f = loss_of_group(model, group, loss_fn)
    np.testing.assert_allclose(
        grads[group], finite_difference(f, model.groups[group].values), rtol=1e-5, atol=1e-8
    )


def test_pde_loss_gradients_match_finite_differences(rng, finite_difference):
    model = small_pde_model(rng)
    model.operator_params.values[:] = rng.normal(scale=0.3, size=len(model.operator_params))
    z_t = rng.normal(size=(3, 2, 4, 4))
    z_next = z_t + 0.1 * rng.normal(size=z_t.shape)

    def loss_fn():
        return pde_onestep_loss(model, z_t, z_next, step_scale=2.0)

    _, grads = loss_fn()
    assert set(grads) == {"component0", "component1", "combiner", "operator"}
    for group in grads:
        f = loss_of_group(model, group, loss_fn)
        np.testing.assert_allclose(
            grads[group],
            finite_difference(f, model.groups[group].values),
            rtol=1e-5,
            atol=1e-8,
            err_msg=group,
        )


def test_pde_loss_is_zero_for_identity_operator_on_static_fields(rng):
    model = small_pde_model(rng)
    model.operator_params.values[:] = 0.0
    z = rng.normal(size=(2, 2, 4, 4))
    loss, _ = pde_onestep_loss(model, z, z)
    assert loss == pytest.approx(0.0, abs=1e-24)
    with pytest.raises(ValueError):
        pde_onestep_loss(model, z[0], z[0])


def test_mlp_loss_gradient_matches_finite_differences(rng, finite_difference):
    model = MlpDynamicsModel.create(2, (4,), rng)
    z_t = rng.normal(size=(5, 2))
    z_next = rng.normal(size=(5, 2))
    _, grads = mlp_onestep_loss(model, z_t, z_next)
    f = loss_of_group(model, "net", lambda: mlp_onestep_loss(model, z_t, z_next))
    np.testing.assert_allclose(
        grads["net"], finite_difference(f, model.params.values), rtol=1e-5, atol=1e-8
    )


def test_losses_reject_empty_or_mismatched_batches(rng):
    model = HnnModel.create(1, (4,), rng)
    with pytest.raises(ValueError):
        hnn_grad_loss(model, np.zeros((0, 2)), np.zeros((0, 2)))
    with pytest.raises(ValueError):
        hnn_grad_loss(model, np.zeros((3, 2)), np.zeros((2, 2)))


def test_loss_kind_resolution(rng):
    hnn = HnnModel.create(1, (4,), rng)
    assert default_loss(hnn) == "hnn_grad"
    assert resolve_loss(hnn, "auto") == "hnn_grad"
    assert default_loss(MlpDynamicsModel.create(2, (4,), rng)) == "mlp_onestep"
    assert default_loss(small_pde_model(rng)) == "pde_onestep"
    with pytest.raises(ConfigError):
        resolve_loss(hnn, "pde_onestep")


def test_adam_step_examples():
    config = TrainConfig(learning_rate=0.01)
    params = {"w": ParamVector.from_blocks([("W0", np.array([1.0, -2.0, 3.0]))])}
    before = params["w"].values.copy()

    updated, state = adam_step(params, {"w": np.zeros(3)}, AdamState(), config)
    np.testing.assert_array_equal(updated["w"].values, before)
    assert state.step == 1

    grads = {"w": np.array([0.5, -4.0, 1e-3])}
    updated, state = adam_step(params, grads, AdamState(), config)
    np.testing.assert_allclose(updated["w"].values - before, -0.01 * np.sign(grads["w"]), rtol=1e-4)
    np.testing.assert_array_equal(params["w"].values, before)

    again, _ = adam_step(params, grads, AdamState(), config)
    np.testing.assert_array_equal(again["w"].values, updated["w"].values)

    with pytest.raises(ValueError):
        adam_step(params, {"w": np.zeros(2)}, AdamState(), config)


def test_union_resolutions_stacks_every_interval(linear_dataset):
    z, zdot = union_resolutions(linear_dataset, (1, 2))
    assert z.shape == zdot.shape == (16, 2)


def test_training_is_deterministic(pendulum_data):
    config = TrainConfig(epochs=3, batch_size=16, intervals=(1,), window_steps=20, seed=5)

    def run():
        model = HnnModel.create(1, (8,), np.random.default_rng(0))
        return train_hnn(pendulum_data, model, config)

    first, second = run(), run()
    assert first.model.params.values.tobytes() == second.model.params.values.tobytes()
    assert first.history.equals(second.history)
    assert list(first.history.columns) == ["phase", "component", "epoch", "loss"]
    assert len(first.history) == 3


def test_hnn_training_reduces_loss(pendulum_data):
    config = TrainConfig(learning_rate=1e-2, epochs=30, batch_size=16, intervals=(1,), window_steps=40)
    model = HnnModel.create(1, (16,), np.random.default_rng(0))
    history = train_hnn(pendulum_data, model, config).history
    assert history["loss"].iloc[-1] < 0.5 * history["loss"].iloc[0]


def test_two_phase_history_and_frozen_components(pendulum_data):
    def run(combiner_epochs, freeze=True):
        model = FsHnnOdeModel.create(1, [1, 2], (6,), (4,), np.random.default_rng(3))
        config = TrainConfig(
            epochs=2,
            combiner_epochs=combiner_epochs,
            batch_size=16,
            intervals=(1, 2),
            window_steps=20,
            freeze_components=freeze,
        )
        return train_fs_hnn(pendulum_data, model, config)

    phase1_only = run(0)
    frozen = run(3)
    unfrozen = run(3, freeze=False)

    history = frozen.history
    assert len(history) == 2 * 2 + 3
    assert list(history["phase"]) == [1, 1, 1, 1, 2, 2, 2]
    assert list(history["component"].iloc[:4]) == [0, 0, 1, 1]
    assert history["component"].iloc[4:].isna().all()

    for k in range(2):
        name = f"component{k}"
        reference = phase1_only.model.groups[name].values
        assert frozen.model.groups[name].values.tobytes() == reference.tobytes()
        assert not np.array_equal(unfrozen.model.groups[name].values, reference)
    assert not np.array_equal(
        frozen.model.combiner_params.values, phase1_only.model.combiner_params.values
    )
    assert frozen.model.metadata["window_steps"] == 20


def test_skip_combiner_leaves_combiner_untouched(pendulum_data):
    model = FsHnnOdeModel.create(1, [1, 2], (6,), (4,), np.random.default_rng(3))
    before = model.combiner_params.values.copy()
    config = TrainConfig(epochs=1, combiner_epochs=5, intervals=(1, 2), window_steps=20, skip_combiner=True)
    history = train_fs_hnn(pendulum_data, model, config).history
    assert set(history["phase"]) == {1}
    np.testing.assert_array_equal(model.combiner_params.values, before)


def test_pde_training_runs_both_phases(rng):
    states = rng.normal(size=(2, 5, 2, 4, 4))
    data = TrajectoryDataset(states=states, dt=0.5, system="field")
    model = small_pde_model(rng)
    config = TrainConfig(epochs=1, combiner_epochs=1, batch_size=4, intervals=(1, 2), window_steps=4)
    result = train_model(data, model, config)
    assert list(result.history["phase"]) == [1, 1, 2]
    assert model.dt_model == pytest.approx(0.5)
    np.testing.assert_allclose(model.shift, states.mean(axis=(0, 1, 3, 4)))


def test_training_rejects_mismatched_intervals(pendulum_data):
    model = FsHnnOdeModel.create(1, [1, 2], (4,), (4,), np.random.default_rng(0))
    with pytest.raises(ConfigError):
        train_fs_hnn(pendulum_data, model, TrainConfig(intervals=(1, 3)))
    with pytest.raises(ConfigError):
        train_hnn(pendulum_data, HnnModel.create(1, (4,), np.random.default_rng(0)), TrainConfig(phase1_loss="mlp_onestep"))


def test_non_finite_data_raises_training_error(pendulum_data):
    states = pendulum_data.states.copy()
    states[:, 3] = np.nan
    bad = pendulum_data.replace(states=states, energy=None)
    model = HnnModel.create(1, (4,), np.random.default_rng(0))
    with pytest.raises(TrainingError) as info:
        train_hnn(bad, model, TrainConfig(epochs=2, intervals=(1,), window_steps=10))
    assert info.value.epoch == 0
    assert info.value.phase == 1


def test_mlp_training_sets_model_step(pendulum_data):
    model = MlpDynamicsModel.create(2, (4,), np.random.default_rng(0))
    train_mlp(pendulum_data, model, TrainConfig(epochs=1, intervals=(2, 3), window_steps=20))
    assert model.dt_model == pytest.approx(2 * pendulum_data.dt)


@pytest.mark.slow
def test_hnn_conserves_energy_better_than_mlp():
    system = make_system("pendulum")
    data = generate_dataset(system, n_traj=8, n_steps=100, dt=0.05, seed=0)
    config = TrainConfig(learning_rate=3e-3, epochs=400, batch_size=32, intervals=(1,), window_steps=100)

    hnn = HnnModel.create(1, (32, 32), np.random.default_rng(0))
    train_hnn(data, hnn, config)
    mlp = MlpDynamicsModel.create(2, (32, 32), np.random.default_rng(0))
    train_mlp(data, mlp, config)

    z0 = data.states[:, 0]
    drift = {}
    for name, model in (("hnn", hnn), ("mlp", mlp)):
        traj = model_rollout(model, z0, 400, data.dt)
        curve, _ = energy_deviation(traj, system.energy)
        drift[name] = np.nanmax(np.abs(curve))
    assert drift["hnn"] < drift["mlp"]


def _ordering_runs(system_name, params, dt, hidden, seeds=(0, 1, 2)):
    """Rollout MSEs of FS-HNN (combined and per component) and a union HNN, per seed."""
    system = make_system(system_name, params)
    data = generate_dataset(system, n_traj=8, n_steps=1000, dt=dt, seed=100)
    config = dict(
        learning_rate=3e-3, batch_size=64, intervals=(1, 2, 3), window_steps=300
    )
    z0 = data.states[:, 0]
    runs = []
    for seed in seeds:
        fs = FsHnnOdeModel.create(
            system.dof, [1, 2, 3], hidden, (8,), np.random.default_rng(seed)
        )
        train_fs_hnn(
            data, fs, TrainConfig(epochs=300, combiner_epochs=150, seed=seed, **config)
        )
        hnn = HnnModel.create(system.dof, hidden, np.random.default_rng(seed))
        train_hnn(
            data, hnn, TrainConfig(epochs=450, union_resolutions=True, seed=seed, **config)
        )
        runs.append(
            {
                "Com.": rollout_mse(model_rollout(fs, z0, 1000, dt), data),
                "components": [
                    rollout_mse(model_rollout(fs, z0, 1000, dt, component=k), data)
                    for k in range(3)
                ],
                "hnn": rollout_mse(model_rollout(hnn, z0, 1000, dt), data),
            }
        )
    return runs


def _median(runs, key):
    return np.median([run[key] for run in runs], axis=0)


@pytest.fixture(scope="module")
def pendulum_runs():
    return _ordering_runs("pendulum", {"g": 1.0, "L": 1.0}, 0.01, (32, 32))


@pytest.mark.slow
def test_combined_pendulum_model_beats_single_scales(pendulum_runs):
    combined = _median(pendulum_runs, "Com.")
    assert combined < 1e-2
    assert combined <= np.min(_median(pendulum_runs, "components"))
    assert combined <= _median(pendulum_runs, "hnn")


@pytest.mark.slow
def test_single_scale_models_degrade_with_interval(pendulum_runs):
    errors = _median(pendulum_runs, "components")
    assert np.all(np.isfinite(errors))
    assert np.all(np.diff(errors) >= 0)


@pytest.mark.slow
def test_combined_fput_model_beats_single_scales():
    runs = _ordering_runs("fput", {"N": 8}, 0.01, (64, 64))
    combined = _median(runs, "Com.")
    assert np.isfinite(combined)
    assert combined <= np.min(_median(runs, "components"))


@pytest.mark.slow
def test_shallow_water_rollout_and_learned_energy():
    system = make_system("swe", {"N": 32, "randomize_center": True})
    data = generate_dataset(system, n_traj=4, n_steps=100, seed=0)
    model = build_model(
        ModelConfig(hidden=(32,), latent=8, stencil=8, operator_channels=8),
        TrainConfig(intervals=(1, 2, 3)),
        data,
        np.random.default_rng(0),
    )
    config = TrainConfig(
        learning_rate=1e-3,
        epochs=100,
        combiner_epochs=50,
        batch_size=16,
        intervals=(1, 2, 3),
        window_steps=60,
    )
    train_model(data, model, config)

    pred = model_rollout(model, data.states[:, 0], 50, data.dt)
    truth = data.states[:, :51]
    depth = system.params.H
    pred_eta, true_eta = pred.states[:, :, 0] - depth, truth[:, :, 0] - depth
    anomaly_mse = np.mean((pred_eta - true_eta) ** 2)
    assert anomaly_mse < 1e-2

    for trajectory in pred.states:
        energy = field_hamiltonian(model, trajectory)
        drift = np.max(np.abs(energy - energy[0])) / np.abs(energy[0])
        assert drift < 0.05
