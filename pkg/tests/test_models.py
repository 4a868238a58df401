import numpy as np
import pytest

from fshnnlib.config import ModelConfig, TrainConfig
from fshnnlib.core import FieldState, PhaseState, TrajectoryDataset
from fshnnlib.errors import ConfigError, ShapeError
from fshnnlib.integrators import leapfrog_step, rollout, split_stepper
from fshnnlib.io import read_json
from fshnnlib.models import (
    AnalyticHamiltonian,
    CombinerSpec,
    FsHnnOdeModel,
    FsHnnPdeModel,
    HnnModel,
    MlpDynamicsModel,
    build_model,
    combiner_forward,
    energy_and_gradient,
    field_hamiltonian,
    fit_normalization,
    hamiltonian_vector_field,
    load_model,
    model_rollout,
    multiscale_hamiltonian,
    pde_step,
    project_orthogonal,
    save_model,
)
from fshnnlib.models.pde import pde_increment
from fshnnlib.systems import make_system
from fshnnlib.systems.pendulum import pendulum_split


class QuadraticEnergy:
    """``H = |z|**2 / 2``: the harmonic oscillator with unit mass and stiffness."""

    kind = "quadratic"
    groups: dict = {}

    def record(self, tape, nodes, z, component=None):
        return tape.scale(tape.sum(tape.square(z), axis=-1), 0.5)


class SteepEnergy:
    """``H = p**2 / 2 + q**8 / 8``; explicit steps from large ``q`` overflow."""

    kind = "steep"
    groups: dict = {}

    def record(self, tape, nodes, z, component=None):
        q, p = tape.slice(z, 0, 1), tape.slice(z, 1, 2)
        q8 = tape.square(tape.square(tape.square(q)))
        return tape.sum(tape.add(tape.scale(q8, 0.125), tape.scale(tape.square(p), 0.5)), axis=-1)


def small_pde_model(rng, intervals=(1, 2)):
    return FsHnnPdeModel.create(
        channels=2,
        grid_shape=(4, 4),
        intervals=list(intervals),
        rng=rng,
        latent=3,
        hidden=(4,),
        stencil=2,
        operator_channels=3,
        operator_depth=1,
        combiner_hidden=(4,),
    )


def test_oscillator_vector_field_example():
    field = hamiltonian_vector_field(QuadraticEnergy(), np.array([1.0, 2.0]))
    np.testing.assert_allclose(field, [2.0, -1.0])
    state = PhaseState.from_qp([1.0], [2.0])
    np.testing.assert_allclose(hamiltonian_vector_field(QuadraticEnergy(), state), [2.0, -1.0])


def test_hnn_vector_field_is_orthogonal_to_gradient(rng):
    model = HnnModel.create(2, (8, 8), rng)
    z = rng.normal(size=(6, 4))
    _, gradient = energy_and_gradient(model, z)
    field = hamiltonian_vector_field(model, z)
    assert field.shape == z.shape
    np.testing.assert_allclose(np.sum(gradient * field, axis=-1), 0.0, atol=1e-12)


def test_hnn_needs_hidden_layer(rng):
    with pytest.raises(ValueError):
        HnnModel.create(1, (), rng)
    with pytest.raises(ValueError):
        ModelConfig(hidden=())


@pytest.mark.parametrize("name", ["pendulum", "fput", "two_scale"])
def test_analytic_hamiltonian_reproduces_system_rhs(name, rng):
    system = make_system(name)
    z = rng.normal(scale=0.5, size=(4, 2 * system.dof))
    np.testing.assert_allclose(
        hamiltonian_vector_field(AnalyticHamiltonian(system), z),
        system.rhs(z),
        rtol=1e-10,
        atol=1e-10,
    )


def test_fresh_combiner_is_plain_sum(rng):
    spec = CombinerSpec(3)
    m = rng.normal(size=(5, 3))
    np.testing.assert_allclose(combiner_forward(spec, spec.init_params(rng), m), m.sum(-1))

    model = FsHnnOdeModel.create(1, [1, 2, 4], (6,), (4,), rng)
    z = rng.normal(size=(5, 2))
    energies = model.component_energies(z)
    assert energies.shape == (5, 3)
    np.testing.assert_allclose(multiscale_hamiltonian(model, z), energies.sum(-1))
    np.testing.assert_allclose(model.combine(energies), energies.sum(-1))


def test_combiner_size_and_width(rng):
    for hidden in [(), (4,), (5, 3)]:
        spec = CombinerSpec(3, hidden)
        assert spec.param_count == len(spec.init_params(rng).values)
    spec = CombinerSpec(3, ())
    m = rng.normal(size=(5, 3))
    np.testing.assert_allclose(combiner_forward(spec, spec.init_params(rng), m), m.sum(-1))
    with pytest.raises(ShapeError):
        combiner_forward(spec, spec.init_params(rng), rng.normal(size=(5, 4)))


def test_fs_hnn_rejects_bad_intervals(rng):
    with pytest.raises(ValueError):
        FsHnnOdeModel.create(1, [2, 1], (4,), (4,), rng)
    with pytest.raises(ValueError):
        FsHnnOdeModel.create(1, [0, 1], (4,), (4,), rng)


def test_project_orthogonal_examples():
    out = project_orthogonal(np.array([1.0, 0.0]), np.array([0.0, 1.0]), 1e-8)
    np.testing.assert_allclose(out, [0.0, 1.0])
    out = project_orthogonal(np.array([1.0, 0.0]), np.array([1.0, 1.0]), 1e-8)
    np.testing.assert_allclose(out, [0.0, 1.0], atol=1e-8)
    out = project_orthogonal(np.zeros(2), np.array([1.0, 1.0]), 1e-8)
    np.testing.assert_array_equal(out, [1.0, 1.0])

    with pytest.raises(ValueError):
        project_orthogonal(np.ones(2), np.ones(2), 0.0)
    with pytest.raises(ShapeError):
        project_orthogonal(np.ones(2), np.ones(3), 1e-8)


def test_project_orthogonal_batches_independently(rng):
    g = rng.normal(size=(3, 2, 4, 4))
    raw = rng.normal(size=(3, 2, 4, 4))
    out = project_orthogonal(g, raw, 1e-12, batch_ndim=1)
    inner = np.sum(g * out, axis=(1, 2, 3))
    np.testing.assert_allclose(inner, 0.0, atol=1e-10)
    np.testing.assert_allclose(out[1], project_orthogonal(g[1], raw[1], 1e-12))


def test_project_orthogonal_random_fields():
    xi = 1e-8
    rng = np.random.default_rng(7)
    checked = 0
    while checked < 1000:
        size = int(rng.integers(2, 257))
        g = rng.normal(scale=10.0 ** rng.uniform(-2, 2), size=size)
        norm = float(g @ g)
        if norm < 1e3 * xi:
            continue
        raw = rng.normal(scale=10.0 ** rng.uniform(-2, 2), size=size)
        out = project_orthogonal(g, raw, xi)
        ratio = abs(float(g @ out)) / (np.sqrt(norm) * np.linalg.norm(raw))
        # Exact residual is cos(g, raw) * xi / (|g|**2 + xi).
        assert ratio <= xi / (norm + xi) + 1e-12
        if norm >= 1e-2:
            assert ratio < 1e-6
        checked += 1


def test_pde_step_with_zero_operator_is_identity(rng):
    model = small_pde_model(rng)
    model.operator_params.values[:] = 0.0
    z = rng.normal(size=(2, 4, 4))
    np.testing.assert_allclose(pde_step(model, z), z, atol=1e-12)

    field = FieldState(z, dx=0.25, dy=0.25, channels=("a", "b"))
    stepped = pde_step(model, field)
    assert isinstance(stepped, FieldState)
    np.testing.assert_allclose(stepped.values, z, atol=1e-12)

    with pytest.raises(ShapeError):
        pde_step(model, np.zeros((3, 4, 4)))


def test_pde_increment_is_orthogonal_to_energy_gradient(rng):
    model = small_pde_model(rng)
    model.operator_params.values[:] = rng.normal(scale=0.5, size=len(model.operator_params))
    zn = rng.normal(size=(2, 2, 4, 4))
    g, raw, delta = pde_increment(model, zn)
    assert g.shape == raw.shape == delta.shape == zn.shape
    for i in range(2):
        scale = np.linalg.norm(g[i]) * np.linalg.norm(raw[i])
        assert abs(np.sum(g[i] * delta[i])) <= 1e-6 * scale


def test_pde_step_scales_with_dt(rng):
    model = small_pde_model(rng)
    model.dt_model = 2.0
    z = rng.normal(size=(2, 4, 4))
    full = pde_step(model, z) - z
    half = pde_step(model, z, dt=1.0) - z
    np.testing.assert_allclose(half, 0.5 * full, atol=1e-12)


def test_field_normalization(rng):
    states = rng.normal(loc=[3.0, -1.0], scale=[2.0, 0.5], size=(50, 4, 4, 2))
    states = np.moveaxis(states, -1, -3)
    shift, scale = fit_normalization(states)
    assert shift.shape == scale.shape == (2,)
    model = small_pde_model(rng)
    model.shift, model.scale = shift, scale
    normalized = model.normalize(states)
    np.testing.assert_allclose(normalized.mean(axis=(0, 2, 3)), 0.0, atol=1e-12)
    np.testing.assert_allclose(normalized.std(axis=(0, 2, 3)), 1.0)
    np.testing.assert_allclose(model.denormalize(normalized), states)

    constant = np.ones((2, 2, 4, 4))
    assert np.all(fit_normalization(constant)[1] == 1.0)


def test_field_hamiltonian_shapes(rng):
    model = small_pde_model(rng)
    assert np.ndim(field_hamiltonian(model, rng.normal(size=(2, 4, 4)))) == 0
    assert field_hamiltonian(model, rng.normal(size=(5, 2, 4, 4))).shape == (5,)
    assert field_hamiltonian(model, rng.normal(size=(5, 2, 4, 4)), component=1).shape == (5,)


def test_rollout_of_zero_steps_keeps_initial_state(rng):
    model = HnnModel.create(1, (4,), rng)
    traj = model_rollout(model, np.array([0.3, -0.2]), 0, 0.1)
    assert traj.states.shape == (1, 1, 2)
    np.testing.assert_array_equal(traj.states[0, 0], [0.3, -0.2])
    with pytest.raises(ValueError):
        model_rollout(model, np.zeros(2), -1, 0.1)


def test_identity_mlp_rollout_is_constant(rng):
    model = MlpDynamicsModel.create(2, (4,), rng, dt_model=0.1)
    model.params.values[:] = 0.0
    traj = model_rollout(model, np.array([[1.0, 2.0], [3.0, 4.0]]), 5, 0.5)
    assert traj.states.shape == (2, 6, 2)
    np.testing.assert_array_equal(traj.states[:, -1], [[1.0, 2.0], [3.0, 4.0]])
    assert traj.dt == pytest.approx(0.1)
    assert traj.metadata["model"] == "mlp"


def test_analytic_rollout_follows_leapfrog():
    system = make_system("pendulum")
    z0 = np.array([1.0, 0.0])
    learned = model_rollout(AnalyticHamiltonian(system), z0, 100, 0.01)
    reference = rollout(split_stepper(leapfrog_step, pendulum_split(system.params), 1), z0, 0.01, 100)
    np.testing.assert_allclose(learned.states, reference.states, atol=1e-3)
    assert learned.metadata["divergence_step"] is None


def test_diverging_trajectory_is_filled_with_nan():
    z0 = np.array([[0.0, 0.0], [10.0, 0.0]])
    traj = model_rollout(SteepEnergy(), z0, 10, 1.0)
    steps = traj.metadata["divergence_steps"]
    assert steps[0] is None
    assert steps[1] is not None
    assert traj.metadata["divergence_step"] == steps[1]
    np.testing.assert_array_equal(traj.states[0], 0.0)
    assert np.all(np.isfinite(traj.states[1, : steps[1]]))
    assert np.all(np.isnan(traj.states[1, steps[1] :]))


@pytest.mark.parametrize("family", ["hnn", "mlp", "fs_hnn"])
def test_checkpoint_round_trip_ode(family, rng, linear_dataset, tmp_path):
    model = build_model(
        ModelConfig(family=family, hidden=(5,), combiner_hidden=(3,)),
        TrainConfig(intervals=(1, 2)),
        linear_dataset,
        rng,
    )
    path = str(tmp_path / "model.fsh")
    save_model(path, model, {"seed": 1})
    loaded = load_model(path)
    assert type(loaded) is type(model)
    assert loaded.header() == model.header()
    for name, params in model.groups.items():
        np.testing.assert_array_equal(loaded.groups[name].values, params.values)
    sidecar = read_json(path + ".json")
    assert sidecar["param_count"] == model.param_count
    assert model.param_count == sum(p.values.size for p in model.groups.values())


def test_checkpoint_round_trip_pde(rng, tmp_path):
    model = small_pde_model(rng)
    model.shift, model.scale = np.array([1.0, 2.0]), np.array([0.5, 3.0])
    path = str(tmp_path / "pde.fsh")
    save_model(path, model)
    loaded = load_model(path)
    z = rng.normal(size=(2, 4, 4))
    np.testing.assert_array_equal(pde_step(loaded, z), pde_step(model, z))
    assert read_json(path + ".json")["param_count"] == sum(
        p.values.size for p in model.groups.values()
    )

    with pytest.raises(FileNotFoundError):
        load_model(str(tmp_path / "missing.fsh"))


def test_build_model_families(rng, linear_dataset):
    train = TrainConfig(intervals=(1, 2, 4))
    fs = build_model(ModelConfig(hidden=(4,)), train, linear_dataset, rng)
    assert isinstance(fs, FsHnnOdeModel)
    assert fs.K == 3
    assert fs.intervals == [1, 2, 4]
    mlp = build_model(ModelConfig(family="mlp", hidden=(4,)), train, linear_dataset, rng)
    assert mlp.dt_model == pytest.approx(0.5)

    field_data = TrajectoryDataset(states=np.zeros((1, 3, 2, 4, 4)), dt=0.1)
    with pytest.raises(ConfigError):
        build_model(ModelConfig(family="hnn"), train, field_data, rng)
    pde = build_model(
        ModelConfig(hidden=(4,), latent=2, stencil=2, operator_channels=2), train, field_data, rng
    )
    assert isinstance(pde, FsHnnPdeModel)
    assert pde.dt_model == pytest.approx(0.1)

    odd = TrajectoryDataset(states=np.zeros((1, 3, 3)), dt=0.1)
    with pytest.raises(ConfigError):
        build_model(ModelConfig(), train, odd, rng)
