from functools import partial

import numpy as np
import pytest

from fshnnlib.autodiff import DualTape, ParamVector, evaluate, grad, mixed_second
from fshnnlib.errors import NonFiniteError, ShapeError, TapeError
from fshnnlib.nets.mlp import MlpSpec, mlp_forward, mlp_record


def square_tape():
    tape = DualTape()
    x = tape.leaf(3.0)
    tape.set_output(tape.square(x))
    return tape, x


def test_evaluate_examples():
    tape, _ = square_tape()
    assert evaluate(tape, [3.0])[0] == pytest.approx(9.0)
    assert evaluate(tape, [4.0])[0] == pytest.approx(16.0)

    tape = DualTape()
    x = tape.leaf(5.0)
    tape.set_output(x)
    assert evaluate(tape, [5.0])[0] == pytest.approx(5.0)

    tape = DualTape()
    x, y = tape.leaf(2.0), tape.leaf(7.0)
    tape.set_output(tape.mul(x, y))
    assert evaluate(tape, [2.0, 7.0])[0] == pytest.approx(14.0)


def test_evaluate_is_deterministic(rng):
    spec = MlpSpec(3, (8,), 1)
    params = spec.init_params(rng)
    tape = DualTape()
    x = tape.leaf(rng.normal(size=(5, 3)))
    out = tape.sum(mlp_record(tape, spec, params.bind(tape), x))
    tape.set_output(out)
    values = [tape.value(i) for i in tape.leaves]
    first = evaluate(tape, values)[0]
    second = evaluate(tape, values)[0]
    assert first.tobytes() == second.tobytes()


def test_evaluate_rejects_wrong_leaf_count():
    tape, _ = square_tape()
    with pytest.raises(TapeError):
        evaluate(tape, [1.0, 2.0])


def test_non_finite_value_names_node():
    tape = DualTape()
    x = tape.leaf(0.0)
    with pytest.raises(NonFiniteError) as info:
        tape.reciprocal(x)
    assert info.value.node == 1


def test_grad_examples():
    tape, x = square_tape()
    (g,) = grad(tape, [x])
    assert g == pytest.approx(6.0)

    tape = DualTape()
    z = tape.leaf([1.0, 2.0])
    tape.set_output(tape.scale(tape.sum(tape.square(z)), 0.5))
    (g,) = grad(tape, [z])
    np.testing.assert_allclose(g, [1.0, 2.0])


def test_grad_needs_single_scalar_output():
    tape = DualTape()
    x = tape.leaf([1.0, 2.0])
    y = tape.square(x)
    tape.set_output(y)
    with pytest.raises(TapeError):
        grad(tape, [x])
    tape.set_output(tape.sum(y), tape.sum(x))
    with pytest.raises(TapeError):
        grad(tape, [x])


def test_grad_of_unused_leaf_is_zero():
    tape = DualTape()
    x = tape.leaf([1.0, 2.0])
    unused = tape.leaf([[1.0, 2.0], [3.0, 4.0]])
    tape.set_output(tape.sum(tape.sin(x)))
    (g,) = grad(tape, [unused])
    np.testing.assert_array_equal(g, np.zeros((2, 2)))


@pytest.mark.parametrize("opcode", ["sin", "cos", "exp", "tanh", "softplus", "square"])
def test_unary_opcodes_match_finite_differences(opcode, rng, finite_difference):
    x0 = rng.uniform(-2.0, 2.0, size=20)

    def f(x):
        tape = DualTape()
        node = tape.leaf(x)
        tape.set_output(tape.sum(getattr(tape, opcode)(node)))
        return float(tape.value(tape.outputs[0]))

    tape = DualTape()
    node = tape.leaf(x0)
    tape.set_output(tape.sum(getattr(tape, opcode)(node)))
    (g,) = grad(tape, [node])
    np.testing.assert_allclose(g, finite_difference(f, x0), rtol=1e-6, atol=1e-9)


def test_conv_pool_and_dot_match_finite_differences(rng, finite_difference):
    x0 = rng.uniform(-2.0, 2.0, size=(1, 2, 4, 4))
    kernel = rng.uniform(-1.0, 1.0, size=(2, 2, 3, 3))
    weights = rng.uniform(-1.0, 1.0, size=8)

    def record(tape, x):
        conv = tape.tanh(tape.conv2d(x, tape.const(kernel)))
        pooled = tape.reshape(tape.avg_pool(conv, 2), (8,))
        return tape.dot(pooled, tape.const(weights))

    def f(flat):
        tape = DualTape()
        out = record(tape, tape.leaf(flat.reshape(x0.shape)))
        return float(tape.value(out))

    tape = DualTape()
    node = tape.leaf(x0)
    tape.set_output(record(tape, node))
    (g,) = grad(tape, [node])
    expected = finite_difference(f, x0.ravel()).reshape(x0.shape)
    np.testing.assert_allclose(g, expected, rtol=1e-6, atol=1e-9)


def test_grad_is_linear(rng):
    x0 = rng.uniform(-2.0, 2.0, size=6)

    def gradient(a, b):
        tape = DualTape()
        x = tape.leaf(x0)
        f = tape.sum(tape.sin(x))
        g = tape.sum(tape.square(x))
        tape.set_output(tape.add(tape.scale(f, a), tape.scale(g, b)))
        return grad(tape, [x])[0]

    np.testing.assert_allclose(
        gradient(2.0, -3.0), 2.0 * gradient(1.0, 0.0) - 3.0 * gradient(0.0, 1.0)
    )


def test_mlp_parameter_gradient_matches_finite_differences(rng, finite_difference):
    spec = MlpSpec(2, (3,), 1)
    params = spec.init_params(rng)
    x = rng.uniform(-2.0, 2.0, size=(4, 2))

    tape = DualTape()
    nodes = params.bind(tape)
    out = mlp_record(tape, spec, nodes, tape.const(x))
    tape.set_output(tape.sum(out))
    blocks = dict(zip(params.names, grad(tape, [nodes[n] for n in params.names])))
    analytic = params.flatten(blocks)

    def f(values):
        return float(np.sum(mlp_forward(spec, ParamVector(values, params.layout), x)))

    np.testing.assert_allclose(
        analytic, finite_difference(f, params.values), rtol=1e-6, atol=1e-9
    )


def test_mixed_second_bilinear_example():
    tape = DualTape()
    z = tape.leaf([3.0, 5.0])
    theta = tape.leaf(2.0, trainable=True)
    q, p = tape.slice(z, 0, 1), tape.slice(z, 1, 2)
    tape.set_output(tape.sum(tape.mul(tape.mul(q, p), theta)))
    (d,) = mixed_second(tape, [z], [np.array([0.0, 1.0])])
    assert d == pytest.approx(3.0)


def test_mixed_second_without_parameter_dependence_is_zero():
    tape = DualTape()
    z = tape.leaf([1.0, -1.0])
    theta = tape.leaf([0.5, 0.5], trainable=True)
    tape.set_output(tape.sum(tape.square(z)))
    (d,) = mixed_second(tape, [z], [np.ones(2)], [theta])
    np.testing.assert_array_equal(d, np.zeros(2))


def test_mixed_second_rejects_bad_direction():
    tape = DualTape()
    z = tape.leaf([1.0, 2.0])
    tape.set_output(tape.sum(tape.square(z)))
    with pytest.raises(TapeError):
        mixed_second(tape, [z], [np.ones(3)])
    with pytest.raises(TapeError):
        mixed_second(tape, [z], [])


def test_mixed_second_matches_finite_difference_of_grad(rng, finite_difference):
    spec = MlpSpec(2, (5,), 1)
    params = spec.init_params(rng)
    params.values[:] = rng.normal(size=params.values.size)
    z0 = rng.uniform(-1.0, 1.0, size=(3, 2))
    v = rng.normal(size=(3, 2))

    def directional(values):
        tape = DualTape()
        z = tape.leaf(z0)
        nodes = ParamVector(values, params.layout).bind(tape)
        tape.set_output(tape.sum(mlp_record(tape, spec, nodes, z)))
        return float(np.sum(v * grad(tape, [z])[0]))

    tape = DualTape()
    z = tape.leaf(z0)
    nodes = params.bind(tape)
    tape.set_output(tape.sum(mlp_record(tape, spec, nodes, z)))
    found = mixed_second(tape, [z], [v], [nodes[n] for n in params.names])
    analytic = params.flatten(dict(zip(params.names, found)))
    np.testing.assert_allclose(
        analytic, finite_difference(directional, params.values), rtol=1e-5, atol=1e-8
    )


def test_param_vector_layout_and_records():
    params = ParamVector.from_blocks(
        [("W0", np.arange(6.0).reshape(2, 3)), ("b0", np.array([7.0, 8.0]))]
    )
    assert len(params) == 8
    assert params.names == ["W0", "b0"]
    np.testing.assert_array_equal(params.block("b0"), [7.0, 8.0])

    restored = ParamVector.from_records(params.to_records("H"), "H")
    assert restored.layout == params.layout
    np.testing.assert_array_equal(restored.values, params.values)

    with pytest.raises(KeyError):
        params.block("W1")
    with pytest.raises(ShapeError):
        ParamVector(np.zeros(3), params.layout)


def _relative_error(found, expected):
    return np.linalg.norm(found - expected) / max(np.linalg.norm(expected), 1e-12)


def _record_energy(spec, layout, values, z_value):
    tape = DualTape()
    z = tape.leaf(z_value)
    nodes = ParamVector(values, layout).bind(tape)
    tape.set_output(tape.sum(mlp_record(tape, spec, nodes, z)))
    return tape, z, nodes


def _directional_grad(spec, layout, z0, v, values):
    tape, z, _ = _record_energy(spec, layout, values, z0)
    return float(np.sum(v * grad(tape, [z])[0]))


def _mlp_energy(spec, params, z):
    return float(np.sum(mlp_forward(spec, params, z)))


def test_random_mlp_hamiltonians_match_finite_differences(finite_difference):
    rng = np.random.default_rng(2024)
    for _ in range(100):
        d = int(rng.integers(1, 9))
        spec = MlpSpec(2 * d, (int(rng.integers(2, 9)),), 1)
        params = spec.init_params(rng)
        params.values[:] = rng.normal(scale=0.5, size=params.values.size)
        z0 = rng.uniform(-1.0, 1.0, size=(1, 2 * d))
        v = rng.normal(size=(1, 2 * d))

        tape, z, _ = _record_energy(spec, params.layout, params.values, z0)
        (g,) = grad(tape, [z])
        expected = finite_difference(partial(_mlp_energy, spec, params), z0)
        assert _relative_error(g, expected) <= 1e-6

        tape, z, nodes = _record_energy(spec, params.layout, params.values, z0)
        found = mixed_second(tape, [z], [v], [nodes[n] for n in params.names])
        analytic = params.flatten(dict(zip(params.names, found)))
        directional = partial(_directional_grad, spec, params.layout, z0, v)
        expected = finite_difference(directional, params.values)
        assert _relative_error(analytic, expected) <= 1e-5
