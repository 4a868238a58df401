"""
Training losses and their parameter gradients.

Each loss returns ``(loss, grads)`` where ``grads`` maps every trainable
parameter group of the model to a flat gradient in the group's layout order,
ready for ``adam_step``.

The HNN loss depends on the parameters only through ``dH/dz``, so its
gradient is one forward-over-reverse pass: with residuals
``r_q = dH/dp - qdot`` and ``r_p = dH/dq + pdot`` the gradient is the mixed
second derivative of ``sum_b H(z_b)`` in the direction ``2/B (r_p, r_q)``.
"""

from collections.abc import Collection

import numpy as np

from ..autodiff import DualTape, grad, mixed_second
from ..errors import ConfigError
from ..models.hamiltonian import HamiltonianModel, bind_groups, group_leaves, split_grads
from ..models.mlp_dynamics import MlpDynamicsModel
from ..models.pde import FsHnnPdeModel
from ..nets.resconv import resconv_record

OPERATOR = "operator"


def _check_batch(*arrays: np.ndarray) -> int:
    n = arrays[0].shape[0] if arrays[0].ndim else 0
    if n == 0:
        raise ValueError("Loss needs a non-empty batch.")
    for a in arrays[1:]:
        if a.shape != arrays[0].shape:
            raise ValueError(f"batch arrays differ in shape: {arrays[0].shape} vs {a.shape}")
    return n


def _trainable(model: HamiltonianModel, trainable: Collection[str] | None) -> list[str]:
    names = list(model.groups) if trainable is None else list(trainable)
    unknown = set(names) - set(model.groups)
    if unknown:
        raise KeyError(f"unknown parameter groups {sorted(unknown)}")
    return names


def hnn_grad_loss(
    model: HamiltonianModel,
    z: np.ndarray,
    zdot: np.ndarray,
    component: int | None = None,
    trainable: Collection[str] | None = None,
) -> tuple[float, dict[str, np.ndarray]]:
    """
    Gradient-matching loss ``mean_b |dH/dp - qdot|**2 + |dH/dq + pdot|**2``.

    Parameters
    ----------
    model : HnnModel, FsHnnOdeModel or AnalyticHamiltonian
        Energy model of canonical ``(q, p)`` states.
    z, zdot : numpy.ndarray
        States and derivative targets, both ``(B, 2d)``.
    component : int, optional
        Train one FS-HNN component on its own.
    trainable : collection of str, optional
        Groups to differentiate; all groups by default.

    Returns
    -------
    tuple
        Scalar loss and a flat gradient per trainable group.

    Raises
    ------
    ValueError
        If the batch is empty or the shapes differ.
    NonFiniteError
        If the energy or its gradient overflows.
    """
    z = np.asarray(z, dtype=np.float64)
    zdot = np.asarray(zdot, dtype=np.float64)
    n = _check_batch(z, zdot)
    names = _trainable(model, trainable)

    tape = DualTape()
    z_node = tape.leaf(z)
    nodes, leaves = bind_groups(tape, model.groups, trainable=names)
    energies = model.record(tape, nodes, z_node, component)
    tape.set_output(tape.sum(energies))
    (gradient,) = grad(tape, [z_node])

    d = z.shape[-1] // 2
    r_q = gradient[:, d:] - zdot[:, :d]
    r_p = gradient[:, :d] + zdot[:, d:]
    loss = float(np.sum(r_q**2) + np.sum(r_p**2)) / n
    if not names:
        return loss, {}

    direction = (2.0 / n) * np.concatenate([r_p, r_q], axis=-1)
    values = mixed_second(tape, [z_node], [direction], group_leaves(leaves, names))
    return loss, split_grads(model.groups, names, values)


def pde_onestep_loss(
    model: FsHnnPdeModel,
    z_t: np.ndarray,
    z_next: np.ndarray,
    step_scale: float = 1.0,
    component: int | None = None,
    trainable: Collection[str] | None = None,
) -> tuple[float, dict[str, np.ndarray]]:
    """
    One-step loss ``mean |z_t + step_scale * dz(z_t) - z_next|**2`` in normalized coordinates.

    The energy gradient ``g`` is taken on one tape; the operator, the
    projection and the squared error are recorded on a second tape with ``g``
    as a leaf. Its adjoint ``gbar`` turns the energy parameter gradient into a
    mixed second derivative of the first tape in direction ``gbar``.

    Parameters
    ----------
    model : FsHnnPdeModel
        Field model.
    z_t, z_next : numpy.ndarray
        Consecutive raw fields, ``(B, C, ny, nx)``.
    step_scale : float
        Number of model steps between ``z_t`` and ``z_next`` (the
        subsampling interval for a component trained on coarser data).
    component : int, optional
        Use one DeepONet energy instead of the combined one.
    trainable : collection of str, optional
        Groups to differentiate; all groups by default.
    """
    z_t = np.asarray(z_t, dtype=np.float64)
    z_next = np.asarray(z_next, dtype=np.float64)
    _check_batch(z_t, z_next)
    if z_t.ndim != 4:
        raise ValueError(f"Expected a batch of fields (B, C, ny, nx), got {z_t.shape}.")
    model.check_field(z_t)
    names = _trainable(model, trainable)
    energy_names = [name for name in names if name != OPERATOR]
    zn = model.normalize(z_t)
    target = model.normalize(z_next)

    energy_tape = DualTape()
    z_node = energy_tape.leaf(zn)
    nodes, leaves = bind_groups(energy_tape, model.groups, trainable=energy_names)
    energies = model.record(energy_tape, nodes, z_node, component)
    energy_tape.set_output(energy_tape.sum(energies))
    (gradient,) = grad(energy_tape, [z_node])
    g = gradient / model.cell_area

    tape = DualTape()
    g_node = tape.leaf(g)
    operator_nodes = model.operator_params.bind(tape, trainable=OPERATOR in names)
    raw = resconv_record(tape, model.operator_spec, operator_nodes, g_node)
    axes = (1, 2, 3)
    inner = tape.sum(tape.mul(g_node, raw), axis=axes)
    norm = tape.add(tape.sum(tape.square(g_node), axis=axes), tape.const(model.xi))
    coef = tape.reshape(tape.mul(inner, tape.reciprocal(norm)), (zn.shape[0], 1, 1, 1))
    delta = tape.sub(raw, tape.mul(coef, g_node))
    pred = tape.add(tape.const(zn), tape.scale(delta, step_scale))
    error = tape.sub(pred, tape.const(target))
    loss = tape.scale(tape.sum(tape.square(error)), 1.0 / zn.size)
    tape.set_output(loss)

    operator_leaves = [operator_nodes[block] for block in model.operator_params.names]
    wrt = [g_node, *operator_leaves] if OPERATOR in names else [g_node]
    found = grad(tape, wrt)
    g_bar = found[0]

    grads: dict[str, np.ndarray] = {}
    if energy_names:
        values = mixed_second(
            energy_tape, [z_node], [g_bar], group_leaves(leaves, energy_names)
        )
        values = [v / model.cell_area for v in values]
        grads.update(split_grads(model.groups, energy_names, values))
    if OPERATOR in names:
        grads[OPERATOR] = model.operator_params.flatten(
            dict(zip(model.operator_params.names, found[1:]))
        )
    return float(tape.value(loss)), {name: grads[name] for name in names}


def mlp_onestep_loss(
    model: MlpDynamicsModel,
    z_t: np.ndarray,
    z_next: np.ndarray,
) -> tuple[float, dict[str, np.ndarray]]:
    """Mean squared one-step error of the black-box predictor."""
    z_t = np.asarray(z_t, dtype=np.float64)
    z_next = np.asarray(z_next, dtype=np.float64)
    _check_batch(z_t, z_next)
    tape = DualTape()
    z_node = tape.const(z_t)
    nodes, leaves = bind_groups(tape, model.groups, trainable=["net"])
    pred = model.record(tape, nodes, z_node)
    error = tape.sub(pred, tape.const(z_next))
    loss = tape.scale(tape.sum(tape.square(error)), 1.0 / z_t.size)
    tape.set_output(loss)
    values = grad(tape, leaves["net"])
    return float(tape.value(loss)), split_grads(model.groups, ["net"], values)


def default_loss(model: object) -> str:
    """Loss kind matching a model family."""
    if isinstance(model, FsHnnPdeModel):
        return "pde_onestep"
    if isinstance(model, MlpDynamicsModel):
        return "mlp_onestep"
    return "hnn_grad"


def resolve_loss(model: object, kind: str) -> str:
    """Validate a configured loss kind against the model family; ``"auto"`` picks it."""
    expected = default_loss(model)
    if kind == "auto":
        return expected
    if kind != expected:
        raise ConfigError(
            f"Loss '{kind}' does not apply to {getattr(model, 'kind', type(model).__name__)} "
            f"models; use '{expected}'."
        )
    return kind
