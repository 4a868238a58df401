"""
Recording tape with reverse-mode and forward-over-reverse passes.

A ``DualTape`` is an append-only list of nodes. Every node stores its opcode,
the indices of its inputs (which always precede it) and its cached primal
value, a float64 numpy array that may carry a leading batch axis. Leaves are
the inputs of the recorded function; trainable leaves are additionally listed
in ``params``.

The module level functions ``evaluate``, ``grad`` and ``mixed_second`` never
mutate the tape, so a finished tape can be shared read-only between threads.
"""

from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from ..errors import NonFiniteError, TapeError
from .rules import RULES, MaybeArray

Array = np.ndarray


@dataclass(frozen=True)
class Node:
    opcode: str
    inputs: tuple[int, ...]
    value: Array
    attrs: dict[str, Any] = field(default_factory=dict)


def _check_finite(value: Array, index: int, opcode: str) -> None:
    if not np.all(np.isfinite(value)):
        raise NonFiniteError(
            f"non-finite value produced by node {index} ({opcode})", node=index
        )


class DualTape:
    """
    Computation record for one function evaluation.

    Attributes
    ----------
    nodes : list of Node
        Topologically ordered node list.
    leaves : list of int
        Node indices of all leaves, in creation order.
    params : list of int
        Node indices of the trainable leaves.
    outputs : list of int
        Designated output nodes.
    """

    def __init__(self) -> None:
        self.nodes: list[Node] = []
        self.leaves: list[int] = []
        self.params: list[int] = []
        self.outputs: list[int] = []

    def __len__(self) -> int:
        return len(self.nodes)

    def __repr__(self) -> str:
        return (
            f"DualTape(nodes={len(self.nodes)}, leaves={len(self.leaves)}, "
            f"params={len(self.params)}, outputs={self.outputs})"
        )

    def value(self, index: int) -> Array:
        return self.nodes[index].value

    # Leaves.

    def leaf(self, value: Any, trainable: bool = False) -> int:
        array = np.array(value, dtype=np.float64)
        index = len(self.nodes)
        _check_finite(array, index, "leaf")
        self.nodes.append(Node("leaf", (), array))
        self.leaves.append(index)
        if trainable:
            self.params.append(index)
        return index

    def const(self, value: Any) -> int:
        array = np.array(value, dtype=np.float64)
        index = len(self.nodes)
        _check_finite(array, index, "const")
        self.nodes.append(Node("const", (), array))
        return index

    def set_output(self, *indices: int) -> None:
        self.outputs = list(indices)

    def _record(
        self, opcode: str, inputs: Sequence[int], attrs: dict[str, Any] | None = None
    ) -> int:
        rule = RULES[opcode]
        attrs = {} if attrs is None else attrs
        if rule.n_inputs is not None and len(inputs) != rule.n_inputs:
            raise TapeError(f"{opcode} expects {rule.n_inputs} inputs, got {len(inputs)}")
        for i in inputs:
            if not 0 <= i < len(self.nodes):
                raise TapeError(f"{opcode} refers to unknown node {i}")
        value = rule.forward([self.nodes[i].value for i in inputs], attrs)
        index = len(self.nodes)
        _check_finite(value, index, opcode)
        self.nodes.append(Node(opcode, tuple(inputs), value, attrs))
        return index

    # Opcodes.

    def add(self, a: int, b: int) -> int:
        return self._record("add", (a, b))

    def sub(self, a: int, b: int) -> int:
        return self.add(a, self.neg(b))

    def mul(self, a: int, b: int) -> int:
        return self._record("mul", (a, b))

    def scale(self, a: int, factor: float) -> int:
        return self.mul(a, self.const(factor))

    def neg(self, a: int) -> int:
        return self._record("neg", (a,))

    def reciprocal(self, a: int) -> int:
        return self._record("reciprocal", (a,))

    def sin(self, a: int) -> int:
        return self._record("sin", (a,))

    def cos(self, a: int) -> int:
        return self._record("cos", (a,))

    def exp(self, a: int) -> int:
        return self._record("exp", (a,))

    def tanh(self, a: int) -> int:
        return self._record("tanh", (a,))

    def softplus(self, a: int) -> int:
        return self._record("softplus", (a,))

    def square(self, a: int) -> int:
        return self._record("square", (a,))

    def sum(self, a: int, axis: int | tuple[int, ...] | None = None) -> int:
        return self._record("sum", (a,), {"axis": axis})

    def dot(self, a: int, b: int) -> int:
        """Inner product over the last axis, broadcasting leading axes."""
        return self._record("dot", (a, b))

    def affine(self, x: int, weight: int, bias: int) -> int:
        """``x @ weight.T + bias`` with ``weight`` of shape (out, in)."""
        return self._record("affine", (x, weight, bias))

    def reshape(self, a: int, shape: tuple[int, ...]) -> int:
        return self._record("reshape", (a,), {"shape": tuple(shape)})

    def slice(self, a: int, start: int, stop: int, axis: int = -1) -> int:
        return self._record("slice", (a,), {"start": start, "stop": stop, "axis": axis})

    def concat(self, items: Sequence[int], axis: int = -1) -> int:
        return self._record("concat", tuple(items), {"axis": axis})

    def avg_pool(self, a: int, factor: int) -> int:
        """Average over non-overlapping ``factor`` x ``factor`` blocks of the last two axes."""
        return self._record("avg_pool", (a,), {"factor": int(factor)})

    def conv2d(self, x: int, kernel: int) -> int:
        """Periodic convolution of (batch, c_in, ny, nx) with (c_out, c_in, k, k)."""
        return self._record("conv2d", (x, kernel))


def evaluate(
    tape: DualTape, leaf_values: Sequence[Any], outputs: Sequence[int] | None = None
) -> list[Array]:
    """
    Re-run a recorded tape at new leaf values.

    Parameters
    ----------
    tape : DualTape
        Finished tape. It is not modified.
    leaf_values : sequence of array_like
        One value per leaf, in ``tape.leaves`` order, each with the recorded shape.
    outputs : sequence of int, optional
        Nodes to return. Defaults to ``tape.outputs``.

    Returns
    -------
    list of numpy.ndarray
        Primal values of the requested nodes.

    Raises
    ------
    TapeError
        If the number or shapes of leaf values do not match the tape.
    NonFiniteError
        If any node evaluates to ``nan`` or ``inf``; ``err.node`` names it.
    """
    if len(leaf_values) != len(tape.leaves):
        raise TapeError(
            f"tape has {len(tape.leaves)} leaves, got {len(leaf_values)} values"
        )
    new_leaf = dict(zip(tape.leaves, leaf_values))
    values: list[Array] = []
    for index, node in enumerate(tape.nodes):
        if node.opcode == "leaf":
            value = np.array(new_leaf[index], dtype=np.float64)
            if value.shape != node.value.shape:
                raise TapeError(
                    f"leaf {index} has shape {node.value.shape}, got {value.shape}"
                )
        elif node.opcode == "const":
            value = node.value
        else:
            value = RULES[node.opcode].forward(
                [values[i] for i in node.inputs], node.attrs
            )
        _check_finite(value, index, node.opcode)
        values.append(value)
    wanted = tape.outputs if outputs is None else outputs
    return [values[i] for i in wanted]


def _scalar_output(tape: DualTape) -> int:
    if len(tape.outputs) != 1:
        raise TapeError(f"gradient needs exactly one output, tape has {tape.outputs}")
    out = tape.outputs[0]
    if tape.nodes[out].value.size != 1:
        raise TapeError(
            f"gradient needs a scalar output, node {out} has shape "
            f"{tape.nodes[out].value.shape}"
        )
    return out


def _forward_tangents(
    tape: DualTape, seeds: dict[int, Array]
) -> list[MaybeArray]:
    tangents: list[MaybeArray] = []
    for index, node in enumerate(tape.nodes):
        if node.opcode in ("leaf", "const"):
            tangents.append(seeds.get(index))
            continue
        dxs = [tangents[i] for i in node.inputs]
        if all(dx is None for dx in dxs):
            tangents.append(None)
            continue
        xs = [tape.nodes[i].value for i in node.inputs]
        tangents.append(RULES[node.opcode].jvp(xs, dxs, node.value, node.attrs))
    return tangents


def _reverse(
    tape: DualTape, output: int, tangents: list[MaybeArray] | None
) -> tuple[list[MaybeArray], list[MaybeArray]]:
    n = len(tape.nodes)
    adjoints: list[MaybeArray] = [None] * n
    adjoint_tangents: list[MaybeArray] = [None] * n
    adjoints[output] = np.ones_like(tape.nodes[output].value)
    for index in range(output, -1, -1):
        node = tape.nodes[index]
        gy = adjoints[index]
        if gy is None or not node.inputs:
            continue
        rule = RULES[node.opcode]
        xs = [tape.nodes[i].value for i in node.inputs]
        grads = rule.vjp(xs, node.value, gy, node.attrs)
        for i, g in zip(node.inputs, grads):
            if g is not None:
                prev = adjoints[i]
                adjoints[i] = g if prev is None else prev + g
        if tangents is None:
            continue
        dxs = [tangents[i] for i in node.inputs]
        dgy = adjoint_tangents[index]
        if dgy is None and all(dx is None for dx in dxs):
            continue
        dgrads = rule.vjp_dot(xs, dxs, node.value, tangents[index], gy, dgy, node.attrs)
        for i, dg in zip(node.inputs, dgrads):
            if dg is not None:
                prev = adjoint_tangents[i]
                adjoint_tangents[i] = dg if prev is None else prev + dg
    return adjoints, adjoint_tangents


def _collect(tape: DualTape, wrt: Sequence[int], found: list[MaybeArray]) -> list[Array]:
    result = []
    for i in wrt:
        g = found[i]
        shape = tape.nodes[i].value.shape
        result.append(np.zeros(shape) if g is None else np.array(g).reshape(shape))
    return result


def grad(tape: DualTape, wrt: Sequence[int]) -> list[Array]:
    """
    Reverse-mode gradient of the single scalar output.

    Parameters
    ----------
    tape : DualTape
        Tape with exactly one designated output of size 1.
    wrt : sequence of int
        Node indices (usually leaves) to differentiate with respect to.

    Returns
    -------
    list of numpy.ndarray
        One gradient per entry of ``wrt``, shaped like the node value. Nodes
        the output does not depend on get zeros.
    """
    out = _scalar_output(tape)
    adjoints, _ = _reverse(tape, out, None)
    return _collect(tape, wrt, adjoints)


def mixed_second(
    tape: DualTape,
    inputs: Sequence[int],
    direction: Sequence[Any],
    wrt: Sequence[int] | None = None,
) -> list[Array]:
    """
    Directional mixed second derivative ``d/dtheta [v . grad_z H]``.

    The forward tangent ``v`` is pushed through the primal graph, then carried
    through the reverse pass; the tangents of the adjoints at ``wrt`` are the
    result (forward-over-reverse).

    Parameters
    ----------
    tape : DualTape
        Tape whose single scalar output is ``H(z; theta)``.
    inputs : sequence of int
        Leaves forming ``z``.
    direction : sequence of array_like
        Direction ``v``, one array per entry of ``inputs`` with matching shape.
    wrt : sequence of int, optional
        Nodes forming ``theta``. Defaults to ``tape.params``.

    Returns
    -------
    list of numpy.ndarray
        One array per entry of ``wrt``.
    """
    if len(direction) != len(inputs):
        raise TapeError(
            f"direction has {len(direction)} parts for {len(inputs)} input nodes"
        )
    seeds: dict[int, Array] = {}
    for i, v in zip(inputs, direction):
        v = np.asarray(v, dtype=np.float64)
        if v.shape != tape.nodes[i].value.shape:
            raise TapeError(
                f"direction for node {i} has shape {v.shape}, expected "
                f"{tape.nodes[i].value.shape}"
            )
        seeds[i] = v
    out = _scalar_output(tape)
    tangents = _forward_tangents(tape, seeds)
    _, adjoint_tangents = _reverse(tape, out, tangents)
    return _collect(tape, tape.params if wrt is None else wrt, adjoint_tangents)
