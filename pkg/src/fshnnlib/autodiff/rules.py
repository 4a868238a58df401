"""
Differentiation rules for every tape opcode.

Each rule provides four maps over float64 numpy arrays:

- ``forward``: primal value of the node from its input values.
- ``jvp``: tangent of the node from input tangents (forward mode).
- ``vjp``: input adjoints from the node adjoint (reverse mode).
- ``vjp_dot``: tangents of the input adjoints, i.e. the reverse pass
  differentiated along the forward tangent (forward-over-reverse).

Tangents and adjoints may be ``None``, meaning an exact zero; rules skip the
corresponding work.

Opcodes fall into three families. Elementwise unary rules only need the
function and its first two derivatives. Linear rules are their own tangent
map and their adjoint is the transpose. Bilinear rules (``mul``, ``dot``,
``conv2d``, ``affine``) are linear in each argument separately, so the
tangent of an input adjoint picks up one term from the adjoint tangent and
one from the tangent of the other argument.

None of the opcodes has a kink: tanh and softplus are smooth everywhere.
``reciprocal`` is undefined at zero, which surfaces as a non-finite value
rather than a subgradient.
"""

from collections.abc import Callable, Sequence
from typing import Any

import numpy as np
from scipy.special import expit

Array = np.ndarray
MaybeArray = Array | None
Attrs = dict[str, Any]


def _add(a: MaybeArray, b: MaybeArray) -> MaybeArray:
    if a is None:
        return b
    if b is None:
        return a
    return a + b


def unbroadcast(g: Array, shape: tuple[int, ...]) -> Array:
    """Sum ``g`` over the axes numpy broadcasting added to reach ``g.shape``."""
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


class Rule:
    n_inputs: int | None = None

    def forward(self, xs: Sequence[Array], attrs: Attrs) -> Array:
        raise NotImplementedError

    def jvp(
        self, xs: Sequence[Array], dxs: Sequence[MaybeArray], y: Array, attrs: Attrs
    ) -> MaybeArray:
        raise NotImplementedError

    def vjp(
        self, xs: Sequence[Array], y: Array, gy: Array, attrs: Attrs
    ) -> list[MaybeArray]:
        raise NotImplementedError

    def vjp_dot(
        self,
        xs: Sequence[Array],
        dxs: Sequence[MaybeArray],
        y: Array,
        dy: MaybeArray,
        gy: Array,
        dgy: MaybeArray,
        attrs: Attrs,
    ) -> list[MaybeArray]:
        raise NotImplementedError


class UnaryRule(Rule):
    """Elementwise ``y = f(x)`` described by ``f``, ``f'`` and ``f''``."""

    n_inputs = 1

    def __init__(
        self,
        f: Callable[[Array], Array],
        df: Callable[[Array, Array], Array | float],
        d2f: Callable[[Array, Array], Array | float] | None,
    ):
        self.f = f
        self.df = df
        self.d2f = d2f

    def forward(self, xs: Sequence[Array], attrs: Attrs) -> Array:
        return np.asarray(self.f(xs[0]), dtype=np.float64)

    def jvp(self, xs, dxs, y, attrs):  # type: ignore[no-untyped-def]
        if dxs[0] is None:
            return None
        return self.df(xs[0], y) * dxs[0]

    def vjp(self, xs, y, gy, attrs):  # type: ignore[no-untyped-def]
        return [gy * self.df(xs[0], y)]

    def vjp_dot(self, xs, dxs, y, dy, gy, dgy, attrs):  # type: ignore[no-untyped-def]
        out = None if dgy is None else dgy * self.df(xs[0], y)
        if dxs[0] is not None and self.d2f is not None:
            out = _add(out, gy * self.d2f(xs[0], y) * dxs[0])
        return [out]


class LinearRule(Rule):
    """A map linear in all of its inputs jointly; the adjoint is the transpose."""

    def __init__(
        self,
        forward: Callable[[Sequence[Array], Attrs], Array],
        transpose: Callable[[Array, Sequence[Array], Attrs], list[Array]],
        n_inputs: int | None = 1,
    ):
        self._forward = forward
        self._transpose = transpose
        self.n_inputs = n_inputs

    def forward(self, xs: Sequence[Array], attrs: Attrs) -> Array:
        return np.asarray(self._forward(xs, attrs), dtype=np.float64)

    def jvp(self, xs, dxs, y, attrs):  # type: ignore[no-untyped-def]
        if all(dx is None for dx in dxs):
            return None
        filled = [np.zeros_like(x) if dx is None else dx for x, dx in zip(xs, dxs)]
        return self.forward(filled, attrs)

    def vjp(self, xs, y, gy, attrs):  # type: ignore[no-untyped-def]
        return list(self._transpose(gy, xs, attrs))

    def vjp_dot(self, xs, dxs, y, dy, gy, dgy, attrs):  # type: ignore[no-untyped-def]
        if dgy is None:
            return [None] * len(xs)
        return list(self._transpose(dgy, xs, attrs))


class BilinearRule(Rule):
    """
    A map ``B(a, b)`` linear in ``a`` and in ``b`` separately.

    ``vjp_a(g, b, a)`` returns the adjoint of ``a`` for node adjoint ``g`` and
    is linear in ``g`` and in ``b``; ``a`` is only used for its shape.
    ``vjp_b(g, a, b)`` is the mirror image.
    """

    n_inputs = 2

    def __init__(
        self,
        forward: Callable[[Array, Array], Array],
        vjp_a: Callable[[Array, Array, Array], Array],
        vjp_b: Callable[[Array, Array, Array], Array],
    ):
        self._forward = forward
        self.vjp_a = vjp_a
        self.vjp_b = vjp_b

    def forward(self, xs: Sequence[Array], attrs: Attrs) -> Array:
        return np.asarray(self._forward(xs[0], xs[1]), dtype=np.float64)

    def jvp(self, xs, dxs, y, attrs):  # type: ignore[no-untyped-def]
        a, b = xs
        da, db = dxs
        out = None if da is None else self._forward(da, b)
        if db is not None:
            out = _add(out, self._forward(a, db))
        return out

    def vjp(self, xs, y, gy, attrs):  # type: ignore[no-untyped-def]
        a, b = xs
        return [self.vjp_a(gy, b, a), self.vjp_b(gy, a, b)]

    def vjp_dot(self, xs, dxs, y, dy, gy, dgy, attrs):  # type: ignore[no-untyped-def]
        a, b = xs
        da, db = dxs
        ga = None if dgy is None else self.vjp_a(dgy, b, a)
        gb = None if dgy is None else self.vjp_b(dgy, a, b)
        if db is not None:
            ga = _add(ga, self.vjp_a(gy, db, a))
        if da is not None:
            gb = _add(gb, self.vjp_b(gy, da, b))
        return [ga, gb]


def _contract(g: Array, x: Array) -> Array:
    return g.reshape(-1, g.shape[-1]).T @ x.reshape(-1, x.shape[-1])


class AffineRule(Rule):
    """``y = x @ W.T + b``: bilinear in ``(x, W)``, linear in ``b``."""

    n_inputs = 3

    def forward(self, xs: Sequence[Array], attrs: Attrs) -> Array:
        x, w, b = xs
        return np.asarray(x @ w.T + b, dtype=np.float64)

    def jvp(self, xs, dxs, y, attrs):  # type: ignore[no-untyped-def]
        x, w, _ = xs
        dx, dw, db = dxs
        out = None if dx is None else dx @ w.T
        if dw is not None:
            out = _add(out, x @ dw.T)
        if db is not None:
            out = _add(out, np.broadcast_to(db, y.shape))
        return out

    def vjp(self, xs, y, gy, attrs):  # type: ignore[no-untyped-def]
        x, w, _ = xs
        return [gy @ w, _contract(gy, x), gy.reshape(-1, gy.shape[-1]).sum(axis=0)]

    def vjp_dot(self, xs, dxs, y, dy, gy, dgy, attrs):  # type: ignore[no-untyped-def]
        x, w, _ = xs
        dx, dw, _ = dxs
        gx = None if dgy is None else dgy @ w
        gw = None if dgy is None else _contract(dgy, x)
        gb = None if dgy is None else dgy.reshape(-1, dgy.shape[-1]).sum(axis=0)
        if dw is not None:
            gx = _add(gx, gy @ dw)
        if dx is not None:
            gw = _add(gw, _contract(gy, dx))
        return [gx, gw, gb]


# Periodic 2D convolution over the last two axes.
# x: (batch, c_in, ny, nx), kernel: (c_out, c_in, k, k) with odd k.


def conv2d_periodic(x: Array, kernel: Array) -> Array:
    r = kernel.shape[-1] // 2
    out = np.zeros((x.shape[0], kernel.shape[0], *x.shape[2:]))
    for di in range(kernel.shape[2]):
        for dj in range(kernel.shape[3]):
            shifted = np.roll(x, shift=(r - di, r - dj), axis=(2, 3))
            out += np.einsum("oc,bchw->bohw", kernel[:, :, di, dj], shifted)
    return out


def _conv_vjp_x(g: Array, kernel: Array, x: Array) -> Array:
    r = kernel.shape[-1] // 2
    out = np.zeros(x.shape)
    for di in range(kernel.shape[2]):
        for dj in range(kernel.shape[3]):
            back = np.einsum("oc,bohw->bchw", kernel[:, :, di, dj], g)
            out += np.roll(back, shift=(di - r, dj - r), axis=(2, 3))
    return out


def _conv_vjp_kernel(g: Array, x: Array, kernel: Array) -> Array:
    r = kernel.shape[-1] // 2
    out = np.zeros(kernel.shape)
    for di in range(kernel.shape[2]):
        for dj in range(kernel.shape[3]):
            shifted = np.roll(x, shift=(r - di, r - dj), axis=(2, 3))
            out[:, :, di, dj] = np.einsum("bohw,bchw->oc", g, shifted)
    return out


def _sum_forward(xs: Sequence[Array], attrs: Attrs) -> Array:
    return np.asarray(np.sum(xs[0], axis=attrs.get("axis")))


def _sum_transpose(g: Array, xs: Sequence[Array], attrs: Attrs) -> list[Array]:
    shape = xs[0].shape
    axis = attrs.get("axis")
    if axis is not None:
        axes = (axis,) if isinstance(axis, int) else tuple(axis)
        g = np.expand_dims(g, tuple(a % len(shape) for a in axes))
    return [np.broadcast_to(g, shape)]


def _slice_index(ndim: int, attrs: Attrs) -> tuple[slice, ...]:
    index = [slice(None)] * ndim
    index[attrs["axis"] % ndim] = slice(attrs["start"], attrs["stop"])
    return tuple(index)


def _slice_transpose(g: Array, xs: Sequence[Array], attrs: Attrs) -> list[Array]:
    out = np.zeros(xs[0].shape)
    out[_slice_index(out.ndim, attrs)] = g
    return [out]


def _concat_transpose(g: Array, xs: Sequence[Array], attrs: Attrs) -> list[Array]:
    axis = attrs["axis"]
    cuts = np.cumsum([x.shape[axis] for x in xs])[:-1]
    return list(np.split(g, cuts, axis=axis))


def _pool_forward(xs: Sequence[Array], attrs: Attrs) -> Array:
    x = xs[0]
    f = attrs["factor"]
    ny, nx = x.shape[-2:]
    blocks = x.reshape(*x.shape[:-2], ny // f, f, nx // f, f)
    return np.asarray(blocks.mean(axis=(-3, -1)))


def _pool_transpose(g: Array, xs: Sequence[Array], attrs: Attrs) -> list[Array]:
    f = attrs["factor"]
    return [np.repeat(np.repeat(g, f, axis=-2), f, axis=-1) / (f * f)]


RULES: dict[str, Rule] = {
    "neg": UnaryRule(np.negative, lambda x, y: -1.0, None),
    "reciprocal": UnaryRule(
        np.reciprocal, lambda x, y: -(y * y), lambda x, y: 2.0 * y * y * y
    ),
    "sin": UnaryRule(np.sin, lambda x, y: np.cos(x), lambda x, y: -y),
    "cos": UnaryRule(np.cos, lambda x, y: -np.sin(x), lambda x, y: -y),
    "exp": UnaryRule(np.exp, lambda x, y: y, lambda x, y: y),
    "tanh": UnaryRule(
        np.tanh, lambda x, y: 1.0 - y * y, lambda x, y: -2.0 * y * (1.0 - y * y)
    ),
    "softplus": UnaryRule(
        lambda x: np.logaddexp(0.0, x),
        lambda x, y: expit(x),
        lambda x, y: expit(x) * (1.0 - expit(x)),
    ),
    "square": UnaryRule(np.square, lambda x, y: 2.0 * x, lambda x, y: 2.0),
    "add": LinearRule(
        lambda xs, attrs: xs[0] + xs[1],
        lambda g, xs, attrs: [unbroadcast(g, xs[0].shape), unbroadcast(g, xs[1].shape)],
        n_inputs=2,
    ),
    "sum": LinearRule(_sum_forward, _sum_transpose),
    "reshape": LinearRule(
        lambda xs, attrs: xs[0].reshape(attrs["shape"]),
        lambda g, xs, attrs: [g.reshape(xs[0].shape)],
    ),
    "slice": LinearRule(
        lambda xs, attrs: xs[0][_slice_index(xs[0].ndim, attrs)], _slice_transpose
    ),
    "concat": LinearRule(
        lambda xs, attrs: np.concatenate(xs, axis=attrs["axis"]),
        _concat_transpose,
        n_inputs=None,
    ),
    "avg_pool": LinearRule(_pool_forward, _pool_transpose),
    "mul": BilinearRule(
        np.multiply,
        lambda g, b, a: unbroadcast(g * b, a.shape),
        lambda g, a, b: unbroadcast(g * a, b.shape),
    ),
    "dot": BilinearRule(
        lambda a, b: np.sum(a * b, axis=-1),
        lambda g, b, a: unbroadcast(g[..., None] * b, a.shape),
        lambda g, a, b: unbroadcast(g[..., None] * a, b.shape),
    ),
    "conv2d": BilinearRule(conv2d_periodic, _conv_vjp_x, _conv_vjp_kernel),
    "affine": AffineRule(),
}
