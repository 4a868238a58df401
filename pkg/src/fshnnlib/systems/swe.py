"""
Periodic shallow-water equations in conservative flux form.

State arrays are ``(h, m_x, m_y)`` stacked as ``(3, N, N)``; the last axis is
x and the middle axis is y.
"""

import logging

import numpy as np
from scipy import ndimage

from ..core.state import FieldState
from ..errors import IntegrationError
from .params import SweParams

logger = logging.getLogger(__name__)

SWE_CHANNELS = ("h", "mx", "my")
SMOOTHING_KERNEL = np.outer([1.0, 2.0, 1.0], [1.0, 2.0, 1.0]) / 16.0
MAX_SMOOTHING_ITERATIONS = 10_000


def ddx(f: np.ndarray, dx: float) -> np.ndarray:
    """Periodic centered difference along x (last axis)."""
    return (np.roll(f, -1, axis=-1) - np.roll(f, 1, axis=-1)) / (2.0 * dx)


def ddy(f: np.ndarray, dy: float) -> np.ndarray:
    """Periodic centered difference along y (second to last axis)."""
    return (np.roll(f, -1, axis=-2) - np.roll(f, 1, axis=-2)) / (2.0 * dy)


def swe_rhs(params: SweParams, state: np.ndarray) -> np.ndarray:
    """
    Time derivative of ``(h, m_x, m_y)``.

    ``dh/dt = -(d_x m_x + d_y m_y)`` and the momentum equations carry the
    advective fluxes plus the hydrostatic pressure ``g h**2 / 2``. No Coriolis,
    friction or wind terms.

    Raises
    ------
    IntegrationError
        If the depth drops below ``1e-6 * H`` anywhere.
    """
    h, mx, my = state[0], state[1], state[2]
    if np.min(h) < params.depth_floor:
        raise IntegrationError(
            f"depth {np.min(h):.3g} fell below the floor {params.depth_floor:.3g}"
        )
    pressure = 0.5 * params.g * h**2
    uv_flux = mx * my / h
    dh = -(ddx(mx, params.dx) + ddy(my, params.dy))
    dmx = -(ddx(mx**2 / h + pressure, params.dx) + ddy(uv_flux, params.dy))
    dmy = -(ddx(uv_flux, params.dx) + ddy(my**2 / h + pressure, params.dy))
    return np.stack([dh, dmx, dmy])


def swe_diagnostics(
    params: SweParams, state: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Velocities ``(u, v)`` using the depth floor, and the surface anomaly ``h - H``."""
    h = np.maximum(state[0], params.depth_floor)
    return state[1] / h, state[2] / h, state[0] - params.H


def swe_total_mass(params: SweParams, state: np.ndarray) -> np.ndarray:
    """``sum h dx dy`` over the last two axes of the ``h`` channel."""
    return np.sum(state[..., 0, :, :], axis=(-2, -1)) * params.dx * params.dy


def swe_energy(params: SweParams, states: np.ndarray) -> np.ndarray:
    """
    Approximate total energy ``sum (|m|**2 / 2h + g h**2 / 2) dx dy``.

    Heun stepping does not conserve it exactly.
    """
    h = np.maximum(states[..., 0, :, :], params.depth_floor)
    mx, my = states[..., 1, :, :], states[..., 2, :, :]
    density = 0.5 * (mx**2 + my**2) / h + 0.5 * params.g * h**2
    return np.sum(density, axis=(-2, -1)) * params.dx * params.dy


def _field(params: SweParams, eta: np.ndarray) -> FieldState:
    zeros = np.zeros_like(eta)
    return FieldState(
        values=np.stack([params.H + eta, zeros, zeros.copy()]),
        dx=params.dx,
        dy=params.dy,
        channels=SWE_CHANNELS,
    )


def swe_init_pulse(
    params: SweParams,
    amplitude: float | None = None,
    sigma_cells: float | None = None,
    center: tuple[float, float] | None = None,
) -> FieldState:
    """
    Gaussian bump ``A exp(-((i - i_c)**2 + (j - j_c)**2) / (2 sigma**2))`` at rest.

    Parameters
    ----------
    params : SweParams
        Grid and mean depth; also supplies the defaults for ``amplitude`` and
        ``sigma_cells``.
    center : tuple of float, optional
        ``(i_c, j_c)`` in cell units; defaults to the domain midpoint
        ``(N // 2, N // 2)``.
    """
    amplitude = params.amplitude if amplitude is None else amplitude
    sigma = params.sigma_cells if sigma_cells is None else sigma_cells
    ic, jc = (params.N // 2, params.N // 2) if center is None else center
    j, i = np.meshgrid(np.arange(params.N), np.arange(params.N), indexing="ij")
    eta = amplitude * np.exp(-((i - ic) ** 2 + (j - jc) ** 2) / (2.0 * sigma**2))
    return _field(params, eta)


def max_neighbour_jump(eta: np.ndarray) -> float:
    """Largest periodic nearest-neighbour difference in x or y."""
    jump_x = np.abs(np.roll(eta, -1, axis=-1) - eta)
    jump_y = np.abs(np.roll(eta, -1, axis=-2) - eta)
    return float(max(jump_x.max(), jump_y.max()))


def smooth_until_below(eta: np.ndarray, threshold: float) -> np.ndarray:
    """
    Apply the normalized 3x3 binomial kernel with periodic wrap until
    ``max_neighbour_jump(eta) < threshold``.

    Raises
    ------
    IntegrationError
        If the threshold is not reached within 10**4 passes.
    """
    for iteration in range(MAX_SMOOTHING_ITERATIONS + 1):
        if max_neighbour_jump(eta) < threshold:
            logger.debug("Random field smoothed in %d passes", iteration)
            return eta
        eta = ndimage.convolve(eta, SMOOTHING_KERNEL, mode="wrap")
    raise IntegrationError(
        f"smoothing did not bring jumps below {threshold} in "
        f"{MAX_SMOOTHING_ITERATIONS} passes"
    )


def swe_init_random(
    params: SweParams,
    rng: np.random.Generator,
    jump_threshold: float | None = None,
) -> FieldState:
    """
    Surface anomaly from the mean of two Gaussian random fields, smoothed until
    neighbouring cells differ by less than ``jump_threshold``.
    """
    threshold = params.jump_threshold if jump_threshold is None else jump_threshold
    fields = []
    for _ in range(2):
        noise = rng.standard_normal((params.N, params.N))
        field = ndimage.gaussian_filter(noise, sigma=params.correlation_cells, mode="wrap")
        std = field.std()
        fields.append(field / std if std > 0 else field)
    eta = params.amplitude * 0.5 * (fields[0] + fields[1])
    return _field(params, smooth_until_below(eta, threshold))


def swe_initial_state(params: SweParams, rng: np.random.Generator) -> FieldState:
    """Initial condition selected by ``params.init``."""
    if params.init == "random":
        return swe_init_random(params, rng)
    center = None
    if params.randomize_center:
        center = (float(rng.integers(params.N)), float(rng.integers(params.N)))
    return swe_init_pulse(params, center=center)
