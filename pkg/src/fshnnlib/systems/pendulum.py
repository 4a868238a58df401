import numpy as np

from ..core.queries import wrap_angle
from ..errors import NonFiniteError
from ..integrators.steppers import SplitSystemFn
from .params import DoublePendulumParams, PendulumParams


def pendulum_rhs(params: PendulumParams, state: np.ndarray) -> np.ndarray:
    """``(theta, omega) -> (omega, -(g/L) sin theta)``; leading axes broadcast."""
    theta, omega = state[..., 0], state[..., 1]
    return np.stack([omega, -(params.g / params.L) * np.sin(theta)], axis=-1)


def pendulum_energy(params: PendulumParams, states: np.ndarray) -> np.ndarray:
    """
    ``E = L**2 omega**2 / 2 - g L cos(theta)`` per unit mass.

    The zero of potential energy is the pivot height, so the hanging rest
    state has ``E = -g L``.
    """
    theta, omega = states[..., 0], states[..., 1]
    return 0.5 * params.L**2 * omega**2 - params.g * params.L * np.cos(theta)


def pendulum_split(params: PendulumParams) -> SplitSystemFn:
    ratio = params.g / params.L
    return SplitSystemFn(force=lambda q: -ratio * np.sin(q), velocity=lambda p: p)


def _accelerations(
    params: DoublePendulumParams,
    theta1: np.ndarray,
    theta2: np.ndarray,
    omega1: np.ndarray,
    omega2: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    m1, m2, l1, l2, g = params.m1, params.m2, params.L1, params.L2, params.g
    delta = theta1 - theta2
    den = 2.0 * m1 + m2 - m2 * np.cos(2.0 * theta1 - 2.0 * theta2)
    if np.any(np.abs(den) < 1e-12):
        raise NonFiniteError("double pendulum denominator vanished")
    alpha1 = (
        -g * (2.0 * m1 + m2) * np.sin(theta1)
        - m2 * g * np.sin(theta1 - 2.0 * theta2)
        - 2.0
        * np.sin(delta)
        * m2
        * (omega2**2 * l2 + omega1**2 * l1 * np.cos(delta))
    ) / (l1 * den)
    alpha2 = (
        2.0
        * np.sin(delta)
        * (
            omega1**2 * l1 * (m1 + m2)
            + g * (m1 + m2) * np.cos(theta1)
            + omega2**2 * l2 * m2 * np.cos(delta)
        )
    ) / (l2 * den)
    return alpha1, alpha2


def double_pendulum_rhs(params: DoublePendulumParams, state: np.ndarray) -> np.ndarray:
    """
    Time derivative of ``(theta1, theta2, omega1, omega2)``.

    Returns ``(omega1, omega2, alpha1, alpha2)`` from the standard coupled
    equations of two point masses on rigid massless rods.

    Raises
    ------
    NonFiniteError
        If the common denominator ``2 m1 + m2 - m2 cos(2 theta1 - 2 theta2)``
        drops below 1e-12 in magnitude.
    """
    theta1, theta2, omega1, omega2 = (state[..., i] for i in range(4))
    alpha1, alpha2 = _accelerations(params, theta1, theta2, omega1, omega2)
    return np.stack([omega1, omega2, alpha1, alpha2], axis=-1)


def double_pendulum_energy(
    params: DoublePendulumParams, states: np.ndarray
) -> np.ndarray:
    m1, m2, l1, l2, g = params.m1, params.m2, params.L1, params.L2, params.g
    theta1, theta2, omega1, omega2 = (states[..., i] for i in range(4))
    kinetic = (
        0.5 * (m1 + m2) * l1**2 * omega1**2
        + 0.5 * m2 * l2**2 * omega2**2
        + m2 * l1 * l2 * omega1 * omega2 * np.cos(theta1 - theta2)
    )
    potential = -(m1 + m2) * g * l1 * np.cos(theta1) - m2 * g * l2 * np.cos(theta2)
    return kinetic + potential


def double_pendulum_split(params: DoublePendulumParams) -> SplitSystemFn:
    """Angles as positions, angular velocities as momenta; the kick depends on both."""

    def coupled(q: np.ndarray, p: np.ndarray) -> np.ndarray:
        return np.stack(_accelerations(params, q[0], q[1], p[0], p[1]))

    return SplitSystemFn(
        force=lambda q: coupled(q, np.zeros_like(q)),
        velocity=lambda p: p,
        coupled_force=coupled,
    )


def wrap_double_pendulum(state: np.ndarray) -> np.ndarray:
    """Wrap both angles of ``(theta1, theta2, omega1, omega2)`` into (-pi, pi]."""
    wrapped = np.array(state, dtype=np.float64)
    wrapped[..., :2] = wrap_angle(wrapped[..., :2])
    return wrapped
