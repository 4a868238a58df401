"""
Single-step time integrators.

Split (symplectic) schemes act on ``(q, p)`` through a ``SplitSystemFn``;
classical schemes act on any array through a vector field ``f(z, t)``.
"""

from collections.abc import Callable
from dataclasses import dataclass

import numpy as np

from ..errors import NonFiniteError

Array = np.ndarray
VectorFieldFn = Callable[[Array, float], Array]


@dataclass(frozen=True)
class SplitSystemFn:
    """
    Separable system ``H = T(p) + V(q)``.

    Attributes
    ----------
    force : callable
        ``q -> -dV/dq``.
    velocity : callable
        ``p -> dT/dp``.
    mass : float
        Particle mass used by velocity Verlet.
    coupled_force : callable, optional
        ``(q, p) -> dp/dt`` for systems whose momentum update depends on the
        current momentum (the double pendulum in angle/angular-velocity
        coordinates). Symplectic Euler uses it in place of ``force``.
    """

    force: Callable[[Array], Array]
    velocity: Callable[[Array], Array] = lambda p: p
    mass: float = 1.0
    coupled_force: Callable[[Array, Array], Array] | None = None


def _finite(value: Array, what: str) -> Array:
    if not np.all(np.isfinite(value)):
        raise NonFiniteError(f"non-finite {what}")
    return value


def _check_dt(dt: float) -> None:
    if dt == 0:
        raise ValueError("Time step must be non-zero.")


def leapfrog_step(sys: SplitSystemFn, q: Array, p: Array, dt: float) -> tuple[Array, Array]:
    """Kick-drift-kick leapfrog."""
    _check_dt(dt)
    p_half = p + 0.5 * dt * _finite(sys.force(q), "force")
    q_next = q + dt * _finite(sys.velocity(p_half), "velocity")
    p_next = p_half + 0.5 * dt * _finite(sys.force(q_next), "force")
    return q_next, p_next


def symplectic_euler_step(
    sys: SplitSystemFn, q: Array, p: Array, dt: float
) -> tuple[Array, Array]:
    """Update momenta first, then positions with the new momenta."""
    _check_dt(dt)
    if sys.coupled_force is not None:
        kick = sys.coupled_force(q, p)
    else:
        kick = sys.force(q)
    p_next = p + dt * _finite(kick, "force")
    q_next = q + dt * _finite(sys.velocity(p_next), "velocity")
    return q_next, p_next


def velocity_verlet_step(
    sys: SplitSystemFn, q: Array, p: Array, dt: float
) -> tuple[Array, Array]:
    _check_dt(dt)
    f_now = _finite(sys.force(q), "force")
    q_next = q + (p / sys.mass) * dt + 0.5 * (f_now / sys.mass) * dt * dt
    f_next = _finite(sys.force(q_next), "force")
    p_next = p + 0.5 * (f_now + f_next) * dt
    return q_next, p_next


def explicit_euler_step(f: VectorFieldFn, z: Array, t: float, dt: float) -> Array:
    """Forward Euler; not symplectic, energy grows on oscillators."""
    _check_dt(dt)
    return z + dt * _finite(f(z, t), "vector field")


def heun_rk2_step(f: VectorFieldFn, z: Array, t: float, dt: float) -> Array:
    _check_dt(dt)
    k1 = _finite(f(z, t), "vector field")
    k2 = _finite(f(z + dt * k1, t + dt), "vector field")
    return z + 0.5 * dt * (k1 + k2)


def rk4_step(f: VectorFieldFn, z: Array, t: float, dt: float) -> Array:
    """Classical four-stage Runge-Kutta."""
    _check_dt(dt)
    k1 = _finite(f(z, t), "vector field")
    k2 = _finite(f(z + 0.5 * dt * k1, t + 0.5 * dt), "vector field")
    k3 = _finite(f(z + 0.5 * dt * k2, t + 0.5 * dt), "vector field")
    k4 = _finite(f(z + dt * k3, t + dt), "vector field")
    return z + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
