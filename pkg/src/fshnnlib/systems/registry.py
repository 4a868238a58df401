"""Benchmark systems: initial conditions, integrator choice and energy diagnostics."""

from typing import Any, ClassVar

import numpy as np

from ..autodiff import DualTape
from ..errors import ConfigError
from ..integrators.rollout import Stepper, field_stepper, rollout, split_stepper
from ..integrators.steppers import (
    heun_rk2_step,
    leapfrog_step,
    rk4_step,
    symplectic_euler_step,
    velocity_verlet_step,
)
from .fput import fput_energy, fput_force, fput_split
from .params import (
    DoublePendulumParams,
    FputParams,
    PendulumParams,
    SweParams,
    SystemParams,
    TaylorGreenParams,
    TwoScaleToyParams,
)
from .pendulum import (
    double_pendulum_energy,
    double_pendulum_rhs,
    double_pendulum_split,
    pendulum_energy,
    pendulum_rhs,
    pendulum_split,
    wrap_double_pendulum,
)
from .swe import SWE_CHANNELS, swe_energy, swe_initial_state, swe_rhs
from .taylor_green import (
    TG_CHANNELS,
    taylor_green_fields,
    taylor_green_init,
    taylor_green_kinetic_energy,
    taylor_green_rhs,
)
from .two_scale import two_scale_energy, two_scale_rhs, two_scale_split


class BenchmarkSystem:
    """
    Base class of the data generators.

    Subclasses set ``name`` and ``params_cls`` and implement
    ``initial_state``, ``stepper``, ``rhs`` and ``energy``.
    """

    name: ClassVar[str]
    params_cls: ClassVar[type[SystemParams]]
    is_field: ClassVar[bool] = False
    channels: ClassVar[tuple[str, ...]] = ()
    wrapped_dims: ClassVar[tuple[int, ...]] = ()

    def __init__(self, params: SystemParams | dict[str, Any] | None = None):
        if params is None or isinstance(params, dict):
            params = self.params_cls.from_dict(params)
        if not isinstance(params, self.params_cls):
            raise ConfigError(
                f"{self.name} expects {self.params_cls.__name__}, "
                f"got {type(params).__name__}"
            )
        self.params: Any = params

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.params})"

    @property
    def dof(self) -> int:
        raise NotImplementedError

    @property
    def state_shape(self) -> tuple[int, ...]:
        return (2 * self.dof,)

    @property
    def spacing(self) -> tuple[float, ...]:
        return ()

    @property
    def noise(self) -> float:
        return float(getattr(self.params, "noise", 0.0))

    def default_dt(self) -> float | None:
        return None

    def initial_state(self, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def stepper(self) -> Stepper:
        raise NotImplementedError

    def rhs(self, states: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def energy(self, states: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def simulate(
        self, rng: np.random.Generator, dt: float, n_steps: int, save_every: int
    ) -> np.ndarray:
        """One trajectory of stored frames, shape ``(n_steps // save_every + 1, ...)``."""
        traj = rollout(self.stepper(), self.initial_state(rng), dt, n_steps, save_every)
        return traj.states[0]

    def record_hamiltonian(self, tape: DualTape, z: int) -> int:
        """Record the exact Hamiltonian of canonical ``(q, p)`` states on a tape."""
        raise NotImplementedError(f"{self.name} has no canonical tape Hamiltonian")


def _half_sum_squares(tape: DualTape, x: int, weight: float = 1.0) -> int:
    return tape.scale(tape.sum(tape.square(x), axis=-1), 0.5 * weight)


def _split(tape: DualTape, z: int, dof: int) -> tuple[int, int]:
    return tape.slice(z, 0, dof), tape.slice(z, dof, 2 * dof)


class PendulumSystem(BenchmarkSystem):
    """Single pendulum, state ``(theta, omega)``, leapfrog."""

    name = "pendulum"
    params_cls = PendulumParams

    @property
    def dof(self) -> int:
        return 1

    def initial_state(self, rng: np.random.Generator) -> np.ndarray:
        return np.array([rng.uniform(-np.pi, np.pi), rng.uniform(-1.0, 1.0)])

    def stepper(self) -> Stepper:
        return split_stepper(leapfrog_step, pendulum_split(self.params), 1)

    def rhs(self, states: np.ndarray) -> np.ndarray:
        return pendulum_rhs(self.params, states)

    def energy(self, states: np.ndarray) -> np.ndarray:
        return pendulum_energy(self.params, states)

    def record_hamiltonian(self, tape: DualTape, z: int) -> int:
        # Canonical in (theta, omega): H = omega**2 / 2 - (g / L) cos(theta).
        q, p = _split(tape, z, 1)
        potential = tape.scale(tape.sum(tape.cos(q), axis=-1), -self.params.g / self.params.L)
        return tape.add(_half_sum_squares(tape, p), potential)


class DoublePendulumSystem(BenchmarkSystem):
    """Double pendulum, state ``(theta1, theta2, omega1, omega2)``, symplectic Euler."""

    name = "double_pendulum"
    params_cls = DoublePendulumParams
    wrapped_dims = (0, 1)

    @property
    def dof(self) -> int:
        return 2

    def initial_state(self, rng: np.random.Generator) -> np.ndarray:
        return np.concatenate(
            [rng.uniform(-np.pi, np.pi, size=2), rng.uniform(-1.0, 1.0, size=2)]
        )

    def stepper(self) -> Stepper:
        inner = split_stepper(symplectic_euler_step, double_pendulum_split(self.params), 2)

        def step(z: np.ndarray, t: float, dt: float) -> np.ndarray:
            return wrap_double_pendulum(inner(z, t, dt))

        return step

    def rhs(self, states: np.ndarray) -> np.ndarray:
        return double_pendulum_rhs(self.params, states)

    def energy(self, states: np.ndarray) -> np.ndarray:
        return double_pendulum_energy(self.params, states)


class FputSystem(BenchmarkSystem):
    """Periodic FPUT chain, state ``(q_1..q_N, p_1..p_N)``, velocity Verlet."""

    name = "fput"
    params_cls = FputParams

    @property
    def dof(self) -> int:
        return int(self.params.N)

    def initial_state(self, rng: np.random.Generator) -> np.ndarray:
        q = rng.normal(0.0, self.params.sigma_q, size=self.dof)
        p = rng.normal(0.0, self.params.sigma_p, size=self.dof)
        return np.concatenate([q, p])

    def stepper(self) -> Stepper:
        return split_stepper(velocity_verlet_step, fput_split(self.params), self.dof)

    def rhs(self, states: np.ndarray) -> np.ndarray:
        q, p = states[..., : self.dof], states[..., self.dof :]
        return np.concatenate([p / self.params.m, fput_force(self.params, q)], axis=-1)

    def energy(self, states: np.ndarray) -> np.ndarray:
        return fput_energy(self.params, states)

    def record_hamiltonian(self, tape: DualTape, z: int) -> int:
        prm = self.params
        q, p = _split(tape, z, self.dof)
        rolled = tape.concat([tape.slice(q, 1, self.dof), tape.slice(q, 0, 1)])
        r = tape.sub(rolled, q)
        r2 = tape.square(r)
        bond = tape.scale(r2, 0.5 * prm.k)
        if prm.alpha:
            bond = tape.add(bond, tape.scale(tape.mul(r2, r), prm.alpha / 3.0))
        if prm.beta:
            bond = tape.add(bond, tape.scale(tape.square(r2), 0.25 * prm.beta))
        return tape.add(_half_sum_squares(tape, p, 1.0 / prm.m), tape.sum(bond, axis=-1))


class TwoScaleToySystem(BenchmarkSystem):
    """Slow-fast toy, state ``(q_s, q_f, p_s, p_f)``, leapfrog."""

    name = "two_scale"
    params_cls = TwoScaleToyParams

    @property
    def dof(self) -> int:
        return 2

    def initial_state(self, rng: np.random.Generator) -> np.ndarray:
        q = rng.normal(0.0, self.params.sigma_q, size=2)
        p = rng.normal(0.0, self.params.sigma_p, size=2)
        return np.concatenate([q, p])

    def stepper(self) -> Stepper:
        return split_stepper(leapfrog_step, two_scale_split(self.params), 2)

    def rhs(self, states: np.ndarray) -> np.ndarray:
        return two_scale_rhs(self.params, states)

    def energy(self, states: np.ndarray) -> np.ndarray:
        return two_scale_energy(self.params, states)

    def record_hamiltonian(self, tape: DualTape, z: int) -> int:
        prm = self.params
        q_s, q_f = tape.slice(z, 0, 1), tape.slice(z, 1, 2)
        p_s, p_f = tape.slice(z, 2, 3), tape.slice(z, 3, 4)
        terms = [
            _half_sum_squares(tape, p_s, 1.0 / prm.m_s),
            _half_sum_squares(tape, p_f, 1.0 / prm.m_f),
            _half_sum_squares(tape, q_s, prm.k_s),
            tape.scale(tape.sum(tape.mul(q_s, q_f), axis=-1), prm.coupling),
            _half_sum_squares(
                tape, tape.add(q_f, tape.const(-prm.q_star)), prm.k_f / prm.eps
            ),
        ]
        total = terms[0]
        for term in terms[1:]:
            total = tape.add(total, term)
        return total


class SweSystem(BenchmarkSystem):
    """Periodic shallow water, state ``(h, m_x, m_y)`` fields, Heun RK2 at the CFL step."""

    name = "swe"
    params_cls = SweParams
    is_field = True
    channels = SWE_CHANNELS

    @property
    def dof(self) -> int:
        return 3 * self.params.N**2

    @property
    def state_shape(self) -> tuple[int, ...]:
        return (3, self.params.N, self.params.N)

    @property
    def spacing(self) -> tuple[float, ...]:
        return (self.params.dx, self.params.dy)

    def default_dt(self) -> float | None:
        return float(self.params.dt)

    def initial_state(self, rng: np.random.Generator) -> np.ndarray:
        return swe_initial_state(self.params, rng).values

    def stepper(self) -> Stepper:
        return field_stepper(heun_rk2_step, lambda z, t: swe_rhs(self.params, z))

    def rhs(self, states: np.ndarray) -> np.ndarray:
        return swe_rhs(self.params, states)

    def energy(self, states: np.ndarray) -> np.ndarray:
        return swe_energy(self.params, states)


class TaylorGreenSystem(BenchmarkSystem):
    """Taylor-Green vortex; vorticity evolved with RK4, ``(u, v, p)`` stored."""

    name = "taylor_green"
    params_cls = TaylorGreenParams
    is_field = True
    channels = TG_CHANNELS

    @property
    def dof(self) -> int:
        return 3 * self.params.N**2

    @property
    def state_shape(self) -> tuple[int, ...]:
        return (3, self.params.N, self.params.N)

    @property
    def spacing(self) -> tuple[float, ...]:
        return (self.params.dx, self.params.dx)

    def _offset(self, rng: np.random.Generator) -> tuple[float, float]:
        if not self.params.random_phase:
            return (0.0, 0.0)
        x0, y0 = rng.uniform(0.0, self.params.L, size=2)
        return (float(x0), float(y0))

    def initial_state(self, rng: np.random.Generator) -> np.ndarray:
        """Initial vorticity (the evolved variable, not the stored channels)."""
        return taylor_green_init(self.params, self._offset(rng))

    def stepper(self) -> Stepper:
        return field_stepper(rk4_step, lambda z, t: taylor_green_rhs(self.params, z))

    def rhs(self, states: np.ndarray) -> np.ndarray:
        return taylor_green_rhs(self.params, states)

    def energy(self, states: np.ndarray) -> np.ndarray:
        return taylor_green_kinetic_energy(self.params, states)

    def simulate(
        self, rng: np.random.Generator, dt: float, n_steps: int, save_every: int
    ) -> np.ndarray:
        offset = self._offset(rng)
        omega0 = taylor_green_init(self.params, offset)
        traj = rollout(self.stepper(), omega0, dt, n_steps, save_every)
        return np.stack(
            [
                taylor_green_fields(self.params, omega, t, offset).values
                for omega, t in zip(traj.states[0], traj.times)
            ]
        )


SYSTEMS: dict[str, type[BenchmarkSystem]] = {
    cls.name: cls
    for cls in (
        PendulumSystem,
        DoublePendulumSystem,
        FputSystem,
        TwoScaleToySystem,
        SweSystem,
        TaylorGreenSystem,
    )
}


def make_system(name: str, params: dict[str, Any] | None = None) -> BenchmarkSystem:
    """Instantiate a registered system; unknown names and keys raise ``ConfigError``."""
    if name not in SYSTEMS:
        raise ConfigError(f"Unknown system '{name}'. Available: {sorted(SYSTEMS)}.")
    return SYSTEMS[name](params)
