from .fput import fput_energy, fput_force
from .generate import generate_dataset
from .params import (
    DoublePendulumParams,
    FputParams,
    PendulumParams,
    SweParams,
    TaylorGreenParams,
    TwoScaleToyParams,
)
from .pendulum import (
    double_pendulum_energy,
    double_pendulum_rhs,
    pendulum_energy,
    pendulum_rhs,
)
from .registry import SYSTEMS, BenchmarkSystem, make_system
from .swe import (
    swe_diagnostics,
    swe_energy,
    swe_init_pulse,
    swe_init_random,
    swe_rhs,
    swe_total_mass,
)
from .taylor_green import (
    taylor_green_init,
    taylor_green_pressure,
    taylor_green_rhs,
    taylor_green_velocity,
    taylor_green_vorticity,
)
from .two_scale import two_scale_energy, two_scale_rhs
