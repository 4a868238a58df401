from .rollout import field_stepper, rollout, split_stepper
from .steppers import (
    SplitSystemFn,
    VectorFieldFn,
    explicit_euler_step,
    heun_rk2_step,
    leapfrog_step,
    rk4_step,
    symplectic_euler_step,
    velocity_verlet_step,
)
