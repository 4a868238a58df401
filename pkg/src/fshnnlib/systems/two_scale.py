import numpy as np

from ..integrators.steppers import SplitSystemFn
from .params import TwoScaleToyParams


def _masses(params: TwoScaleToyParams) -> np.ndarray:
    return np.array([params.m_s, params.m_f])


def two_scale_force(params: TwoScaleToyParams, q: np.ndarray) -> np.ndarray:
    """``-dV/dq`` plus the stiff restoring force ``-W'(q_f) / eps`` on the fast mode."""
    q_s, q_f = q[..., 0], q[..., 1]
    f_s = -(params.k_s * q_s + params.coupling * q_f)
    f_f = -params.coupling * q_s - params.k_f / params.eps * (q_f - params.q_star)
    return np.stack([f_s, f_f], axis=-1)


def two_scale_rhs(params: TwoScaleToyParams, state: np.ndarray) -> np.ndarray:
    """Time derivative of ``(q_s, q_f, p_s, p_f)``."""
    q, p = state[..., :2], state[..., 2:]
    return np.concatenate([p / _masses(params), two_scale_force(params, q)], axis=-1)


def two_scale_energy(params: TwoScaleToyParams, states: np.ndarray) -> np.ndarray:
    q_s, q_f, p_s, p_f = (states[..., i] for i in range(4))
    kinetic = 0.5 * p_s**2 / params.m_s + 0.5 * p_f**2 / params.m_f
    slow = 0.5 * params.k_s * q_s**2 + params.coupling * q_s * q_f
    fast = 0.5 * params.k_f / params.eps * (q_f - params.q_star) ** 2
    return kinetic + slow + fast


def two_scale_split(params: TwoScaleToyParams) -> SplitSystemFn:
    masses = _masses(params)
    return SplitSystemFn(
        force=lambda q: two_scale_force(params, q), velocity=lambda p: p / masses
    )
