import numpy as np

from ..integrators.steppers import SplitSystemFn
from .params import FputParams


def bond_stretch(q: np.ndarray) -> np.ndarray:
    """``r_i = q_{i+1} - q_i`` with periodic wrap, along the last axis."""
    return np.roll(q, -1, axis=-1) - q


def fput_force(params: FputParams, q: np.ndarray) -> np.ndarray:
    """
    Particle forces ``-dV/dq`` of the periodic FPUT chain.

    With bond forces ``f_i = k r_i + alpha r_i**2 + beta r_i**3``, particle
    ``i`` is pulled forward by bond ``i`` and back by bond ``i - 1``, so the
    force is ``f_i - f_{i-1}``.

    Parameters
    ----------
    params : FputParams
        Chain parameters.
    q : numpy.ndarray
        Displacements, shape ``(..., N)``.

    Returns
    -------
    numpy.ndarray
        Forces with the shape of ``q``.
    """
    r = bond_stretch(q)
    f = params.k * r + params.alpha * r**2 + params.beta * r**3
    return f - np.roll(f, 1, axis=-1)


def fput_potential(params: FputParams, q: np.ndarray) -> np.ndarray:
    r = bond_stretch(q)
    return np.sum(
        0.5 * params.k * r**2 + params.alpha / 3.0 * r**3 + 0.25 * params.beta * r**4,
        axis=-1,
    )


def fput_energy(params: FputParams, states: np.ndarray) -> np.ndarray:
    """``H = sum p**2 / 2m + sum V(r_i)`` for states ``(..., 2N)`` ordered (q, p)."""
    q, p = states[..., : params.N], states[..., params.N :]
    return np.sum(p**2, axis=-1) / (2.0 * params.m) + fput_potential(params, q)


def fput_split(params: FputParams) -> SplitSystemFn:
    return SplitSystemFn(
        force=lambda q: fput_force(params, q),
        velocity=lambda p: p / params.m,
        mass=params.m,
    )
