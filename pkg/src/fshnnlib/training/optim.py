from collections.abc import Mapping
from dataclasses import dataclass, field

import numpy as np

from ..autodiff import ParamVector
from ..config import TrainConfig


@dataclass
class AdamState:
    """
    Moment estimates of the adaptive-moment optimizer, one flat array per group.

    ``step`` counts completed updates and drives the bias correction.
    """

    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(
    params: Mapping[str, ParamVector],
    grads: Mapping[str, np.ndarray],
    state: AdamState,
    config: TrainConfig,
) -> tuple[dict[str, ParamVector], AdamState]:
    """
    One bias-corrected adaptive-moment update.

    Only the groups present in ``grads`` are updated; the inputs are left
    untouched and fresh parameter vectors and state are returned.

    Parameters
    ----------
    params : mapping of str to ParamVector
        Parameter groups.
    grads : mapping of str to numpy.ndarray
        Flat loss gradient per group, in the group's layout order.
    state : AdamState
        Moments from the previous step (empty on the first).
    config : TrainConfig
        Supplies ``learning_rate``, ``beta1``, ``beta2`` and ``eps``.

    Returns
    -------
    tuple
        Updated parameter groups and optimizer state.
    """
    step = state.step + 1
    b1, b2 = config.beta1, config.beta2
    m = dict(state.m)
    v = dict(state.v)
    updated = {}
    for name, g in grads.items():
        current = params[name]
        g = np.asarray(g, dtype=np.float64)
        if g.shape != current.values.shape:
            raise ValueError(
                f"gradient of '{name}' has shape {g.shape}, parameters {current.values.shape}"
            )
        m[name] = b1 * m.get(name, np.zeros_like(g)) + (1.0 - b1) * g
        v[name] = b2 * v.get(name, np.zeros_like(g)) + (1.0 - b2) * g * g
        m_hat = m[name] / (1.0 - b1**step)
        v_hat = v[name] / (1.0 - b2**step)
        new = current.copy()
        new.values -= config.learning_rate * m_hat / (np.sqrt(v_hat) + config.eps)
        updated[name] = new
    return updated, AdamState(step=step, m=m, v=v)
