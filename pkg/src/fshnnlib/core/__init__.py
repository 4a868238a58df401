from .queries import (
    derivative_estimate,
    derivative_estimates,
    derivative_pairs,
    frame_pairs,
    subsample,
    training_window,
    wrap_angle,
)
from .state import FieldState, PhaseState
from .trajectory import TrajectoryDataset
