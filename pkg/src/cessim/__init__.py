"""Desk-scale engine for self-oscillating states of 1D flowing condensates."""

from .core import FieldState, Grid1D, SeededRng, observables
from .dynamics import ObstacleSpec, QuenchScenario, RecorderSpec, Trajectory, evolve

__version__ = "0.1.0"

__all__ = [
    "FieldState",
    "Grid1D",
    "SeededRng",
    "observables",
    "ObstacleSpec",
    "QuenchScenario",
    "RecorderSpec",
    "Trajectory",
    "evolve",
    "__version__",
]
