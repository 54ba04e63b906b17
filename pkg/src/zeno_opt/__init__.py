"""Optimal repeated projective measurements on qubits and large spins coupled to a bosonic bath."""

__version__ = "0.1.0"

from .bath import BathParams, SpectralDensity
from .dynamics import ModelKind, ModelSpec, redfield_integrate
from .measurement import InitialState, ProjectorChoice, sweep

__all__ = [
    "BathParams",
    "SpectralDensity",
    "ModelKind",
    "ModelSpec",
    "redfield_integrate",
    "InitialState",
    "ProjectorChoice",
    "sweep",
]
