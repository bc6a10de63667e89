"""Simulation and analysis toolkit for ridge bandits: rewards f(<theta*, a>) + noise."""
from .linkfn import LinkFunction
from .env import RidgeEnvironment, spawn

__version__ = "0.1.0"

__all__ = ["LinkFunction", "RidgeEnvironment", "spawn", "__version__"]
