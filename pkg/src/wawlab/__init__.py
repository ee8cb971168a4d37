"""Simulation of Write+Write cache-timing attacks on classic and randomized caches."""
from ._backend import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
