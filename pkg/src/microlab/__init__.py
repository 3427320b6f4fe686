"""Simulation and estimation toolkit for order flow, impact and spreads."""
from .kernels import BACKEND

__version__ = "0.1.0"
__all__ = ["BACKEND", "__version__"]
