"""irrisched: multi-zone irrigation scheduling toolkit.

Soil-physics simulation (1D Richards columns per management zone),
hierarchical PPO scheduling agents, extended Kalman filter state
estimation, and receding-horizon irrigation-amount refinement, driven by
a batch CLI.
"""

__version__ = "0.1.0"

from .soilsim import KERNEL_BACKEND

__all__ = ["KERNEL_BACKEND", "__version__"]
