"""Regret lower bounds for adaptive linear-quadratic-Gaussian control."""

__version__ = "0.1.0"

from .errors import LqgError  # noqa: E402
from .model import LqgInstance, Parametrization, PolicySpec, build_instance, simulate  # noqa: E402

__all__ = ["LqgError", "LqgInstance", "Parametrization", "PolicySpec", "build_instance", "simulate", "__version__"]
