"""Identify SDEs driven by isotropic alpha-stable Levy noise from burst data."""

from .stable import StableParams

__version__ = "0.1.0"

__all__ = ["StableParams", "__version__"]
