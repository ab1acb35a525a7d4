"""Configuration management for hardylab."""

from .loader import ConfigLoader
from .schema import LabConfig, SolverConfig

__all__ = ["ConfigLoader", "LabConfig", "SolverConfig"]
