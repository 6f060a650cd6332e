"""Multi-hop TOA localization with CRLB-weighted anchor refinement."""

from .errors import ConfigError, DegenerateGeometryError, OptimizationError
from .model import Node, NoiseParams, Role, Scenario, load_scenario

__all__ = ["ConfigError", "DegenerateGeometryError", "OptimizationError", "Node",
           "NoiseParams", "Role", "Scenario", "load_scenario"]
__version__ = "0.1.0"
