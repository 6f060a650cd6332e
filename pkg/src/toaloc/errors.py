"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid scenario or configuration field."""

    def __init__(self, field_name, message):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


class DegenerateGeometryError(ArithmeticError):
    """Anchor geometry leaves the problem (numerically) unidentifiable."""


class OptimizationError(RuntimeError):
    """The swarm found no point with a finite objective."""
