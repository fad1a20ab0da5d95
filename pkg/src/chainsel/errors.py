class DomainError(ValueError):
    """An argument lies outside the domain of the operation."""


class ConfigError(ValueError):
    """Experiment parameters violate a precondition."""


class SolverFault(RuntimeError):
    """The value solver lost monotonicity at ``z``."""

    def __init__(self, z: float):
        super().__init__(f"value function stopped increasing at z={z:.17g}")
        self.z = z


class PlateauError(RuntimeError):
    """The expansion remainder did not settle on the fit window."""

    def __init__(self, drift: float, tol: float):
        super().__init__(f"plateau drift {drift:.3g} exceeds tolerance {tol:.3g}")
        self.drift = drift


class SequencingError(RuntimeError):
    pass
