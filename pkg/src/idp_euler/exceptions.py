class InadmissibleStateError(ValueError):
    """A state lies outside the admissible set (rho <= 0, e <= 0, ...)."""


class VacuumError(ValueError):
    """The Riemann problem generates a vacuum."""


class CFLViolation(ValueError):
    """The requested time step breaks the low-order CFL condition."""
