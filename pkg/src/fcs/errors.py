"""Exception hierarchy shared by all fcs modules."""


class FcsError(Exception):
    """Base class for every error raised by the toolkit."""


class NumericsError(FcsError):
    """A linear-algebra kernel failed (non-convergence, singular system, bad shape)."""


class SingularResolventError(NumericsError):
    """``(j*omega*I - A)`` is numerically singular at the requested frequency."""

    def __init__(self, omega, cond):
        super().__init__(f"resolvent singular at omega={omega:g} (cond={cond:.3g})")
        self.omega = omega
        self.cond = cond


class ModelError(FcsError):
    """Plant, constraint or gain data violates a structural invariant."""


class DesignError(FcsError):
    """Offline synthesis rejected the design (CARE failure, singular H_u, ...)."""


class ConstraintFault(FcsError):
    """Both the min and max branch of one constraint channel tested active."""


class SimulationDiverged(FcsError):
    """The closed-loop state became non-finite."""

    def __init__(self, t):
        super().__init__(f"closed-loop state became non-finite at t={t:.6g} s")
        self.t = t


class ConfigError(FcsError):
    """Study configuration failed validation; ``path`` names the offending field."""

    def __init__(self, path, message):
        super().__init__(f"{path}: {message}")
        self.path = path
