"""Exception hierarchy shared by the solver, benchmarks and CLI."""


class DomainError(ValueError):
    """An input lies outside the domain where a formula is defined."""


class ConfigError(ValueError):
    """A configuration file or flag could not be parsed or validated."""


class SolverError(RuntimeError):
    """Base class for failures of the closed-loop equilibrium solve."""


class NoConvergence(SolverError):
    pass


class BranchInvalid(SolverError):
    """The solution branch fails the a-posteriori checks.

    Raised when the root continued from the small-impact limit no longer
    satisfies the sign constraints or the equation residuals, which signals
    that the impact parameter is outside the regime where the equilibrium
    is known to exist.
    """


class DenominatorVanished(SolverError):
    pass


class SignConstraintViolated(BranchInvalid):
    pass


class NoAdmissibleRoot(SolverError):
    pass


class DegenerateCubic(ValueError):
    pass
