"""Exception hierarchy shared by every module of the laboratory."""


class VCQAError(Exception):
    """Base class for all errors raised by the laboratory."""


class DomainError(VCQAError, ValueError):
    """An argument lies outside the domain of the operation."""


class ScheduleValidationError(VCQAError, ValueError):
    """
    Raised when schedule parameters violate their box constraint.

    Attributes:
        indices (list[int]): Positions (1-based, as in p_{j,1..N_j}) of the offending parameters.
    """

    def __init__(self, message: str, indices: list[int]):
        super().__init__(f"{message} (offending indices: {indices})")
        self.indices = indices


class InstanceValidationError(VCQAError, ValueError):
    """A problem instance is inconsistent with its connectivity."""


class ResourceLimitError(VCQAError):
    """The requested system size exceeds the dense-diagonalization cap."""


class EigensolverError(VCQAError, RuntimeError):
    """
    The iterative eigensolver did not converge.

    Attributes:
        residuals (list[float]): Residual norms of the returned Ritz pairs.
    """

    def __init__(self, message: str, residuals: list[float]):
        super().__init__(f"{message} (residuals: {residuals})")
        self.residuals = residuals


class IntegrationError(VCQAError, RuntimeError):
    """
    Step refinement failed to reach the requested final-energy tolerance.

    Attributes:
        energies (tuple[float, float]): The last two final energies compared.
        refinements (int): Number of halvings performed.
    """

    def __init__(self, message: str, energies: tuple[float, float], refinements: int):
        super().__init__(f"{message} (last energies: {energies[0]:.12g}, {energies[1]:.12g}; refinements: {refinements})")
        self.energies = energies
        self.refinements = refinements


class UndefinedMetricError(VCQAError, ValueError):
    """The percentage error is undefined because the reference energy is ~0."""


class SingularScheduleError(VCQAError, ValueError):
    """F1 + F2 (or F1 where F3 is active) vanishes where the annealing-time integrand needs it."""


class DivergentLimitError(VCQAError, ValueError):
    """The endpoint limit of F3/F1 does not exist."""


class DegenerateDynamicsError(VCQAError, ValueError):
    """The commutator denominator of the annealing-time formula is ~0."""


class CostEvaluationError(VCQAError, RuntimeError):
    """A cost evaluation failed inside the variational loop."""


class OptimizationError(VCQAError, RuntimeError):
    """No start of the variational loop produced a finite cost."""


class ConfigError(VCQAError, ValueError):
    """The configuration file or an override is invalid."""
