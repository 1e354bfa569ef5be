"""Exception types shared across the package."""


class DomainError(ValueError):
    """An input lies outside the domain where a formula is defined."""


class HypothesisError(DomainError):
    """A model or constant does not satisfy a theorem's hypotheses."""


class DegenerateDesignError(DomainError):
    """All regressors vanish, so the least-squares estimator is undefined."""


class ConvergenceError(RuntimeError):
    """An iterative solver hit its iteration cap."""


class DivergenceError(RuntimeError):
    """A stopping time was not reached before the step cap."""
