"""Exception types shared across the package."""


class ContractViolation(ValueError):
    """An argument violates a documented precondition."""


class UnsupportedOperation(ContractViolation):
    """The objective family does not provide the requested operation."""


class DegeneratePointError(ContractViolation):
    """The full gradient is too small for a ratio statistic to be defined."""


class ConfigError(ValueError):
    """An experiment configuration cannot be resolved."""
