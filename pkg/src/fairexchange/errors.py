class ConfigurationError(ValueError):
    """Invalid experiment or model parameter."""


class ContractViolation(ValueError):
    """An operation was handed inputs that break its preconditions."""
