"""Consumer price-exchange simulator on top of a personalized-pricing market."""

from fairexchange.errors import ConfigurationError, ContractViolation

__version__ = "0.1.0"

__all__ = ["ConfigurationError", "ContractViolation", "__version__"]
