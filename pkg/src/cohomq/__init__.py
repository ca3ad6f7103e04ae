"""One-dimensional reduction of prescribed Q-curvature problems on cohomogeneity-one manifolds."""

from .errors import CohomqError, ConfigError, NumericalError

__version__ = "0.1.0"

__all__ = ["CohomqError", "ConfigError", "NumericalError", "__version__"]
