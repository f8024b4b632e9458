"""Security-aware service selection for IoT agents.

The package bundles a weighted security lattice, SecSLA classification,
an episodic service-selection simulator and a numpy deep Q-network.
"""

from secselect.errors import (
    ConfigurationError,
    ContractViolation,
    EvaluationError,
    IngestionError,
    SecselectError,
    StructuralError,
)
from secselect.lattice import SecurityClass, SecurityProperty, WeightedSecurityLattice

__version__ = "0.1.0"

__all__ = [
    "ConfigurationError",
    "ContractViolation",
    "EvaluationError",
    "IngestionError",
    "SecselectError",
    "SecurityClass",
    "SecurityProperty",
    "StructuralError",
    "WeightedSecurityLattice",
    "__version__",
]
