"""Second-order invariant-domain-preserving solver for the multi-species Euler equations."""
from .thermo import PrimitiveState, SpeciesTable

__all__ = ["PrimitiveState", "SpeciesTable"]
__version__ = "0.1.0"
