"""Trisymplectic linear algebra and the ADHM construction of framed instantons."""

from .linalg import DEFAULT_TOL, Tolerance, TrisymError

__version__ = "0.1.0"

__all__ = ["DEFAULT_TOL", "Tolerance", "TrisymError", "__version__"]
