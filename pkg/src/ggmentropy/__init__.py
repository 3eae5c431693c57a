"""Generalized Gaussian entropy models for learned compression.

Special functions, the GGM distribution and its CDF gradients, baseline
entropy models, maximum-likelihood fitting, a range coder, and synthetic
benchmarks with a command-line front end.
"""

from .errors import ConvergenceError, CorruptStreamError, DomainError, InputFormatError
from .ggm import GgmParams

__version__ = "0.1.0"

__all__ = [
    "ConvergenceError",
    "CorruptStreamError",
    "DomainError",
    "GgmParams",
    "InputFormatError",
    "__version__",
]
