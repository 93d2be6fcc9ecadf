"""Style-based date prediction for handwritten manuscripts.

Pipeline: bitonal manuscript images are decomposed into contour fraglets,
described by a self-organizing-map occupancy histogram adjoined to an angular
hinge histogram, reduced with PCA, and regressed onto calendar-year
probability curves with per-bin Bayesian ridge posteriors.
"""

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    DataError,
    DegenerateContourError,
    EmptyFeatureError,
    NumericError,
    ParseError,
    StylochronError,
)

__all__ = [
    "ConfigError",
    "DataError",
    "DegenerateContourError",
    "EmptyFeatureError",
    "NumericError",
    "ParseError",
    "StylochronError",
    "__version__",
]
