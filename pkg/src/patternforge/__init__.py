"""Constrained random sampling patterns for event-driven ADCs."""

from .core import (
    UNBOUNDED,
    DerivedParams,
    InfeasibleConfig,
    Pattern,
    PatternVerdict,
    SamplingConfig,
    apply_pattern,
    derive_params,
    validate_pattern,
)
from .generators import (
    GENERATORS,
    PatternBag,
    generate_angie,
    generate_ars,
    generate_bag,
    generate_js,
)
from .rng import RandomSource

__version__ = "0.1.0"

__all__ = [
    "UNBOUNDED",
    "DerivedParams",
    "GENERATORS",
    "InfeasibleConfig",
    "Pattern",
    "PatternBag",
    "PatternVerdict",
    "RandomSource",
    "SamplingConfig",
    "apply_pattern",
    "derive_params",
    "generate_angie",
    "generate_ars",
    "generate_bag",
    "generate_js",
    "validate_pattern",
]
