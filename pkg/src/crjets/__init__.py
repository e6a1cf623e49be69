"""Exact formal-power-series workbench for CR submanifolds and their mappings."""
from .series_core import (
    GaussianRational,
    TruncatedSeries,
    I,
    compose,
    cramer_solve,
    implicit_solve,
    singular_implicit_solve,
    generic_rank,
    weighted_decompose,
)

__all__ = [
    "GaussianRational",
    "TruncatedSeries",
    "I",
    "compose",
    "cramer_solve",
    "implicit_solve",
    "singular_implicit_solve",
    "generic_rank",
    "weighted_decompose",
]
