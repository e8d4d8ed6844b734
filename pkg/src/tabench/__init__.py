"""Benchmarking toolkit for interpretable tabular models."""

from tabench.data import Dataset, PreprocessReport, ScalerParams, load_table, preprocess
from tabench.complexity import ComplexityProfile, profile

__all__ = [
    "ComplexityProfile",
    "Dataset",
    "PreprocessReport",
    "ScalerParams",
    "load_table",
    "preprocess",
    "profile",
]

__version__ = "0.1.0"
