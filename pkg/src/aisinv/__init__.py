"""Immune-inspired prediction of loop-invariant shapes for a small while-language."""

from .ais import (
    Antibody, BudgetExhausted, InvariantTemplate, MemoryPool, OracleRejected, ResponseStats,
    affinity, default_pool, fragment_oracle, hypermutate, parse_template, receptor_edit, respond, train,
)
from .config import AisConfig, load_config
from .interp import Trace, run, sample_inputs
from .lang import Program, format, parse
from .shapespace import Fragment, ShapeVector, antibody_distance, antigenic_distance, encode, extract_fragments

__version__ = "0.1.0"

__all__ = [
    "AisConfig", "Antibody", "BudgetExhausted", "Fragment", "InvariantTemplate", "MemoryPool", "OracleRejected",
    "Program", "ResponseStats", "ShapeVector", "Trace", "affinity", "antibody_distance", "antigenic_distance",
    "default_pool", "encode", "extract_fragments", "format", "fragment_oracle", "hypermutate", "load_config",
    "parse", "parse_template", "receptor_edit", "respond", "run", "sample_inputs", "train",
]
