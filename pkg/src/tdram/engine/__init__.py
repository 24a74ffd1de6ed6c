"""Nonlinear transient solver: DC operating point and fixed-step integration."""

from .solver import (
    InvalidCircuit,
    Method,
    NonConvergence,
    SolverConfig,
    WaveformSet,
    compile_circuit,
    dc_operating_point,
    transient,
)

__all__ = [
    "InvalidCircuit",
    "Method",
    "NonConvergence",
    "SolverConfig",
    "WaveformSet",
    "compile_circuit",
    "dc_operating_point",
    "transient",
]
