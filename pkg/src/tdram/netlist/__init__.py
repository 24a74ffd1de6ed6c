"""Circuit model, netlist reader/writer and the cell and sense builders."""

from .builders import (
    CellParams,
    InvalidTrit,
    SENSE_OUT,
    StimulusSchedule,
    build_cell_with_sense,
    build_dram_cell,
    build_sense_circuit,
    trit_level,
)
from .model import (
    GROUND,
    Capacitor,
    Circuit,
    Cntfet,
    Diagnostic,
    Node,
    Pwl,
    Switch,
    VoltageSource,
    validate,
)
from .parser import NetlistError, parse_netlist, parse_value, serialize

__all__ = [
    "CellParams", "InvalidTrit", "SENSE_OUT", "StimulusSchedule", "build_cell_with_sense",
    "build_dram_cell", "build_sense_circuit", "trit_level", "GROUND", "Capacitor", "Circuit",
    "Cntfet", "Diagnostic", "Node", "Pwl", "Switch", "VoltageSource", "validate",
    "NetlistError", "parse_netlist", "parse_value", "serialize",
]
