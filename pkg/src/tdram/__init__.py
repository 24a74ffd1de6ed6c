"""Simulator for a CNTFET 3-transistor ternary DRAM cell and its sense circuit."""

__version__ = "0.1.0"
