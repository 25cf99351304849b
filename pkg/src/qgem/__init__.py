"""Feasibility simulator and design optimiser for gravity-induced entanglement
of two nanodiamond Stern-Gerlach interferometers."""

from .physcore import CONSTANTS, Constants, Quantity, format_quantity, parse_quantity, to_si

__version__ = "0.1.0"

__all__ = ["CONSTANTS", "Constants", "Quantity", "format_quantity", "parse_quantity", "to_si"]
