"""Magnetic wire-guide simulator for cold neutral atoms on a chip (atomfiber)"""

__version__ = "0.1.0"
