"""Desk-scale wind turbine aero-servo simulation toolkit."""

__version__ = "0.1.0"
