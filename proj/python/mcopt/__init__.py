"""Multicopter propulsion and vehicle design optimizer."""

from ._core import Database, Error, air_density, build_database, fit_thrust_current

__all__ = ["Database", "Error", "air_density", "build_database", "fit_thrust_current"]
__version__ = "0.1.0"
