"""
Project exceptions.

Every error carries the structured context a caller needs to report or
recover (file, aircraft, iteration) next to the human readable message.
"""

from typing import Optional


class TmaError(Exception):
    """Base class for all trajectory optimizer errors."""


class ConfigError(TmaError):
    """Invalid parameter, scenario or population file content."""

    def __init__(self, message: str, source: Optional[str] = None):
        super().__init__(message)
        self.source = source


class DynamicsDomainError(TmaError, ValueError):
    """A dynamics or geometry function was evaluated at a singular point."""

    def __init__(self, message: str, quantity: Optional[str] = None):
        super().__init__(message)
        self.quantity = quantity


class InfeasibleError(TmaError):
    """No particle holds a feasible solution for some aircraft."""

    def __init__(self, message: str, aircraft_id: Optional[str] = None,
                 iteration: Optional[int] = None, mpc_step: Optional[int] = None):
        super().__init__(message)
        self.aircraft_id = aircraft_id
        self.iteration = iteration
        self.mpc_step = mpc_step


class TraceFormatError(TmaError):
    """Malformed trace file. line_number is None for file-level schema errors."""

    def __init__(self, message: str, line_number: Optional[int] = None):
        super().__init__(message)
        self.line_number = line_number
