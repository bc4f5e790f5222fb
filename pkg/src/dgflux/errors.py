"""Exception types shared across the solver."""

from __future__ import annotations

import numpy as np


class DGFluxError(Exception):
    """Base class for all solver errors."""


class NonPhysicalState(DGFluxError):
    """Raised when density or pressure is non-positive.

    ``values`` holds the offending states (one row per bad point) and
    ``where`` an optional description of the location (element, side, subcell).
    """

    def __init__(self, message: str, values=None, where=None):
        super().__init__(message)
        self.values = None if values is None else np.asarray(values)
        self.where = where


class VacuumGenerated(DGFluxError):
    """The exact Riemann problem would create a vacuum."""


class InvalidMeshError(DGFluxError):
    """Mesh is geometrically or topologically invalid."""

    def __init__(self, message: str, element_ids=None):
        super().__init__(message)
        self.element_ids = [] if element_ids is None else list(element_ids)


class FileFormatError(DGFluxError):
    """Binary file has the wrong magic, version, size or checksum."""


class ConfigError(DGFluxError):
    """Invalid configuration text or combination of options."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class TimestepUnderflow(DGFluxError):
    """The computed time step fell below the admissible minimum."""

    def __init__(self, message: str, element: int | None = None):
        super().__init__(message)
        self.element = element
