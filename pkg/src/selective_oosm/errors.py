"""
Exception hierarchy for the selective OOSM toolkit.
"""

import numpy as np


class OosmError(Exception):
    """Base class for all errors raised by this package."""


class DimensionMismatchError(OosmError, ValueError):
    """Operand shapes are incompatible."""


class NotPositiveDefiniteError(OosmError, np.linalg.LinAlgError):
    """A matrix could not be factorized even after jitter was added."""


class NotSymmetricError(OosmError, ValueError):
    """A symmetric-only operation received a non-symmetric matrix."""


class UndefinedBearingError(OosmError, ValueError):
    """The target sits exactly on a sensor, so its bearing is undefined."""


class WindowError(OosmError, LookupError):
    """A time step falls outside the stored window."""


class DegenerateWeightsError(OosmError, RuntimeError):
    """Every particle weight underflowed to zero."""


class ConfigError(OosmError, ValueError):
    """A scenario, selection or CLI setting is invalid."""
