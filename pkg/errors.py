#!/usr/bin/env python3
"""
Exception hierarchy for the ice-layer graph network
Each error carries the process exit code main.py reports for it
"""


class IceGnnError(Exception):
    """Base class for all library errors"""

    exit_code = 1


class ConfigError(IceGnnError):
    """Malformed or inconsistent configuration"""

    exit_code = 2


class InvalidInputError(IceGnnError):
    """Argument outside its documented domain"""

    exit_code = 3


class IncompleteLayerError(InvalidInputError):
    """Thickness vector with negative or missing entries"""


class MalformedRecordError(InvalidInputError):
    """Layer boundaries that decrease with depth"""


class DegenerateGeometryError(InvalidInputError):
    """Scattered points that cannot be triangulated"""


class InvalidGraphError(InvalidInputError):
    """Graph without a usable neighborhood"""


class ShapeError(IceGnnError):
    """Matrix dimensions that do not agree"""

    exit_code = 3


class ContractError(IceGnnError):
    """A caller broke an API contract (e.g. non-deterministic closure)"""

    exit_code = 1


class NumericFailureError(IceGnnError):
    """NaN or Inf reached the loss or a gradient"""

    exit_code = 4

    def __init__(self, message, last_good_state=None, history=None):
        super().__init__(message)
        self.last_good_state = last_good_state
        self.history = history if history is not None else []


class GradientCheckFailed(IceGnnError):
    """Analytic and numerical gradients disagree beyond tolerance"""

    exit_code = 5


class CheckpointError(IceGnnError):
    exit_code = 3


class VersionMismatchError(CheckpointError):
    pass


class CorruptManifestError(CheckpointError):
    pass
