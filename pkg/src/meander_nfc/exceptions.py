# meander_nfc/exceptions.py
"""
Exception hierarchy for meander-nfc.

Library code raises these; management commands map them to exit codes
(2 for validation problems, 3 for simulation errors).
"""
from django.core.exceptions import ValidationError


class MeanderNFCError(Exception):
    """Base class for every error raised by the simulator."""


class InvalidSpec(MeanderNFCError, ValueError):
    """A geometry, circuit or protocol description violates its invariants."""


class OverlapError(MeanderNFCError):
    """Two filament sets come closer than the sum of their wire radii."""


class DegenerateImpedance(MeanderNFCError, ZeroDivisionError):
    """An impedance used as a divisor is zero."""


class UnsupportedRate(MeanderNFCError, ValueError):
    """Bitrate or sample rate not supported by the NFC-A timing model."""


class SyncFailure(MeanderNFCError):
    """Preamble correlation fell below the receiver's sync threshold."""

    def __init__(self, message, correlation=None):
        super().__init__(message)
        self.correlation = correlation


class RankDeficient(MeanderNFCError, ValueError):
    """Least-squares calibration input does not determine a line."""


class CalibrationFailure(MeanderNFCError):
    """A calibration target could not be reached."""

    def __init__(self, message, residual=None, best=None):
        super().__init__(message)
        self.residual = residual
        self.best = best


class ScenarioParseError(MeanderNFCError):
    """Scenario file is not valid JSON."""

    def __init__(self, message, path=None, line=None, column=None):
        super().__init__(message)
        self.path = path
        self.line = line
        self.column = column

    def __str__(self):
        where = f"{self.path}:{self.line}:{self.column}" if self.line else self.path
        return f"{where}: {self.args[0]}" if where else self.args[0]


class ScenarioValidationError(ValidationError, MeanderNFCError):
    """
    Every validation problem found in a scenario.

    Built from a ``{field_path: [messages]}`` dict so callers get the full
    list, not just the first problem.
    """

    def __init__(self, errors):
        super().__init__(errors)

    def field_paths(self):
        return sorted(self.message_dict)

    def __str__(self):
        lines = []
        for path, messages in sorted(self.message_dict.items()):
            for message in messages:
                lines.append(f"{path}: {message}")
        return "\n".join(lines)
