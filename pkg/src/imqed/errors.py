"""Exception and warning types raised by the package."""

from __future__ import annotations


class ImqedError(ValueError):
    """Base class for all package errors."""


class NumericalError(ImqedError):
    """Errors that come from a numerical condition rather than bad input."""


class PoleProximity(NumericalError):
    """Requested frequency lies within the pole guard of an ac pole."""


class NonFinite(NumericalError):
    pass


class NotAPole(NumericalError):
    pass


class HigherOrderPole(NumericalError):
    pass


class SingularConversion(NumericalError):
    pass


class SingularAtFrequency(NumericalError):
    """The nodal matrix is singular at the requested frequency."""


class DegeneratePole(ImqedError):
    pass


class SingularDcResidue(NumericalError):
    pass


class DegenerateResidue(ImqedError):
    pass


class ResonantPair(NumericalError):
    def __init__(self, message: str, pair: tuple[int, int] | None = None):
        super().__init__(message)
        self.pair = pair


class NotBlockStructured(ImqedError):
    pass


class UnstableSystem(NumericalError):
    pass


class MissingParam(ImqedError):
    pass


class TruncationInsufficient(NumericalError):
    pass


class Nonphysical(NumericalError):
    pass


class StiffnessFailure(NumericalError):
    pass


class ZeroDenominator(NumericalError):
    pass


class DslSyntaxError(ImqedError):
    """Malformed netlist text; carries the 1-based line and column."""

    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"line {line}, col {col}: {message}")
        self.line = line
        self.col = col


class SemanticError(ImqedError):
    def __init__(self, message: str, line: int | None = None):
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)
        self.line = line


class NonTransmonRegime(UserWarning):
    """E_C / omega is large enough that the quartic expansion is doubtful."""


class PerturbativeWarning(UserWarning):
    """A coupling-to-detuning ratio exceeds the configured threshold."""


class NonLocalFrame(UserWarning):
    """The numeric frame mixes identical junctions into collective modes."""


class ConfigError(ImqedError):
    """Bad command-line flag, parameter or configuration file."""
