"""Exception hierarchy shared across the broker."""

from __future__ import annotations


class ScopeVoiceError(Exception):
    """Base class for all broker errors."""


# -- case ingestion ----------------------------------------------------------

class MissingFile(ScopeVoiceError):
    pass


class SchemaViolation(ScopeVoiceError):
    """Case file fails structural validation; message names the field."""


class MeshDegenerate(ScopeVoiceError):
    """A segment mesh has no triangles; message names the segment."""


class AliasCollision(ScopeVoiceError):
    """Two segments (or lexicon entries) claim the same phrase."""


# -- scene mutations ---------------------------------------------------------

class UnknownTarget(ScopeVoiceError):
    pass


class ScrollWithoutCT(ScopeVoiceError):
    """CT scroll requested while the CT panel is closed."""


# -- geometry ----------------------------------------------------------------

class DegenerateMesh(ScopeVoiceError):
    pass


class NoTumorSegment(ScopeVoiceError):
    pass


# -- prompt building ---------------------------------------------------------

class RegistryEmpty(ScopeVoiceError):
    pass


class MatrixCaseMismatch(ScopeVoiceError):
    pass


class InvalidCorrectionResult(ScopeVoiceError):
    pass


# -- dispatch ----------------------------------------------------------------

class DuplicateName(ScopeVoiceError):
    pass


class RejectedBatch(ScopeVoiceError):
    """Whole call batch refused; nothing was applied."""

    def __init__(self, reasons: list[str]):
        super().__init__("; ".join(reasons))
        self.reasons = reasons


class ContractViolation(ScopeVoiceError):
    """A call the router must intercept leaked into the executor."""


# -- router / backend --------------------------------------------------------

class FormatError(ScopeVoiceError):
    """Backend reply contains no well-formed function call."""


class BackendUnavailable(ScopeVoiceError):
    pass


class BackendTimeout(ScopeVoiceError):
    pass


class BackendError(ScopeVoiceError):
    pass


class SessionClosed(ScopeVoiceError):
    pass


# -- dictation ---------------------------------------------------------------

class OutOfOrderEvent(ScopeVoiceError):
    pass


# -- service -----------------------------------------------------------------

class UnknownSession(ScopeVoiceError):
    pass


class ScriptParseError(ScopeVoiceError):
    def __init__(self, message: str, line_no: int):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no
