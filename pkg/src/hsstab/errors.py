"""Exception hierarchy."""


class HSStabError(Exception):
    """Base class for errors raised by this package."""


class NotUnitaryError(HSStabError):
    def __init__(self, message: str, residual: float = float("nan")):
        super().__init__(message)
        self.residual = residual


class NotNormalError(HSStabError):
    pass


class EigensolverError(HSStabError):
    pass


class PresentationError(HSStabError, ValueError):
    pass


class InfeasibleRanksError(HSStabError):
    pass


class RankMismatchError(HSStabError):
    pass


class StabilizationError(HSStabError):
    """Raised by a corrector; ``stage`` names the pipeline step that failed."""

    def __init__(self, message: str, stage: str, report: dict | None = None):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage
        self.report = report or {}


class GroupError(HSStabError, ValueError):
    pass


class VerificationError(HSStabError):
    """An explicit construction disagrees with its closed form."""
