"""
Exception hierarchy for the riskquant package.
Every error carries the context needed to report it without re-deriving it.
"""
from typing import Dict, List, Optional


class RiskQuantError(Exception):
    """Base class for all riskquant errors."""


class ShapeError(RiskQuantError, ValueError):
    """Raised when array shapes do not chain or match."""

    def __init__(self, what: str, expected, got):
        self.what = what
        self.expected = expected
        self.got = got
        super().__init__(f"{what}: expected shape {expected}, got {got}")


class DomainError(RiskQuantError, ValueError):
    """Raised when a value lies outside the domain of a function (e.g. alpha not in (0, 1))."""

    def __init__(self, name: str, value, domain: str):
        self.name = name
        self.value = value
        self.domain = domain
        super().__init__(f"{name}={value!r} outside domain {domain}")


class InputError(RiskQuantError, ValueError):
    """Raised for invalid datasets or arguments."""


class UsageError(RiskQuantError, ValueError):
    """Raised when a model is used outside its contract (e.g. wrong alpha)."""


class MetricError(RiskQuantError, ValueError):
    """Raised when a metric is undefined on its inputs."""


class TrainingError(RiskQuantError, RuntimeError):
    """Raised when training produces a non-finite loss."""

    def __init__(self, epoch: int, step: int, loss: float):
        self.epoch = epoch
        self.step = step
        self.loss = loss
        super().__init__(f"Non-finite loss {loss!r} at epoch {epoch}, step {step}")


class SolverError(RiskQuantError, ArithmeticError):
    """Raised when a linear solve fails."""


class IntegrationError(RiskQuantError, ArithmeticError):
    """Raised when a quadrature meets non-finite integrand values."""


class ConfigError(RiskQuantError, ValueError):
    """Raised when an experiment configuration fails validation."""

    def __init__(self, field_errors: Dict[str, str], source: Optional[str] = None):
        self.field_errors = field_errors
        self.source = source
        lines: List[str] = [f"{field}: {msg}" for field, msg in field_errors.items()]
        prefix = f"Invalid config {source}" if source else "Invalid config"
        super().__init__(prefix + "\n  " + "\n  ".join(lines))


class StageError(RiskQuantError, RuntimeError):
    """Raised when a pipeline stage fails; carries the stage name."""

    def __init__(self, stage: str, cause: BaseException):
        self.stage = stage
        self.cause = cause
        super().__init__(f"Stage '{stage}' failed: {type(cause).__name__}: {cause}")
