"""Exception hierarchy for dynmediation.

Two families map onto CLI exit codes: ValidationError (bad input, exit 2)
and NumericalError (estimation cannot proceed, exit 3).
"""
from __future__ import annotations

from typing import Sequence


class MediationError(Exception):
    """Base class for every error raised by dynmediation."""


class ValidationError(MediationError, ValueError):
    """Input data or configuration violates a documented invariant."""

    exit_code = 2


class NumericalError(MediationError, ArithmeticError):
    """A numerical step failed (rank, conditioning, convergence)."""

    exit_code = 3


class DimensionMismatch(ValidationError):
    pass


class NonFiniteValue(ValidationError):
    def __init__(self, subject: int, stage: int, field: str = "value"):
        self.subject = subject
        self.stage = stage
        self.field = field
        super().__init__(f"Non-finite {field} at subject={subject}, stage={stage}")


class CyclicGraph(ValidationError):
    def __init__(self, cycle: Sequence[tuple[int, int]] = ()):
        self.cycle = list(cycle)
        super().__init__(f"Graph is not acyclic (cycle: {self.cycle})")


class ParseError(ValidationError):
    def __init__(self, line: int, message: str):
        self.line = line
        super().__init__(f"line {line}: {message}")


class RaggedPanel(ValidationError):
    def __init__(self, subject, stage: int):
        self.subject = subject
        self.stage = stage
        super().__init__(f"Subject {subject} is missing stage {stage}")


class DuplicateRow(ValidationError):
    def __init__(self, subject, stage: int):
        self.subject = subject
        self.stage = stage
        super().__init__(f"Duplicate row for subject {subject}, stage {stage}")


class InsufficientPoints(ValidationError):
    pass


class ConfigError(ValidationError):
    pass


class RankDeficient(NumericalError):
    """Design matrix is not of full column rank.

    ``columns`` lists the design columns (0 = intercept when present) that
    the pivoted QR found to be linearly dependent on earlier ones.
    """

    def __init__(
        self,
        columns: Sequence[int] = (),
        stage: int | None = None,
        mediator: int | None = None,
        detail: str = "",
    ):
        self.columns = list(columns)
        self.stage = stage
        self.mediator = mediator
        self.detail = detail
        where = []
        if stage is not None:
            where.append(f"stage={stage}")
        if mediator is not None:
            where.append(f"mediator={mediator}")
        location = f" [{', '.join(where)}]" if where else ""
        suffix = f": {detail}" if detail else ""
        super().__init__(f"Rank-deficient design, dependent columns {self.columns}{location}{suffix}")

    def with_context(self, stage: int | None = None, mediator: int | None = None) -> "RankDeficient":
        return RankDeficient(
            self.columns,
            stage=self.stage if stage is None else stage,
            mediator=self.mediator if mediator is None else mediator,
            detail=self.detail,
        )


class SingularStructure(NumericalError):
    pass


class NonConvergence(NumericalError):
    pass


class NonStationaryModel(NumericalError):
    pass


class MissingQuantity(NumericalError):
    pass


class BootstrapFailure(NumericalError):
    def __init__(self, failed: int, total: int):
        self.failed = failed
        self.total = total
        super().__init__(f"{failed} of {total} bootstrap replicates failed (limit 10%)")
