"""Output schemas and progress messages: field constants and frozen records."""

import logging
from dataclasses import dataclass
from enum import Enum

logger = logging.getLogger(__name__)


class OutputFields:
    TYPE = "type"
    # benchmark table
    METHOD = "method"
    N = "n"
    T = "T"
    MEDIATOR = "mediator"
    BIAS = "bias"
    SE = "se"
    RMSE = "rmse"
    REPS = "reps"
    SEED = "seed"
    FAILED = "failed"
    # analysis tables
    STAGE = "t"
    ETA = "eta"
    IIME = "iime"
    DIME = "dime"
    DELTA = "delta"
    SE_ETA = "se_eta"
    IMMEDIATE = "immediate"
    DELAYED = "delayed"
    SMOOTHED_SUFFIX = "_smooth"
    # progress stream
    TASK_ID = "task_id"
    CELL = "cell"
    STATUS = "status"
    COMPLETED = "completed"
    TOTAL = "total"
    TIMESTAMP = "timestamp"
    START_TIME = "start_time"
    END_TIME = "end_time"
    RESULT = "result"
    ERROR = "error"


BENCHMARK_COLUMNS = (
    OutputFields.METHOD, OutputFields.N, OutputFields.T, OutputFields.MEDIATOR,
    OutputFields.BIAS, OutputFields.SE, OutputFields.RMSE, OutputFields.REPS, OutputFields.SEED,
)

REPORT_COLUMNS = (
    OutputFields.STAGE, OutputFields.MEDIATOR, OutputFields.ETA,
    OutputFields.IIME, OutputFields.DIME, OutputFields.SE_ETA,
)


class RunStatus(Enum):
    QUEUED = "queued"
    RUNNING = "running"
    COMPLETE = "complete"
    FAILED = "failed"

    @property
    def is_finished(self) -> bool:
        return self in (RunStatus.COMPLETE, RunStatus.FAILED)


@dataclass(frozen=True)
class ProgressUpdate:
    """Published once per finished replication of a benchmark cell."""
    cell: str
    status: RunStatus
    completed: int
    total: int
    timestamp: float
    error: str | None = None

    def to_dict(self):
        result = {
            OutputFields.TYPE: "progress",
            OutputFields.CELL: self.cell,
            OutputFields.STATUS: self.status.value,
            OutputFields.COMPLETED: self.completed,
            OutputFields.TOTAL: self.total,
            OutputFields.TIMESTAMP: self.timestamp,
        }
        if self.error is not None:
            result[OutputFields.ERROR] = self.error
        return result

    @classmethod
    def from_dict(cls, data):
        return cls(
            cell=data[OutputFields.CELL],
            status=RunStatus(data[OutputFields.STATUS]),
            completed=data[OutputFields.COMPLETED],
            total=data[OutputFields.TOTAL],
            timestamp=data[OutputFields.TIMESTAMP],
            error=data.get(OutputFields.ERROR),
        )


@dataclass(frozen=True)
class BenchmarkRow:
    """Bias, empirical SE and RMSE of one (method, n, T, mediator) cell.

    se uses the sample convention (ddof=1) and rmse the population one, so
    rmse^2 = bias^2 + se^2 (reps - 1) / reps.
    """
    method: str
    n: int
    T: int
    mediator: int
    bias: float
    se: float
    rmse: float
    reps: int
    seed: int

    def identity_residual(self) -> float:
        return abs(self.rmse**2 - (self.bias**2 + self.se**2 * (self.reps - 1) / self.reps))

    def to_dict(self):
        return {
            OutputFields.METHOD: self.method,
            OutputFields.N: self.n,
            OutputFields.T: self.T,
            OutputFields.MEDIATOR: self.mediator,
            OutputFields.BIAS: self.bias,
            OutputFields.SE: self.se,
            OutputFields.RMSE: self.rmse,
            OutputFields.REPS: self.reps,
            OutputFields.SEED: self.seed,
        }

    @classmethod
    def from_dict(cls, data):
        return cls(
            method=str(data[OutputFields.METHOD]),
            n=int(data[OutputFields.N]),
            T=int(data[OutputFields.T]),
            mediator=int(data[OutputFields.MEDIATOR]),
            bias=float(data[OutputFields.BIAS]),
            se=float(data[OutputFields.SE]),
            rmse=float(data[OutputFields.RMSE]),
            reps=int(data[OutputFields.REPS]),
            seed=int(data[OutputFields.SEED]),
        )
