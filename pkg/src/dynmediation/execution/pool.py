"""Work pool for benchmark replications with per-task status records."""
from __future__ import annotations

import logging
import time
from collections import Counter
from concurrent.futures import FIRST_COMPLETED, ProcessPoolExecutor, wait
from concurrent.futures.process import BrokenProcessPool
from dataclasses import dataclass
from typing import Any, Callable, Iterable

from dynmediation.messages import OutputFields, ProgressUpdate, RunStatus
from dynmediation.queue_tracker import TrackerRegistry

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PoolTask:
    """One unit of work. ``fn`` must be a module-level function when threads > 1."""
    key: tuple
    cell: str
    fn: Callable[..., Any]
    args: tuple = ()

    @property
    def task_id(self) -> str:
        return f"{self.cell}#{self.key[-1]}"


def _invoke(fn: Callable[..., Any], args: tuple) -> tuple[float, Any]:
    """Run in the worker; returns the worker-side start time with the result."""
    started = time.time()
    return started, fn(*args)


class BenchmarkPool:
    """Runs tasks in-process (threads == 1) or on a process pool.

    Every task gets a record holding its status, timing, result and error.
    A failing task is recorded and the remaining tasks still run. ``run``
    returns the records sorted by task key, so the output does not depend
    on the completion order.
    """

    def __init__(self, threads: int = 1, publisher=None, registry: TrackerRegistry | None = None):
        self.threads = max(1, int(threads))
        self.publisher = publisher
        self.registry = registry or TrackerRegistry()
        self.records: dict[tuple, dict] = {}

    def _new_record(self, task: PoolTask) -> dict:
        return {
            OutputFields.TASK_ID: task.task_id,
            OutputFields.CELL: task.cell,
            OutputFields.STATUS: RunStatus.QUEUED.value,
            OutputFields.START_TIME: None,
            OutputFields.END_TIME: None,
            OutputFields.RESULT: None,
            OutputFields.ERROR: None,
        }

    def _mark_running(self, task: PoolTask, record: dict):
        record[OutputFields.STATUS] = RunStatus.RUNNING.value
        record[OutputFields.START_TIME] = time.time()
        self.registry.get_tracker(task.cell).register_started(task.key[-1])

    def _finish(self, task: PoolTask, record: dict, result: Any = None, error: BaseException | None = None):
        record[OutputFields.END_TIME] = time.time()
        elapsed = record[OutputFields.END_TIME] - (record[OutputFields.START_TIME] or record[OutputFields.END_TIME])
        if error is None:
            record[OutputFields.STATUS] = RunStatus.COMPLETE.value
            record[OutputFields.RESULT] = result
            logger.debug("[%s] ✓ Completed in %.2fs", task.task_id, elapsed)
        else:
            record[OutputFields.STATUS] = RunStatus.FAILED.value
            record[OutputFields.ERROR] = f"{type(error).__name__}: {error}"
            logger.error("[%s] ✗ Failed: %s", task.task_id, error, exc_info=error)

        tracker = self.registry.get_tracker(task.cell)
        tracker.mark_finished(task.key[-1], record[OutputFields.ERROR])
        if self.publisher is not None:
            completed, total = tracker.get_progress()
            self.publisher.publish(ProgressUpdate(
                cell=task.cell,
                status=RunStatus(record[OutputFields.STATUS]),
                completed=completed,
                total=total,
                timestamp=record[OutputFields.END_TIME],
                error=record[OutputFields.ERROR],
            ))

    def run(self, tasks: Iterable[PoolTask]) -> list[dict]:
        tasks = list(tasks)
        keys = [task.key for task in tasks]
        if len(set(keys)) != len(keys):
            raise ValueError("task keys must be unique")
        for cell, count in Counter(task.cell for task in tasks).items():
            self.registry.get_or_create_tracker(cell, count)
        for task in tasks:
            self.records[task.key] = self._new_record(task)
        logger.info("Running %d tasks over %d cells with %d worker(s)", len(tasks), len(set(t.cell for t in tasks)), self.threads)

        if self.threads == 1:
            for task in tasks:
                record = self.records[task.key]
                self._mark_running(task, record)
                try:
                    result = task.fn(*task.args)
                except Exception as e:
                    self._finish(task, record, error=e)
                else:
                    self._finish(task, record, result)
        else:
            self._run_parallel(tasks)

        return [self.records[key] for key in sorted(keys)]

    def _run_parallel(self, tasks: list[PoolTask]):
        pending = iter(tasks)
        in_flight = {}
        with ProcessPoolExecutor(max_workers=self.threads) as executor:

            def submit_next() -> bool:
                task = next(pending, None)
                if task is None:
                    return False
                self._mark_running(task, self.records[task.key])
                in_flight[executor.submit(_invoke, task.fn, task.args)] = task
                return True

            # at most one in-flight task per worker
            for _ in range(self.threads):
                if not submit_next():
                    break
            while in_flight:
                done, _ = wait(in_flight, return_when=FIRST_COMPLETED)
                for future in done:
                    task = in_flight.pop(future)
                    self._collect(task, future)
                    submit_next()

    def _collect(self, task: PoolTask, future):
        record = self.records[task.key]
        try:
            started, result = future.result()
        except BrokenProcessPool as e:
            logger.error("Worker pool broke while running %s", task.task_id)
            self._finish(task, record, error=e)
        except Exception as e:
            self._finish(task, record, error=e)
        else:
            record[OutputFields.START_TIME] = started
            self._finish(task, record, result)

    def failed_records(self) -> list[dict]:
        return [
            r for _, r in sorted(self.records.items())
            if r[OutputFields.STATUS] == RunStatus.FAILED.value
        ]
