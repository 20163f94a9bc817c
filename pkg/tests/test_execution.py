import time

import pytest

from dynmediation.execution.pool import BenchmarkPool, PoolTask
from dynmediation.messages import OutputFields, RunStatus
from dynmediation.queue_tracker import TrackerRegistry


def square(x):
    return x * x


def nap(x):
    time.sleep(0.2)
    return x


def fail_on_three(x):
    if x == 3:
        raise ArithmeticError("three")
    return x


class RecordingPublisher:
    def __init__(self):
        self.updates = []

    def publish(self, update):
        self.updates.append(update)


def _tasks(fn, count=5, cell="cell"):
    # submitted in reverse to check key ordering
    return [PoolTask(key=(0, i), cell=cell, fn=fn, args=(i,)) for i in reversed(range(count))]


def test_pool_runs_tasks_in_key_order():
    records = BenchmarkPool(threads=1).run(_tasks(square))
    assert [r[OutputFields.RESULT] for r in records] == [0, 1, 4, 9, 16]
    assert all(r[OutputFields.STATUS] == RunStatus.COMPLETE.value for r in records)
    assert all(r[OutputFields.END_TIME] >= r[OutputFields.START_TIME] for r in records)


def test_failures_are_recorded_and_run_continues():
    publisher = RecordingPublisher()
    pool = BenchmarkPool(threads=1, publisher=publisher)
    records = pool.run(_tasks(fail_on_three))
    statuses = [r[OutputFields.STATUS] for r in records]
    assert statuses.count(RunStatus.FAILED.value) == 1
    assert records[3][OutputFields.ERROR] == "ArithmeticError: three"
    assert [f[OutputFields.TASK_ID] for f in pool.failed_records()] == ["cell#3"]
    assert len(publisher.updates) == 5
    assert publisher.updates[-1].completed == 5
    assert pool.registry.get_tracker("cell").get_failed() == {3: "ArithmeticError: three"}


def test_process_pool_matches_serial():
    serial = BenchmarkPool(threads=1).run(_tasks(fail_on_three, 8))
    parallel = BenchmarkPool(threads=2).run(_tasks(fail_on_three, 8))
    for a, b in zip(serial, parallel):
        assert a[OutputFields.STATUS] == b[OutputFields.STATUS]
        assert a[OutputFields.RESULT] == b[OutputFields.RESULT]


def test_duplicate_keys_rejected():
    task = PoolTask(key=(0, 0), cell="c", fn=square, args=(1,))
    with pytest.raises(ValueError):
        BenchmarkPool().run([task, task])


def test_parallel_runs_at_most_one_task_per_worker():
    registry = TrackerRegistry()
    tracker = registry.get_or_create_tracker("cell", 6)
    tracker.timeout_seconds = 0.0  # every started replication counts as outstanding
    outstanding = []

    class CountingPublisher:
        def publish(self, update):
            outstanding.append(len(tracker.get_stuck_replications()))

    records = BenchmarkPool(threads=2, publisher=CountingPublisher(), registry=registry).run(_tasks(nap, 6))
    assert len(outstanding) == 6
    assert max(outstanding) <= 2

    starts = sorted(r[OutputFields.START_TIME] for r in records)
    assert starts[-1] - starts[0] >= 0.3
    assert all(r[OutputFields.END_TIME] - r[OutputFields.START_TIME] >= 0.15 for r in records)
