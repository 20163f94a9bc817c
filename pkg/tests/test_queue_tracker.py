import time

from dynmediation.queue_tracker import ReplicationTracker, TrackerRegistry


def test_replication_tracker_progress():
    tracker = ReplicationTracker("proposed/n=100/T=10", total=3, timeout_seconds=0.01)
    tracker.register_started(0)
    tracker.register_started(1)
    assert tracker.get_progress() == (0, 3)
    tracker.mark_finished(0)
    assert tracker.get_progress() == (1, 3)
    assert tracker.get_pending_count() == 1
    time.sleep(0.02)
    assert [rep for rep, _ in tracker.get_stuck_replications()] == [1]


def test_failures_count_as_finished():
    tracker = ReplicationTracker("cell", total=2)
    tracker.mark_finished(0, error="RankDeficient: design")
    tracker.mark_finished(1)
    assert tracker.get_progress() == (2, 2)
    assert tracker.get_failed() == {0: "RankDeficient: design"}


def test_registry():
    registry = TrackerRegistry()
    tracker = registry.get_or_create_tracker("a", 2)
    assert registry.get_or_create_tracker("a", 5) is tracker
    registry.get_or_create_tracker("b", 3).mark_finished(0)
    assert registry.get_tracker("missing") is None
    assert registry.overall_progress() == (1, 5)
