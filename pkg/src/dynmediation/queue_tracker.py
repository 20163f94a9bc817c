"""Replication progress tracking for benchmark cells.

Counts queued, finished and failed replications per cell so the CLI can
log and stream '37/100 replications done' style progress.
"""

import logging
import threading
import time
from typing import Dict, Optional, Tuple

logger = logging.getLogger(__name__)


class ReplicationTracker:
    """Thread-safe progress of the replications of one benchmark cell."""

    def __init__(self, cell: str, total: int, timeout_seconds: float = 3600.0):
        self.cell = cell
        self.total = total
        self.timeout_seconds = timeout_seconds

        self._lock = threading.Lock()
        self._pending: Dict[int, float] = {}  # {replication: start time}
        self._completed = 0
        self._failed: Dict[int, str] = {}

    def register_started(self, replication: int):
        with self._lock:
            self._pending[replication] = time.time()

    def mark_finished(self, replication: int, error: Optional[str] = None):
        """Record a finished replication; ``error`` marks it as failed."""
        with self._lock:
            started = self._pending.pop(replication, None)
            elapsed = time.time() - started if started is not None else 0.0
            if error is None:
                self._completed += 1
            else:
                self._failed[replication] = error
            done = self._completed + len(self._failed)
            logger.debug("[%s] replication %d finished in %.2fs (%d/%d)", self.cell, replication, elapsed, done, self.total)
            if done == self.total:
                logger.info("[%s] all %d replications finished (%d failed)", self.cell, self.total, len(self._failed))

    def get_progress(self) -> Tuple[int, int]:
        """(finished, total), failures included in finished."""
        with self._lock:
            return (self._completed + len(self._failed), self.total)

    def get_failed(self) -> Dict[int, str]:
        with self._lock:
            return dict(self._failed)

    def get_pending_count(self) -> int:
        with self._lock:
            return len(self._pending)

    def get_stuck_replications(self) -> list:
        """(replication, elapsed seconds) for runs older than the timeout."""
        with self._lock:
            now = time.time()
            return [(r, now - t) for r, t in self._pending.items() if now - t > self.timeout_seconds]

    def __repr__(self):
        with self._lock:
            done = self._completed + len(self._failed)
            return f"ReplicationTracker({self.cell}, finished={done}/{self.total}, failed={len(self._failed)})"


class TrackerRegistry:
    """Per-run registry of cell trackers."""

    def __init__(self):
        self._trackers: Dict[str, ReplicationTracker] = {}
        self._lock = threading.Lock()

    def get_or_create_tracker(self, cell: str, total: int) -> ReplicationTracker:
        with self._lock:
            if cell not in self._trackers:
                self._trackers[cell] = ReplicationTracker(cell, total)
                logger.debug("Created replication tracker for %s (%d reps)", cell, total)
            return self._trackers[cell]

    def get_tracker(self, cell: str) -> Optional[ReplicationTracker]:
        with self._lock:
            return self._trackers.get(cell)

    def get_all_trackers(self) -> Dict[str, ReplicationTracker]:
        with self._lock:
            return dict(self._trackers)

    def overall_progress(self) -> Tuple[int, int]:
        with self._lock:
            progress = [t.get_progress() for t in self._trackers.values()]
        return sum(p[0] for p in progress), sum(p[1] for p in progress)
