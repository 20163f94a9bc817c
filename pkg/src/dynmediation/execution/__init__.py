"""Work pool for benchmark replications."""
from __future__ import annotations

from dynmediation.execution.pool import BenchmarkPool, PoolTask

__all__ = ["BenchmarkPool", "PoolTask"]
