"""Live progress streaming."""
from __future__ import annotations

from dynmediation.streaming.publisher import ProgressPublisher

__all__ = ["ProgressPublisher"]
