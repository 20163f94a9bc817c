"""ZMQ PUB socket that streams benchmark progress as JSON."""
from __future__ import annotations

import logging

import zmq

from dynmediation.config import ProgressConfig, TransportMode
from dynmediation.messages import ProgressUpdate
from dynmediation.transport import (
    coerce_transport_mode,
    get_progress_url,
    is_port_in_use,
    remove_ipc_socket,
)

logger = logging.getLogger(__name__)


class ProgressPublisher:
    """Publishes one ProgressUpdate per finished replication.

    With no port configured the publisher is disabled and ``publish`` does
    nothing. Send failures are logged and never interrupt a benchmark.
    """

    def __init__(self, config: ProgressConfig | None = None):
        self.config = config or ProgressConfig()
        self.socket = None
        self.url: str | None = None

    @property
    def enabled(self) -> bool:
        return self.config.port is not None

    def start(self) -> "ProgressPublisher":
        if not self.enabled or self.socket is not None:
            return self
        mode = coerce_transport_mode(self.config.transport_mode)
        if mode is TransportMode.IPC:
            remove_ipc_socket(self.config)
        elif is_port_in_use(self.config.port):
            logger.warning("Progress port %s is already in use; binding anyway", self.config.port)
        self.url = get_progress_url(self.config)
        context = zmq.Context.instance()
        self.socket = context.socket(zmq.PUB)
        self.socket.setsockopt(zmq.LINGER, 0)
        self.socket.bind(self.url)
        logger.info("Publishing benchmark progress on %s", self.url)
        return self

    def publish(self, update: ProgressUpdate):
        if self.socket is None:
            return
        try:
            self.socket.send_json(update.to_dict(), flags=zmq.NOBLOCK)
        except zmq.ZMQError as e:
            logger.warning("Failed to publish progress for %s: %s", update.cell, e)

    def close(self):
        if self.socket is not None:
            self.socket.close()
            self.socket = None
            if coerce_transport_mode(self.config.transport_mode) is TransportMode.IPC:
                remove_ipc_socket(self.config)
            logger.debug("Progress publisher closed")

    def __enter__(self):
        return self.start()

    def __exit__(self, exc_type, exc, tb):
        self.close()
        return False
