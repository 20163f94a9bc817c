"""Endpoint helpers for the benchmark progress stream."""
from __future__ import annotations

import logging
import platform
import socket
from pathlib import Path

from dynmediation.config import ProgressConfig, TransportMode

logger = logging.getLogger(__name__)


def get_default_transport_mode() -> TransportMode:
    """IPC sockets where the platform has them, TCP otherwise."""
    return TransportMode.TCP if platform.system() == "Windows" else TransportMode.IPC


def coerce_transport_mode(transport_mode) -> TransportMode | None:
    """Accept a TransportMode, its value, or None."""
    if transport_mode is None or isinstance(transport_mode, TransportMode):
        return transport_mode
    try:
        return TransportMode(str(getattr(transport_mode, "value", transport_mode)).lower())
    except ValueError:
        return None


def get_ipc_socket_path(port: int, config: ProgressConfig) -> Path | None:
    if platform.system() == "Windows":
        return None
    ipc_dir = Path.home() / f".{config.app_name}" / config.ipc_socket_dir
    return ipc_dir / f"{config.ipc_socket_prefix}-{port}{config.ipc_socket_extension}"


def get_progress_url(config: ProgressConfig, host: str | None = None) -> str:
    """Bind/connect URL of the progress socket described by ``config``."""
    if config.port is None:
        raise ValueError("progress streaming is disabled (no port configured)")
    mode = coerce_transport_mode(config.transport_mode) or get_default_transport_mode()
    if mode is TransportMode.IPC:
        socket_path = get_ipc_socket_path(config.port, config)
        if socket_path is None:
            raise ValueError("IPC transport is not supported on Windows; use TCP")
        socket_path.parent.mkdir(parents=True, exist_ok=True)
        return f"ipc://{socket_path}"
    return f"tcp://{host or config.host}:{config.port}"


def remove_ipc_socket(config: ProgressConfig) -> bool:
    """Remove a stale IPC socket file left by an earlier run."""
    if config.port is None:
        return False
    socket_path = get_ipc_socket_path(config.port, config)
    if socket_path and socket_path.exists():
        socket_path.unlink()
        logger.debug("Removed stale progress socket %s", socket_path)
        return True
    return False


def is_port_in_use(port: int, host: str = "localhost") -> bool:
    sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    sock.settimeout(0.1)
    try:
        sock.bind((host, port))
        return False
    except OSError:
        return True
    finally:
        sock.close()
