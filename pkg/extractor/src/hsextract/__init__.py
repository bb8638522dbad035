"""Hidden-state context server for frozen causal language models."""

from .mockmodel import MockBackbone
from .protocol import FORMAT_VERSION, ProtocolError, decode, encode
from .session import serve, serve_path
from .tasks import Task, load_tasks

__version__ = "0.1.0"

__all__ = [
    "FORMAT_VERSION",
    "MockBackbone",
    "ProtocolError",
    "Task",
    "decode",
    "encode",
    "load_tasks",
    "serve",
    "serve_path",
]
