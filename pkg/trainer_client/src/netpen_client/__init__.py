"""Trainer-side adapter for the netpen protocol server."""

from .client import RemoteEnv, RemoteEnvError, RemoteEnvPool, default_server_command

__version__ = "0.1.0"

__all__ = ["RemoteEnv", "RemoteEnvError", "RemoteEnvPool", "default_server_command"]
