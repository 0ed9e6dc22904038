"""Event-sourced engine that turns browsing activity into ranked comparison tables."""

from .config import EngineConfig
from .session import Session, SessionStore, persist, replay_session, restore

__version__ = "0.1.0"

__all__ = [
    "EngineConfig",
    "Session",
    "SessionStore",
    "persist",
    "replay_session",
    "restore",
    "__version__",
]
