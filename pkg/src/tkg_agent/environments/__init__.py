from .base import (
    EnvConnectError,
    EnvError,
    EnvTimeout,
    Grammar,
    ProtocolViolation,
    ReplayDivergence,
    StepAfterDone,
    StepResult,
    TextEnv,
    UnknownVariation,
)
from .microlab import MicroLab, WorldDef, WorldDefError
from .replay import RecordingEnv, ReplayEnv
from .wire import EnvServer, RemoteEnv, Session, serve_stdio
from .worlds import SUBJECTS, default_world

__all__ = [
    "EnvConnectError", "EnvError", "EnvServer", "RecordingEnv", "RemoteEnv", "ReplayEnv", "Session",
    "serve_stdio", "EnvTimeout", "Grammar", "MicroLab", "ProtocolViolation",
    "ReplayDivergence", "SUBJECTS", "StepAfterDone", "StepResult", "TextEnv", "UnknownVariation",
    "WorldDef", "WorldDefError", "default_world",
]
