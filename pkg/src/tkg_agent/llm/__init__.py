from .core import (
    AuthFailure,
    BackendFailure,
    BackendTimeout,
    Completion,
    LLMError,
    Message,
    NoScriptedMatch,
    Prompt,
    RateLimitExhausted,
    render,
)
from .gateway import Gateway
from .remote import API_KEY_ENV, RemoteBackend
from .scripted import ScriptedBackend, ScriptedRule, load_rules
from .structured import QueryOrAnswer, StructuredParseError, clamp_reward, parse_structured

__all__ = [
    "API_KEY_ENV", "AuthFailure", "BackendFailure", "BackendTimeout", "Completion", "Gateway", "LLMError",
    "Message", "NoScriptedMatch", "Prompt", "QueryOrAnswer", "RateLimitExhausted", "RemoteBackend",
    "ScriptedBackend", "ScriptedRule", "StructuredParseError", "clamp_reward", "load_rules",
    "parse_structured", "render",
]
