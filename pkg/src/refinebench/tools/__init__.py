"""The perceptual tool library."""

from .execute import TraceLog, TraceStep, execute_tool, execute_trace
from .locator import Locator, NullLocator, OracleLocator, RemoteLocator
from .registry import TOOL_NAMES, TOOLS, ToolCall, render_roster, validate_call
from .restore import nlm_denoise, richardson_lucy_deblur

__all__ = [
    "TOOL_NAMES",
    "TOOLS",
    "Locator",
    "NullLocator",
    "OracleLocator",
    "RemoteLocator",
    "ToolCall",
    "TraceLog",
    "TraceStep",
    "execute_tool",
    "execute_trace",
    "nlm_denoise",
    "render_roster",
    "richardson_lucy_deblur",
    "validate_call",
]
