"""Tool registry: one definition drives both validation and the agent prompt."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

from ..errors import SchemaError

TOOL_NAMES = ("rotate", "flip", "lum", "deblur", "denoise", "locate", "crop", "fill")
FLIP_DIRECTIONS = ("horizontal", "vertical", "both")
ROTATE_DEGREES = (90, 180, 270)


@dataclass(frozen=True)
class ToolCall:
    name: str
    params: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"tool": self.name, "params": self.params}

    @classmethod
    def from_dict(cls, d: dict) -> "ToolCall":
        return cls(d["tool"], dict(d.get("params") or {}))

    def __hash__(self):
        return hash((self.name, repr(sorted(self.params.items()))))


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _is_number(v) -> bool:
    return (isinstance(v, (int, float)) and not isinstance(v, bool)) and math.isfinite(v)


def _check_keys(params: dict, required: set, optional: set = frozenset()):
    for key in params:
        if key not in required and key not in optional:
            raise SchemaError(f"params.{key}", "unknown parameter")
    for key in required:
        if key not in params:
            raise SchemaError(f"params.{key}", "missing required parameter")


def _check_bbox(value, path: str):
    if not isinstance(value, dict):
        raise SchemaError(path, "bbox must be an object")
    for key in value:
        if key not in ("top_left", "bottom_right"):
            raise SchemaError(f"{path}.{key}", "unknown bbox key")
    corners = []
    for key in ("top_left", "bottom_right"):
        pt = value.get(key)
        if not isinstance(pt, (list, tuple)) or len(pt) != 2 or not all(_is_int(c) for c in pt):
            raise SchemaError(f"{path}.{key}", "expected [x, y] integer pair")
        if pt[0] < 0 or pt[1] < 0:
            raise SchemaError(f"{path}.{key}", "coordinates must be non-negative")
        corners.append(pt)
    (x1, y1), (x2, y2) = corners
    if not (x1 < x2 and y1 < y2):
        raise SchemaError(path, "bottom_right must lie strictly below and right of top_left")


def _v_rotate(p):
    _check_keys(p, {"degrees"})
    if not _is_int(p["degrees"]) or p["degrees"] not in ROTATE_DEGREES:
        raise SchemaError("params.degrees", "must be 90, 180, or 270")


def _v_flip(p):
    _check_keys(p, {"direction"})
    if p["direction"] not in FLIP_DIRECTIONS:
        raise SchemaError("params.direction", 'must be "horizontal", "vertical", or "both"')


def _v_lum(p):
    _check_keys(p, {"factor"})
    if not _is_number(p["factor"]) or p["factor"] <= 0:
        raise SchemaError("params.factor", "must be a finite number > 0")


def _v_none(p):
    _check_keys(p, set())


def _v_locate(p):
    _check_keys(p, {"prompt"})
    if not isinstance(p["prompt"], str) or not p["prompt"].strip():
        raise SchemaError("params.prompt", "must be a non-empty string")


def _v_region(p):
    # bbox may be omitted when a preceding locate supplies it
    _check_keys(p, set(), {"bbox"})
    if "bbox" in p:
        _check_bbox(p["bbox"], "params.bbox")


@dataclass(frozen=True)
class ToolSpec:
    name: str
    parameters: str
    purpose: str
    validator: Callable[[dict], None]
    extra: tuple[str, ...] = ()


_BBOX_PARAM = '{"bbox": dict}  # Format: {"top_left": [x, y], "bottom_right": [x, y]}'

TOOLS: dict[str, ToolSpec] = {
    t.name: t
    for t in [
        ToolSpec("rotate", '{"degrees": int}  # Must be 90, 180, or 270',
                 "Rotate the image clockwise", _v_rotate),
        ToolSpec("flip", '{"direction": str}  # "horizontal", "vertical", or "both"',
                 "Flip/mirror the image", _v_flip),
        ToolSpec("lum", '{"factor": float}  # >1.0 to brighten, <1.0 to darken',
                 "Adjust image brightness", _v_lum),
        ToolSpec("deblur", "none", "Remove blur and sharpen the image", _v_none),
        ToolSpec("denoise", "none", "Remove noise from the image", _v_none),
        ToolSpec("locate", '{"prompt": str}  # Description of object to find',
                 "Find object coordinates in the image", _v_locate,
                 ('Returns: {"top_left": [x, y], "bottom_right": [x, y]}',
                  "Note: Use this FIRST when you need coordinates for crop/fill")),
        ToolSpec("crop", _BBOX_PARAM,
                 "Keep ONLY the specified region, discard everything else", _v_region,
                 ("Use case: Focus on a specific object or area",
                  "Note: Usually used after locate to get the bbox")),
        ToolSpec("fill", _BBOX_PARAM,
                 "MASK OUT/HIDE the specified region by filling it with white", _v_region,
                 ("Use case: Remove watermarks, logos, distracting text, or irrelevant objects",
                  "Note: Usually used after locate to get the bbox")),
    ]
}


def validate_call(call) -> ToolCall:
    """Return ``call`` as a :class:`ToolCall` or raise :class:`SchemaError`.

    Accepts a ToolCall or an ``{"tool": ..., "params": ...}`` mapping.
    """
    if isinstance(call, dict):
        extra = set(call) - {"tool", "params"}
        if extra:
            raise SchemaError(sorted(extra)[0], "unknown operation key")
        if "tool" not in call:
            raise SchemaError("tool", "missing tool name")
        name, params = call["tool"], call.get("params", {})
        if params is None:
            params = {}
    elif isinstance(call, ToolCall):
        name, params = call.name, call.params
    else:
        raise SchemaError("", "operation must be an object")
    if not isinstance(name, str) or name not in TOOLS:
        raise SchemaError("tool", f"unknown tool {name!r}")
    if not isinstance(params, dict):
        raise SchemaError("params", "params must be an object")
    TOOLS[name].validator(params)
    return ToolCall(name, dict(params))


def render_roster() -> str:
    blocks = []
    for i, spec in enumerate(TOOLS.values(), start=1):
        lines = [f"{i}. {spec.name}",
                 f"   - Parameters: {spec.parameters}",
                 f"   - Purpose: {spec.purpose}"]
        lines += [f"   - {x}" for x in spec.extra]
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks)
