from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from ..errors import BBoxOutOfRange, NoDetection, RefineBenchError, SchemaError
from ..raster import BBox, dims, flip, rotate_cw, to_u8
from .locator import NullLocator
from .registry import ToolCall, validate_call
from .restore import nlm_denoise, richardson_lucy_deblur


def _region(image: np.ndarray, params: dict) -> BBox:
    box = BBox.from_dict(params["bbox"])
    w, h = dims(image)
    if not box.fits(w, h):
        raise BBoxOutOfRange(f"{box} does not fit in {w}x{h}")
    return box


def execute_tool(image: np.ndarray, call, locator=None):
    """Apply one tool. Returns an image, or a :class:`BBox` for ``locate``."""
    call = validate_call(call)
    p = call.params
    if call.name == "rotate":
        return rotate_cw(image, p["degrees"])
    if call.name == "flip":
        return flip(image, p["direction"])
    if call.name == "lum":
        return to_u8(image.astype(np.float64) * p["factor"])
    if call.name == "deblur":
        return richardson_lucy_deblur(image)
    if call.name == "denoise":
        return nlm_denoise(image)
    if call.name == "locate":
        box = (locator or NullLocator()).locate(image, p["prompt"])
        w, h = dims(image)
        if not box.fits(w, h):
            raise NoDetection(f"locator returned {box} outside {w}x{h}")
        return box
    if "bbox" not in p:
        raise SchemaError("params.bbox", "no bbox given and no preceding locate result")
    box = _region(image, p)
    if call.name == "crop":
        return image[box.y1:box.y2, box.x1:box.x2].copy()
    out = image.copy()
    out[box.y1:box.y2, box.x1:box.x2] = 255
    return out


@dataclass
class TraceStep:
    call: dict
    status: str
    message: str = ""
    elapsed_ms: float = 0.0
    executed: dict | None = None  # the call as run, with any threaded bbox filled in
    result_bbox: dict | None = None

    def to_dict(self) -> dict:
        return {
            "call": self.call,
            "status": self.status,
            "message": self.message,
            "elapsed_ms": round(self.elapsed_ms, 3),
            "executed": self.executed,
            "result_bbox": self.result_bbox,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TraceStep":
        return cls(**d)


@dataclass
class TraceLog:
    steps: list[TraceStep] = field(default_factory=list)

    def executed_calls(self) -> list[ToolCall]:
        return [ToolCall.from_dict(s.executed) for s in self.steps if s.status == "ok" and s.executed]

    def to_list(self) -> list[dict]:
        return [s.to_dict() for s in self.steps]

    @classmethod
    def from_list(cls, items) -> "TraceLog":
        return cls([TraceStep.from_dict(d) for d in items])


def _as_dict(call) -> dict:
    if isinstance(call, ToolCall):
        return call.to_dict()
    return call if isinstance(call, dict) else {"tool": repr(call)}


def execute_trace(image: np.ndarray, calls, locator=None) -> tuple[np.ndarray, TraceLog]:
    """Run ``calls`` in order; never raises.

    A ``locate`` result becomes the current box and is substituted into the
    next crop/fill lacking a bbox. A failing step is logged and skipped.
    """
    log = TraceLog()
    current = image
    last_box: BBox | None = None
    for raw in calls:
        t0 = time.perf_counter()
        step = TraceStep(call=_as_dict(raw), status="ok")
        try:
            call = validate_call(raw)
            if call.name in ("crop", "fill") and "bbox" not in call.params and last_box is not None:
                call = ToolCall(call.name, {"bbox": last_box.to_dict()})
            result = execute_tool(current, call, locator)
            step.executed = call.to_dict()
            if isinstance(result, BBox):
                last_box = result
                step.result_bbox = result.to_dict()
            else:
                current = result
                if call.name in ("crop", "fill"):
                    last_box = None
        except (RefineBenchError, ValueError, TypeError) as exc:
            step.status = "error"
            step.message = f"{type(exc).__name__}: {exc}"
        step.elapsed_ms = (time.perf_counter() - t0) * 1000.0
        log.steps.append(step)
    return current, log
