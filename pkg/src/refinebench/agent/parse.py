"""Lenient extraction of JSON answers from model output."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

from ..errors import SchemaError
from ..tools.registry import ToolCall, validate_call

_FENCE = re.compile(r"```(?:[A-Za-z0-9_-]*)[ \t]*\n?(.*?)```", re.DOTALL)
_decoder = json.JSONDecoder()
MAX_SCAN = 64  # brace positions tried by the substring step


@dataclass
class VqppDecision:
    operations: list[ToolCall] = field(default_factory=list)
    raw_response: str = ""
    parse_status: str = "ok"  # ok | recovered | failed
    errors: list[str] = field(default_factory=list)


@dataclass
class RetrievalDecision:
    need_retrieval: bool
    reason: str = ""
    parse_status: str = "ok"


def _loads(text: str):
    try:
        return json.loads(text)
    except (ValueError, RecursionError):
        return None


def extract_json_object(raw) -> dict | None:
    """Find a JSON object in ``raw``.

    Tried in order: the whole string, the inside of markdown code fences,
    then the first ``{`` position from which a complete object decodes.
    """
    if isinstance(raw, (bytes, bytearray)):
        raw = bytes(raw).decode("utf-8", errors="replace")
    if not isinstance(raw, str):
        return None
    text = raw.strip()
    obj = _loads(text)
    if isinstance(obj, dict):
        return obj
    for block in _FENCE.findall(text):
        obj = _loads(block.strip())
        if isinstance(obj, dict):
            return obj
    start = text.find("{")
    tries = 0
    while start != -1 and tries < MAX_SCAN:
        try:
            obj, _ = _decoder.raw_decode(text, start)
        except (ValueError, RecursionError):
            obj = None
        if isinstance(obj, dict):
            return obj
        start = text.find("{", start + 1)
        tries += 1
    return None


def parse_operations(raw) -> VqppDecision:
    """Total: always returns a decision whose operations all validate."""
    if isinstance(raw, (bytes, bytearray)):
        raw = bytes(raw).decode("utf-8", errors="replace")
    elif not isinstance(raw, str):
        raw = "" if raw is None else str(raw)
    obj = extract_json_object(raw)
    if obj is None or not isinstance(obj.get("operations"), list):
        return VqppDecision([], raw, "failed", ["no JSON object with an operations list"])
    ops, errors = [], []
    for i, item in enumerate(obj["operations"]):
        try:
            ops.append(validate_call(item))
        except SchemaError as exc:
            errors.append(f"operations[{i}].{exc.path}: {exc.reason}")
        except (TypeError, ValueError, AttributeError) as exc:
            errors.append(f"operations[{i}]: {exc}")
    return VqppDecision(ops, raw, "recovered" if errors else "ok", errors)


def parse_retrieval_decision(raw) -> RetrievalDecision:
    """Unparseable answers default to retrieving."""
    obj = extract_json_object(raw)
    if obj is None or not isinstance(obj.get("need_retrieval"), bool):
        return RetrievalDecision(True, "unparseable decision; retrieving by default", "failed")
    reason = obj.get("reason", "")
    return RetrievalDecision(obj["need_retrieval"], reason if isinstance(reason, str) else str(reason))
