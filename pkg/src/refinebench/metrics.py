"""Three-level scoring: tool diagnostics (TSA, PS), Recall@K, answer EM."""

from __future__ import annotations

import csv
import io
import math
import re
import string
from collections import Counter, defaultdict

from .corrupt import IMPERFECT_KINDS, KINDS
from .errors import EmptyInput
from .raster import BBox, bbox_iou
from .tools.registry import ToolCall

SCOREABLE = ("rotate", "flip", "lum", "crop", "fill")


def _calls(seq) -> list[ToolCall]:
    return [c if isinstance(c, ToolCall) else ToolCall.from_dict(c) for c in seq]


def tool_selection_accuracy(pred, oracle) -> int:
    """1 iff the tool-name multisets agree once ``locate`` is ignored."""
    a = Counter(c.name for c in _calls(pred) if c.name != "locate")
    b = Counter(c.name for c in _calls(oracle) if c.name != "locate")
    return int(a == b)


def ordered_tool_match(pred, oracle) -> int:
    a = [c.name for c in _calls(pred) if c.name != "locate"]
    b = [c.name for c in _calls(oracle) if c.name != "locate"]
    return int(a == b)


def lum_similarity(pred_factor: float, gt_factor: float) -> float:
    return math.exp(-0.5 * abs(pred_factor - gt_factor))


def _param_match(pred: ToolCall, gt: ToolCall) -> float:
    if gt.name == "rotate":
        return float(pred.params.get("degrees") == gt.params["degrees"])
    if gt.name == "flip":
        return float(pred.params.get("direction") == gt.params["direction"])
    if gt.name == "lum":
        return lum_similarity(pred.params["factor"], gt.params["factor"])
    if "bbox" not in pred.params:
        return 0.0
    return bbox_iou(BBox.from_dict(pred.params["bbox"]), BBox.from_dict(gt.params["bbox"]))


def parameter_score(pred, oracle) -> float | None:
    """Mean parameter fidelity over the oracle's scoreable tools.

    ``pred`` should be the calls as executed (bboxes threaded from locate
    filled in). A scoreable oracle tool with no same-named prediction
    scores 0; duplicates in ``pred`` are paired greedily by best score.
    Returns None when the oracle has nothing to score.
    """
    targets = [c for c in _calls(oracle) if c.name in SCOREABLE]
    if not targets:
        return None
    pool = _calls(pred)
    used = set()
    scores = []
    for gt in targets:
        best, best_i = 0.0, None
        for i, p in enumerate(pool):
            if i in used or p.name != gt.name:
                continue
            s = _param_match(p, gt)
            if best_i is None or s > best:
                best, best_i = s, i
        if best_i is not None:
            used.add(best_i)
        scores.append(best)
    return sum(scores) / len(scores)


_PUNCT = string.punctuation + "‘’“”"


def _norm(text: str) -> str:
    return re.sub(r"\s+", " ", text.casefold()).strip()


def substring_exact_match(answer: str, gold: str) -> int:
    g = _norm(gold).strip(_PUNCT + " ")
    if not g:
        return 0
    return int(g in _norm(answer or ""))


# ---------------------------------------------------------------------------
# aggregation


def score_record(record: dict, triplet) -> dict:
    predicted = record.get("predicted_trace") or []
    executed = [s["executed"] for s in record.get("trace_log", []) if s.get("status") == "ok" and s.get("executed")]
    oracle = triplet.oracle_trace
    return {
        "sample_id": record["sample_id"],
        "kind": triplet.kind,
        "tsa": tool_selection_accuracy(predicted, oracle),
        "tsa_ordered": ordered_tool_match(predicted, oracle),
        "ps": parameter_score(executed, oracle),
        "recall_hit": record.get("recall_hit"),
        "em_hit": record.get("em_hit"),
    }


def _mean(values):
    vals = [v for v in values if v is not None]
    return (sum(vals) / len(vals), len(vals)) if vals else (None, 0)


def _summarise(rows) -> dict:
    tsa, _ = _mean(r["tsa"] for r in rows)
    tsa_o, _ = _mean(r["tsa_ordered"] for r in rows)
    ps, ps_n = _mean(r["ps"] for r in rows)
    rec, rec_n = _mean(r["recall_hit"] for r in rows)
    em, em_n = _mean(r["em_hit"] for r in rows)
    return {"n": len(rows), "tsa": tsa, "tsa_ordered": tsa_o, "ps": ps, "ps_n": ps_n,
            "recall": rec, "recall_n": rec_n, "em": em, "em_n": em_n}


def aggregate(records, triplets, k: int | None = None) -> dict:
    """Per-kind and overall means; ``triplets`` supplies oracle traces."""
    records = list(records)
    if not records:
        raise EmptyInput("no records to aggregate")
    by_id = {t.sample_id: t for t in triplets}
    rows = [score_record(r, by_id[r["sample_id"]]) for r in records if r["sample_id"] in by_id]
    if not rows:
        raise EmptyInput("no record matches the manifest")
    groups = defaultdict(list)
    for r in rows:
        groups[r["kind"]].append(r)

    per_kind = {kind: _summarise(groups[kind]) for kind in KINDS if kind in groups}
    base = per_kind.get("original", {}).get("recall")
    for kind, s in per_kind.items():
        s["recall_delta"] = ((s["recall"] - base) / base
                             if base and s["recall"] is not None and kind != "original" else None)

    imperfect = [r for r in rows if r["kind"] in IMPERFECT_KINDS]
    return {
        "meta": {
            "k": k,
            "tsa": "tool-name multiset match, locate ignored on both sides",
            "ps_aggregation": "per-sample mean over scoreable oracle tools, then mean over samples",
            "overall": "sample mean over the imperfect kinds; original reported separately",
        },
        "counts": {kind: len(groups[kind]) for kind in per_kind},
        "n_records": len(rows),
        "per_kind": per_kind,
        "imperfect": _summarise(imperfect) if imperfect else None,
        "original": per_kind.get("original"),
        "samples": rows,
    }


def empty_report(k: int | None = None) -> dict:
    zero = {"n": 0, "tsa": 0.0, "tsa_ordered": 0.0, "ps": 0.0, "ps_n": 0, "recall": 0.0, "recall_n": 0,
            "em": 0.0, "em_n": 0}
    return {"meta": {"k": k}, "counts": {}, "n_records": 0, "per_kind": {}, "imperfect": zero,
            "original": None, "samples": []}


_COLUMNS = ("n", "tsa", "ps", "recall", "recall_delta", "em")


def _cell(v) -> str:
    if v is None:
        return "-"
    if isinstance(v, float):
        return f"{v:.4f}"
    return str(v)


def report_rows(report: dict) -> list[list[str]]:
    rows = [[kind] + [_cell(s.get(c)) for c in _COLUMNS] for kind, s in report["per_kind"].items()]
    if report.get("imperfect"):
        rows.append(["IMPERFECT"] + [_cell(report["imperfect"].get(c)) for c in _COLUMNS])
    return rows


def render_table(report: dict) -> str:
    header = ["kind", *_COLUMNS]
    rows = [header] + report_rows(report)
    widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
    lines = ["  ".join(cell.ljust(w) if i == 0 else cell.rjust(w) for i, (cell, w) in enumerate(zip(r, widths)))
             for r in rows]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)


def render_csv(report: dict) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["kind", *_COLUMNS])
    writer.writerows(report_rows(report))
    return buf.getvalue()
