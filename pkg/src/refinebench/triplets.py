"""Benchmark generation, verification and SFT export.

A triplet manifest is JSONL, one :class:`RefinementTriplet` per line, with
image paths relative to the manifest's directory.
"""

from __future__ import annotations

import copy
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .agent.prompts import build_vqpp_prompt, check_vqpp_template, load_template
from .corrupt import (
    KINDS,
    WATERMARK_ALPHA,
    WATERMARK_TEXT,
    CorruptionSpec,
    DistractorPool,
    apply_corruption,
    reformulate_question,
    sample_spec,
)
from .errors import DecodeError, ImageNotFound, ManifestError, SourceMissing
from .raster import BBox, derive_seed, dims, load_image, make_rng, save_image
from .tools import OracleLocator, ToolCall, execute_trace

log = logging.getLogger(__name__)

MANIFEST_NAME = "triplets.jsonl"


@dataclass
class SourceRecord:
    id: str
    image: Path
    question: str
    answer: str
    golden_doc_ids: list[str]


def load_sources(path) -> list[SourceRecord]:
    path = Path(path)
    out = []
    for n, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            d = json.loads(line)
            rec = SourceRecord(str(d["id"]), path.parent / d["image"], d["question"], str(d["answer"]),
                               list(d["golden_doc_ids"]))
        except (ValueError, KeyError, TypeError) as exc:
            raise ManifestError(f"{path}:{n}: bad source record: {exc}") from exc
        if not rec.golden_doc_ids:
            raise ManifestError(f"{path}:{n}: golden_doc_ids is empty")
        out.append(rec)
    return out


@dataclass
class RefinementTriplet:
    sample_id: str
    source_id: str
    kind: str
    params: dict
    query_image: str
    gt_image: str
    question: str
    original_question: str
    answer: str
    golden_doc_ids: list[str]
    oracle_trace: list[dict]
    aux_bbox: dict | None
    seed: int
    is_original: bool
    provenance: dict = field(default_factory=dict)
    base_dir: Path | None = field(default=None, repr=False, compare=False)

    FIELDS = ("sample_id", "source_id", "kind", "params", "query_image", "gt_image", "question",
              "original_question", "answer", "golden_doc_ids", "oracle_trace", "aux_bbox", "seed",
              "is_original", "provenance")

    def to_dict(self) -> dict:
        return copy.deepcopy({k: getattr(self, k) for k in self.FIELDS})

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, separators=(",", ":"))

    @classmethod
    def from_dict(cls, d: dict, base_dir=None) -> "RefinementTriplet":
        return cls(**{k: d[k] for k in cls.FIELDS}, base_dir=Path(base_dir) if base_dir else None)

    @property
    def spec(self) -> CorruptionSpec:
        return CorruptionSpec(self.kind, self.params)

    @property
    def bbox(self) -> BBox | None:
        return BBox.from_dict(self.aux_bbox) if self.aux_bbox else None

    def path(self, rel: str) -> Path:
        return (self.base_dir or Path(".")) / rel

    def load_query(self) -> np.ndarray:
        return load_image(self.path(self.query_image))

    def load_gt(self) -> np.ndarray:
        return load_image(self.path(self.gt_image))

    def oracle_calls(self) -> list[ToolCall]:
        return [ToolCall.from_dict(d) for d in self.oracle_trace]


def read_manifest(path) -> list[RefinementTriplet]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ManifestError(f"cannot read {path}: {exc}") from exc
    out = []
    for n, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            out.append(RefinementTriplet.from_dict(json.loads(line), base_dir=path.parent))
        except (ValueError, KeyError, TypeError) as exc:
            raise ManifestError(f"{path}:{n}: {exc}") from exc
    return out


def write_manifest(triplets, path) -> Path:
    path = Path(path)
    path.write_text("".join(t.to_json() + "\n" for t in triplets), encoding="utf-8")
    return path


def oracle_locator(triplet: RefinementTriplet) -> OracleLocator:
    return OracleLocator(triplet.bbox)


# ---------------------------------------------------------------------------
# generation


def _generate_one(src: SourceRecord, pool: DistractorPool, run_seed: int, out_dir: Path,
                  random_crop: bool) -> list[RefinementTriplet]:
    try:
        gt = load_image(src.image)
    except (ImageNotFound, DecodeError) as exc:
        raise SourceMissing(f"source {src.id}: {exc}") from exc
    gt_rel = f"gt/{src.id}.png"
    save_image(gt, out_dir / gt_rel)
    triplets = []
    for kind in KINDS:
        seed = derive_seed(run_seed, src.id, kind)
        rng = make_rng(seed)
        spec = sample_spec(kind, rng)
        outcome = apply_corruption(gt, src.question, spec, pool, rng, random_crop=random_crop)
        sample_id = f"{src.id}__{kind}"
        q_rel = f"query/{sample_id}.png"
        save_image(outcome.image, out_dir / q_rel)
        triplets.append(RefinementTriplet(
            sample_id=sample_id,
            source_id=src.id,
            kind=kind,
            params=spec.params,
            query_image=q_rel,
            gt_image=gt_rel,
            question=outcome.question,
            original_question=src.question,
            answer=src.answer,
            golden_doc_ids=list(src.golden_doc_ids),
            oracle_trace=[c.to_dict() for c in outcome.oracle_trace],
            aux_bbox=outcome.aux_bbox.to_dict() if outcome.aux_bbox else None,
            seed=seed,
            is_original=kind == "original",
            provenance=outcome.provenance,
            base_dir=out_dir,
        ))
    return triplets


def generate(sources, pool: DistractorPool, run_seed: int, out_dir, *, random_crop: bool = False,
             workers: int = 1) -> Path:
    """Write 11 triplets per source (10 corruptions plus the original).

    ``sources`` is a list of :class:`SourceRecord` or a path to a source
    JSONL. Output is byte-identical for identical inputs and ``run_seed``.
    """
    if not isinstance(sources, list):
        sources = load_sources(sources)
    pool.check()
    out_dir = Path(out_dir)
    (out_dir / "gt").mkdir(parents=True, exist_ok=True)
    (out_dir / "query").mkdir(parents=True, exist_ok=True)
    with ThreadPoolExecutor(max_workers=max(1, workers)) as ex:
        per_source = list(ex.map(lambda s: _generate_one(s, pool, run_seed, out_dir, random_crop), sources))
    triplets = [t for group in per_source for t in group]
    meta = {
        "run_seed": run_seed,
        "n_sources": len(sources),
        "n_triplets": len(triplets),
        "n_imperfect": sum(not t.is_original for t in triplets),
        "crop_mode": "random" if random_crop else "central",
        "blur_sigma_rule": "0.3*((ksize-1)*0.5-1)+0.8",
        "watermark": {"text": WATERMARK_TEXT, "alpha": WATERMARK_ALPHA, "glyph_height_per_font_unit": 16},
    }
    (out_dir / "generation.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    log.info("wrote %d triplets for %d sources to %s", len(triplets), len(sources), out_dir)
    return write_manifest(triplets, out_dir / MANIFEST_NAME)


# ---------------------------------------------------------------------------
# verification (independent of the corruption engine's own bookkeeping)

_EXPECTED_TOOLS = {
    "original": [], "rotation": ["rotate"], "flip": ["flip"], "brightness": ["lum"],
    "blur": ["deblur"], "noise": ["denoise"], "crop": [], "expand": ["crop"],
    "overlay": ["fill"], "watermark": ["fill"], "realworld": ["locate", "crop"],
}
_EXACT_ROUNDTRIP = {"original", "rotation", "flip", "expand", "realworld"}


@dataclass
class TripletCheck:
    sample_id: str
    kind: str
    passed: bool
    message: str = ""


@dataclass
class VerifyReport:
    checks: list[TripletCheck]

    @property
    def count(self) -> int:
        return len(self.checks)

    @property
    def failures(self) -> list[TripletCheck]:
        return [c for c in self.checks if not c.passed]

    @property
    def passed(self) -> bool:
        return not self.failures

    def summary(self) -> str:
        if self.passed:
            return f"all {self.count} triplets pass"
        return f"{len(self.failures)} of {self.count} triplets fail"


def _check_params(t: RefinementTriplet) -> str | None:
    names = [op.get("tool") for op in t.oracle_trace]
    if names != _EXPECTED_TOOLS.get(t.kind):
        return f"oracle tools {names} != expected {_EXPECTED_TOOLS.get(t.kind)}"
    p = t.params
    first = t.oracle_trace[0]["params"] if t.oracle_trace else {}
    if t.kind == "rotation" and (p["angle"] + first.get("degrees", -1)) % 360:
        return f"rotate({first.get('degrees')}) does not undo {p['angle']}"
    if t.kind == "flip" and first.get("direction") != {"h": "horizontal", "v": "vertical", "both": "both"}[p["axis"]]:
        return f"flip({first.get('direction')}) does not undo axis {p['axis']}"
    if t.kind == "brightness" and abs(first.get("factor", 0) * p["beta"] - 1.0) > 1e-12:
        return f"lum({first.get('factor')}) does not undo beta {p['beta']}"
    return None


def verify_triplet(t: RefinementTriplet) -> TripletCheck:
    def fail(msg):
        return TripletCheck(t.sample_id, t.kind, False, msg)

    problem = _check_params(t)
    if problem:
        return fail(problem)
    try:
        query, gt = t.load_query(), t.load_gt()
    except (ImageNotFound, DecodeError) as exc:
        return fail(str(exc))
    restored, tlog = execute_trace(query, t.oracle_calls(), oracle_locator(t))
    errors = [s.message for s in tlog.steps if s.status != "ok"]
    if errors:
        return fail("; ".join(errors))

    if t.kind in _EXACT_ROUNDTRIP:
        if restored.shape != gt.shape or not np.array_equal(restored, gt):
            return fail("oracle replay is not pixel-identical to gt")
    elif t.kind in ("overlay", "watermark"):
        if restored.shape != gt.shape:
            return fail("fill changed image dimensions")
        box = t.bbox
        inside = np.zeros(gt.shape[:2], dtype=bool)
        inside[box.y1:box.y2, box.x1:box.x2] = True
        if not np.array_equal(restored[~inside], gt[~inside]):
            return fail("pixels outside the recorded box differ from gt")
        if not (restored[inside] == 255).all():
            return fail("pixels inside the recorded box are not white")
    elif t.kind == "brightness":
        expected = np.clip(np.floor(gt.astype(np.float64) * t.params["beta"] + 0.5), 0, 255)
        if not np.array_equal(query, expected.astype(np.uint8)):
            return fail("query is not gt scaled by beta")
    elif t.kind == "crop":
        w, h = dims(gt)
        want = (max(1, int(round(t.params["scale"] * w))), max(1, int(round(t.params["scale"] * h))))
        if dims(query) != want:
            return fail(f"crop size {dims(query)} != {want}")
    elif query.shape != gt.shape:
        return fail(f"{t.kind} changed image dimensions")

    if t.kind in ("expand", "realworld"):
        expected_q = reformulate_question(t.kind, _location_of(t), t.original_question)
        if t.question != expected_q:
            return fail("question reformulation mismatch")
    elif t.question != t.original_question:
        return fail("question changed for a kind that keeps it")
    return TripletCheck(t.sample_id, t.kind, True)


def _location_of(t: RefinementTriplet) -> str | None:
    if t.kind == "expand":
        return {"TL": "top-left", "TR": "top-right", "BL": "bottom-left", "BR": "bottom-right"}[t.params["quad"]]
    return t.oracle_trace[0]["params"].get("prompt") if t.oracle_trace else None


def verify(manifest) -> VerifyReport:
    triplets = manifest if isinstance(manifest, list) else read_manifest(manifest)
    return VerifyReport([verify_triplet(t) for t in triplets])


# ---------------------------------------------------------------------------
# SFT export


def sft_pair(t: RefinementTriplet, template: str) -> dict:
    return {
        "sample_id": t.sample_id,
        "image": t.query_image,
        "input": build_vqpp_prompt(t.question, template),
        "output": json.dumps({"operations": t.oracle_trace}, ensure_ascii=False),
    }


def export_sft(manifest, out_path, template: str | None = None) -> Path:
    """One training pair per triplet; the target is the oracle trace as JSON."""
    template = load_template("vqpp") if template is None else template
    check_vqpp_template(template)
    triplets = manifest if isinstance(manifest, list) else read_manifest(manifest)
    out_path = Path(out_path)
    with out_path.open("w", encoding="utf-8") as fh:
        for t in triplets:
            fh.write(json.dumps(sft_pair(t, template), ensure_ascii=False) + "\n")
    return out_path
