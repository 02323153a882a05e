"""Deterministic procedural images and a demo dataset builder.

The images are smooth colour fields with a handful of hard-edged shapes, so
they have both flat regions and edges. They stand in for natural photos in
tests and demos.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .raster import BBox, derive_seed, make_rng, save_image, to_u8


def synthetic_image(seed: int, width: int = 96, height: int = 96, n_shapes: int = 6) -> np.ndarray:
    rng = make_rng(seed)
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    u, v = xx / width, yy / height

    field = np.zeros((height, width, 3))
    for c in range(3):
        base = rng.uniform(60, 190)
        for _ in range(3):
            fx, fy = rng.uniform(0.5, 3.0, size=2)
            phase = rng.uniform(0, 2 * np.pi)
            amp = rng.uniform(15, 45)
            field[..., c] += amp * np.cos(2 * np.pi * (fx * u + fy * v) + phase)
        field[..., c] += base

    for _ in range(n_shapes):
        color = rng.uniform(0, 255, size=3)
        cx, cy = rng.uniform(0, 1, size=2)
        rx, ry = rng.uniform(0.06, 0.28, size=2)
        if rng.random() < 0.5:
            mask = ((u - cx) / rx) ** 2 + ((v - cy) / ry) ** 2 <= 1.0
        else:
            mask = (np.abs(u - cx) <= rx) & (np.abs(v - cy) <= ry)
        field[mask] = 0.35 * field[mask] + 0.65 * color

    # mild grain so flat regions are not perfectly flat
    field += rng.normal(0, 2.0, size=field.shape)
    return to_u8(field)


def scene_background(seed: int, width: int, height: int, screen: BBox) -> np.ndarray:
    """A cluttered scene with a dark bezel drawn around ``screen``."""
    img = synthetic_image(seed, width, height, n_shapes=14).astype(np.float64)
    pad = max(2, min(width, height) // 40)
    x1, y1 = max(0, screen.x1 - pad), max(0, screen.y1 - pad)
    x2, y2 = min(width, screen.x2 + pad), min(height, screen.y2 + pad)
    img[y1:y2, x1:x2] = 30.0
    img[screen.y1:screen.y2, screen.x1:screen.x2] = 10.0
    return to_u8(img)


DEMO_TEMPLATES = [
    # (background size, screen box, location phrase)
    ((320, 240), BBox(20, 120, 140, 220), "bottom-left monitor"),
    ((320, 240), BBox(180, 20, 300, 110), "top-right monitor"),
    ((300, 300), BBox(90, 60, 210, 170), "laptop screen in the center"),
    ((360, 240), BBox(200, 110, 340, 225), "bottom-right television"),
]


def write_pool(out_dir, n_distractors: int = 8, seed: int = 7, size: int = 96) -> Path:
    """Write distractor images, four scene templates and ``pool.json``."""
    out_dir = Path(out_dir)
    (out_dir / "distractors").mkdir(parents=True, exist_ok=True)
    (out_dir / "templates").mkdir(parents=True, exist_ok=True)
    distractors = []
    for i in range(n_distractors):
        rel = f"distractors/d{i:03d}.png"
        save_image(synthetic_image(derive_seed(seed, "distractor", i), size, size), out_dir / rel)
        distractors.append(rel)
    templates = []
    for i, ((w, h), screen, phrase) in enumerate(DEMO_TEMPLATES):
        rel = f"templates/scene{i + 1}.png"
        save_image(scene_background(derive_seed(seed, "scene", i), w, h, screen), out_dir / rel)
        templates.append({"background": rel, "screen": screen.to_dict(), "location": phrase})
    path = out_dir / "pool.json"
    path.write_text(json.dumps({"distractors": distractors, "templates": templates}, indent=2) + "\n")
    return path


def write_demo_dataset(out_dir, n_sources: int = 5, n_extra_docs: int = 0, seed: int = 0,
                       size: tuple[int, int] = (96, 96)) -> dict:
    """Write sources, a matching i2i corpus and a distractor pool.

    Each source ``s`` gets golden document ``doc-s``; ``n_extra_docs`` further
    corpus entries act as retrieval distractors. Returns the written paths.
    """
    out_dir = Path(out_dir)
    (out_dir / "images").mkdir(parents=True, exist_ok=True)
    sources, corpus = [], []
    for i in range(n_sources + n_extra_docs):
        sid = f"s{i:04d}"
        rel = f"images/{sid}.png"
        save_image(synthetic_image(derive_seed(seed, "source", i), *size), out_dir / rel)
        doc = {
            "doc_id": f"doc-{sid}",
            "title": f"Entity {sid}",
            "text": f"Entity {sid} is a synthetic object number {i} built for desk-scale retrieval tests.",
            "image": rel,
        }
        corpus.append(doc)
        if i < n_sources:
            sources.append({
                "id": sid,
                "image": rel,
                "question": f"What is the number of entity {sid}?",
                "answer": str(i),
                "golden_doc_ids": [doc["doc_id"]],
            })
    sources_path = out_dir / "sources.jsonl"
    corpus_path = out_dir / "corpus.jsonl"
    sources_path.write_text("".join(json.dumps(r) + "\n" for r in sources))
    corpus_path.write_text("".join(json.dumps(r) + "\n" for r in corpus))
    pool_path = write_pool(out_dir / "pool", seed=derive_seed(seed, "pool"), size=size[0])
    return {"sources": sources_path, "corpus": corpus_path, "pool": pool_path}
