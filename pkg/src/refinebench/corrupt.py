"""Imperfection injection: ``I_query = f(I_gt; params)`` plus the inverse trace."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import PoolTooSmall, SpecMismatch
from .raster import (
    BBox,
    add_gaussian_noise,
    default_sigma,
    dims,
    flip,
    gaussian_convolve,
    load_image,
    paste,
    resize,
    rotate_cw,
    to_u8,
)
from .tools.registry import ToolCall

KINDS = ("original", "rotation", "flip", "brightness", "blur", "noise", "crop",
         "expand", "overlay", "watermark", "realworld")
IMPERFECT_KINDS = KINDS[1:]

# parameter name -> admissible values, per kind
PARAM_SPACE: dict[str, dict[str, tuple]] = {
    "original": {},
    "rotation": {"angle": (90, 180, 270)},
    "flip": {"axis": ("h", "v", "both")},
    "brightness": {"beta": (0.25, 0.5, 1.5, 1.75)},
    "blur": {"ksize": (9, 15, 21, 27)},
    "noise": {"sigma_n": (0.05, 0.1, 0.15, 0.2)},
    "crop": {"scale": (0.4, 0.5, 0.6, 0.7)},
    "expand": {"quad": ("TL", "TR", "BL", "BR")},
    "overlay": {"location": ("TL", "TR", "BL", "BR", "C"), "scale": (0.125, 0.25, 0.5)},
    "watermark": {"font_scale": (1.0, 2.0, 3.0)},
    "realworld": {"template": (1, 2, 3, 4)},
}

FLIP_AXIS = {"h": "horizontal", "v": "vertical", "both": "both"}
QUAD_NAMES = {"TL": "top-left", "TR": "top-right", "BL": "bottom-left", "BR": "bottom-right"}

WATERMARK_TEXT = "Sanfrancisco, California"
WATERMARK_ALPHA = 0.5
WATERMARK_MARGIN = 8


@dataclass(frozen=True)
class CorruptionSpec:
    kind: str
    params: dict = field(default_factory=dict)

    def validate(self) -> "CorruptionSpec":
        if self.kind not in PARAM_SPACE:
            raise SpecMismatch(f"unknown corruption kind {self.kind!r}")
        space = PARAM_SPACE[self.kind]
        if set(self.params) != set(space):
            raise SpecMismatch(f"{self.kind} expects params {sorted(space)}, got {sorted(self.params)}")
        for name, allowed in space.items():
            if self.params[name] not in allowed:
                raise SpecMismatch(f"{self.kind}.{name}={self.params[name]!r} not in {allowed}")
        return self

    def to_dict(self) -> dict:
        return {"kind": self.kind, "params": self.params}


@dataclass
class SceneTemplate:
    background: Path
    screen: BBox
    location: str


@dataclass
class DistractorPool:
    distractors: list[Path]
    templates: list[SceneTemplate] = field(default_factory=list)
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @classmethod
    def load(cls, path) -> "DistractorPool":
        """Read a pool manifest; relative paths resolve against its directory."""
        path = Path(path)
        data = json.loads(path.read_text())
        root = path.parent
        templates = [
            SceneTemplate(root / t["background"], BBox.from_dict(t["screen"]), t["location"])
            for t in data.get("templates", [])
        ]
        return cls([root / p for p in data.get("distractors", [])], templates)

    def image(self, path: Path) -> np.ndarray:
        key = str(path)
        if key not in self._cache:
            self._cache[key] = load_image(path)
        return self._cache[key]

    def check(self) -> None:
        if len(self.distractors) < 3:
            raise PoolTooSmall(f"need at least 3 distractors, have {len(self.distractors)}")
        if len(self.templates) < 4:
            raise PoolTooSmall(f"need at least 4 scene templates, have {len(self.templates)}")


@dataclass
class CorruptionOutcome:
    image: np.ndarray
    question: str
    oracle_trace: list[ToolCall]
    aux_bbox: BBox | None = None
    provenance: dict = field(default_factory=dict)


def sample_spec(kind: str, rng: np.random.Generator) -> CorruptionSpec:
    if kind not in PARAM_SPACE:
        raise SpecMismatch(f"unknown corruption kind {kind!r}")
    params = {}
    for name, values in PARAM_SPACE[kind].items():
        params[name] = values[int(rng.integers(len(values)))]
    return CorruptionSpec(kind, params)


def reformulate_question(kind: str, location: str | None, question: str) -> str:
    if kind == "expand":
        return f"According to the {location} part of the image, {question}"
    if kind == "realworld":
        return f"According to the image on {location}, {question}"
    return question


def oracle_trace(spec: CorruptionSpec, aux_bbox: BBox | None = None,
                 location: str | None = None) -> list[ToolCall]:
    """Inverse tool sequence for a corruption.

    ``aux_bbox`` is required for expand, overlay, watermark and realworld;
    ``location`` (the scene phrase) for realworld.
    """
    k, p = spec.kind, spec.params
    if k in ("original", "crop"):
        return []
    if k == "rotation":
        return [ToolCall("rotate", {"degrees": 360 - p["angle"]})]
    if k == "flip":
        return [ToolCall("flip", {"direction": FLIP_AXIS[p["axis"]]})]
    if k == "brightness":
        return [ToolCall("lum", {"factor": 1.0 / p["beta"]})]
    if k == "blur":
        return [ToolCall("deblur", {})]
    if k == "noise":
        return [ToolCall("denoise", {})]
    if aux_bbox is None:
        raise SpecMismatch(f"{k} oracle needs the embedded-region box")
    if k == "expand":
        return [ToolCall("crop", {"bbox": aux_bbox.to_dict()})]
    if k in ("overlay", "watermark"):
        return [ToolCall("fill", {"bbox": aux_bbox.to_dict()})]
    if k == "realworld":
        return [ToolCall("locate", {"prompt": location}), ToolCall("crop", {"bbox": aux_bbox.to_dict()})]
    raise SpecMismatch(f"unknown corruption kind {k!r}")


# ---------------------------------------------------------------------------
# watermark font: 5x8 cells, '#' = ink; row 8 is the descender row

_GLYPHS = {
    "S": [".###.", "#...#", "#....", ".###.", "....#", "#...#", ".###.", "....."],
    "C": [".###.", "#...#", "#....", "#....", "#....", "#...#", ".###.", "....."],
    "a": [".....", ".....", ".###.", "....#", ".####", "#...#", ".####", "....."],
    "c": [".....", ".....", ".###.", "#....", "#....", "#...#", ".###.", "....."],
    "f": ["..##.", ".#..#", ".#...", "###..", ".#...", ".#...", ".#...", "....."],
    "i": ["..#..", ".....", ".##..", "..#..", "..#..", "..#..", ".###.", "....."],
    "l": [".##..", "..#..", "..#..", "..#..", "..#..", "..#..", ".###.", "....."],
    "n": [".....", ".....", "#.##.", "##..#", "#...#", "#...#", "#...#", "....."],
    "o": [".....", ".....", ".###.", "#...#", "#...#", "#...#", ".###.", "....."],
    "r": [".....", ".....", "#.##.", "##..#", "#....", "#....", "#....", "....."],
    "s": [".....", ".....", ".####", "#....", ".###.", "....#", "####.", "....."],
    ",": [".....", ".....", ".....", ".....", ".....", ".##..", "..#..", ".#..."],
    " ": ["....."] * 8,
}
_CELL_W, _CELL_H = 6, 8


def text_mask(text: str, pixel: int) -> np.ndarray:
    """Boolean ink mask for ``text`` with each font pixel drawn ``pixel`` wide."""
    cols = []
    for ch in text:
        glyph = np.array([[c == "#" for c in row] for row in _GLYPHS[ch]])
        cols.append(np.pad(glyph, ((0, 0), (0, 1))))
    mask = np.concatenate(cols, axis=1)[:, :-1]
    return np.kron(mask, np.ones((pixel, pixel), dtype=bool))


def _watermark(gt: np.ndarray, font_scale: float) -> tuple[np.ndarray, BBox, int]:
    w, h = dims(gt)
    n_cols = len(WATERMARK_TEXT) * _CELL_W - 1
    margin_x, margin_y = min(WATERMARK_MARGIN, w // 4), min(WATERMARK_MARGIN, h // 4)
    # glyph height is 16 px per unit of font scale; shrink only if the line cannot fit
    pixel = int(2 * font_scale)
    if n_cols * pixel > w - 2 * margin_x:
        pixel = max(1, (w - 2 * margin_x) // n_cols)
    mask = text_mask(WATERMARK_TEXT, pixel)
    mh, mw = mask.shape
    x2, y2 = w - margin_x, h - margin_y
    x1, y1 = x2 - mw, y2 - mh
    full = np.zeros((h, w), dtype=bool)
    sx, sy = max(0, -x1), max(0, -y1)
    full[max(0, y1):y2, max(0, x1):x2] = mask[sy:, sx:]
    out = gt.copy()
    if full.any():
        blended = WATERMARK_ALPHA * 255.0 + (1 - WATERMARK_ALPHA) * gt[full].astype(np.float64)
        out[full] = to_u8(blended)
        ys, xs = np.nonzero(full)
        box = BBox(int(xs.min()), int(ys.min()), int(xs.max()) + 1, int(ys.max()) + 1)
    else:
        box = BBox(max(0, x1), max(0, y1), x2, y2)
    return out, box, pixel


# ---------------------------------------------------------------------------


def _anchor(location: str, w: int, h: int, pw: int, ph: int) -> tuple[int, int]:
    return {
        "TL": (0, 0),
        "TR": (w - pw, 0),
        "BL": (0, h - ph),
        "BR": (w - pw, h - ph),
        "C": ((w - pw) // 2, (h - ph) // 2),
    }[location]


def _realworld(gt: np.ndarray, template: SceneTemplate, background: np.ndarray):
    # the scene is scaled so its screen matches the gt size exactly; gt is pasted unresampled
    w, h = dims(gt)
    bw, bh = dims(background)
    s = template.screen
    fx, fy = w / s.width, h / s.height
    x0, y0 = int(round(s.x1 * fx)), int(round(s.y1 * fy))
    new_w = max(int(round(bw * fx)), x0 + w)
    new_h = max(int(round(bh * fy)), y0 + h)
    scene = resize(background, (new_w, new_h))
    return paste(scene, gt, (x0, y0)), BBox(x0, y0, x0 + w, y0 + h)


def apply_corruption(gt: np.ndarray, question: str, spec: CorruptionSpec,
                     pool: DistractorPool | None, rng: np.random.Generator,
                     random_crop: bool = False) -> CorruptionOutcome:
    spec.validate()
    k, p = spec.kind, spec.params
    w, h = dims(gt)
    aux = None
    location = None
    prov: dict = {}

    if k in ("expand", "overlay", "realworld") and pool is None:
        raise PoolTooSmall(f"{k} needs a distractor pool")

    if k == "original":
        out = gt.copy()
    elif k == "rotation":
        out = rotate_cw(gt, p["angle"])
    elif k == "flip":
        out = flip(gt, FLIP_AXIS[p["axis"]])
    elif k == "brightness":
        out = to_u8(gt.astype(np.float64) * p["beta"])
    elif k == "blur":
        out = gaussian_convolve(gt, p["ksize"])
        prov["sigma"] = default_sigma(p["ksize"])
    elif k == "noise":
        out = add_gaussian_noise(gt, p["sigma_n"], rng)
    elif k == "crop":
        cw, ch = max(1, int(round(p["scale"] * w))), max(1, int(round(p["scale"] * h)))
        if random_crop:
            x, y = int(rng.integers(w - cw + 1)), int(rng.integers(h - ch + 1))
        else:
            x, y = (w - cw) // 2, (h - ch) // 2
        out = gt[y:y + ch, x:x + cw].copy()
        prov["crop_mode"] = "random" if random_crop else "central"
        prov["crop_box"] = BBox(x, y, x + cw, y + ch).to_dict()
    elif k == "expand":
        if len(pool.distractors) < 3:
            raise PoolTooSmall(f"expand needs 3 distractors, pool has {len(pool.distractors)}")
        picks = [int(i) for i in rng.choice(len(pool.distractors), size=3, replace=False)]
        tiles = [resize(pool.image(pool.distractors[i]), (w, h)) for i in picks]
        slot = ("TL", "TR", "BL", "BR").index(p["quad"])
        tiles.insert(slot, gt)
        out = np.concatenate([np.concatenate(tiles[:2], axis=1), np.concatenate(tiles[2:], axis=1)], axis=0)
        ox, oy = (slot % 2) * w, (slot // 2) * h
        aux = BBox(ox, oy, ox + w, oy + h)
        location = QUAD_NAMES[p["quad"]]
        prov["distractors"] = [pool.distractors[i].name for i in picks]
    elif k == "overlay":
        if not pool.distractors:
            raise PoolTooSmall("overlay needs at least one distractor")
        idx = int(rng.integers(len(pool.distractors)))
        pw, ph = max(1, int(round(p["scale"] * w))), max(1, int(round(p["scale"] * h)))
        patch = resize(pool.image(pool.distractors[idx]), (pw, ph))
        x, y = _anchor(p["location"], w, h, pw, ph)
        out = paste(gt, patch, (x, y), alpha=1.0)
        aux = BBox(x, y, x + pw, y + ph)
        prov["distractors"] = [pool.distractors[idx].name]
    elif k == "watermark":
        out, aux, pixel = _watermark(gt, p["font_scale"])
        prov["glyph_height"] = _CELL_H * pixel
    elif k == "realworld":
        if len(pool.templates) < 4:
            raise PoolTooSmall(f"realworld needs 4 scene templates, pool has {len(pool.templates)}")
        template = pool.templates[p["template"] - 1]
        out, aux = _realworld(gt, template, pool.image(template.background))
        location = template.location
        prov["background"] = template.background.name
    else:  # pragma: no cover - validate() already rejected it
        raise SpecMismatch(k)

    return CorruptionOutcome(
        image=out,
        question=reformulate_question(k, location, question),
        oracle_trace=oracle_trace(spec, aux, location),
        aux_bbox=aux,
        provenance=prov,
    )
