from __future__ import annotations

from collections import Counter

import numpy as np
import pytest

from refinebench.corrupt import (
    KINDS,
    PARAM_SPACE,
    CorruptionSpec,
    DistractorPool,
    apply_corruption,
    oracle_trace,
    reformulate_question,
    sample_spec,
)
from refinebench.errors import PoolTooSmall, SpecMismatch
from refinebench.raster import BBox, dims, make_rng, new_image
from refinebench.synth import synthetic_image
from refinebench.tools import ToolCall, execute_trace


def test_every_kind_samples_from_its_value_set():
    rng = make_rng(1)
    for kind in KINDS:
        for _ in range(50):
            spec = sample_spec(kind, rng).validate()
            for name, value in spec.params.items():
                assert value in PARAM_SPACE[kind][name]
    assert sample_spec("original", rng).params == {}


def test_rotation_angles_are_uniform():
    rng = make_rng(123)
    counts = Counter(sample_spec("rotation", rng).params["angle"] for _ in range(10_000))
    assert set(counts) == {90, 180, 270}
    for n in counts.values():
        assert 0.30 <= n / 10_000 <= 0.37


def test_same_seed_same_spec():
    assert sample_spec("overlay", make_rng(9)) == sample_spec("overlay", make_rng(9))


def test_spec_rejects_values_outside_the_table():
    with pytest.raises(SpecMismatch):
        CorruptionSpec("rotation", {"angle": 45}).validate()
    with pytest.raises(SpecMismatch):
        CorruptionSpec("blur", {"ksize": 15, "sigma": 2}).validate()
    with pytest.raises(SpecMismatch):
        CorruptionSpec("smudge", {}).validate()


def test_oracle_traces_per_kind():
    box = BBox(0, 0, 4, 4)
    assert oracle_trace(CorruptionSpec("rotation", {"angle": 270})) == [ToolCall("rotate", {"degrees": 90})]
    assert oracle_trace(CorruptionSpec("crop", {"scale": 0.5})) == []
    assert oracle_trace(CorruptionSpec("original")) == []
    assert oracle_trace(CorruptionSpec("brightness", {"beta": 0.25})) == [ToolCall("lum", {"factor": 4.0})]
    assert oracle_trace(CorruptionSpec("flip", {"axis": "v"})) == [ToolCall("flip", {"direction": "vertical"})]
    assert [c.name for c in oracle_trace(CorruptionSpec("blur", {"ksize": 9}))] == ["deblur"]
    assert [c.name for c in oracle_trace(CorruptionSpec("noise", {"sigma_n": 0.1}))] == ["denoise"]
    rw = oracle_trace(CorruptionSpec("realworld", {"template": 1}), box, "bottom-left monitor")
    assert rw == [ToolCall("locate", {"prompt": "bottom-left monitor"}), ToolCall("crop", {"bbox": box.to_dict()})]
    assert oracle_trace(CorruptionSpec("watermark", {"font_scale": 1.0}), box) == [
        ToolCall("fill", {"bbox": box.to_dict()})]


def test_question_reformulation():
    assert reformulate_question("expand", "top-left", "What is it?") == \
        "According to the top-left part of the image, What is it?"
    assert reformulate_question("realworld", "bottom-left monitor", "q") == \
        "According to the image on bottom-left monitor, q"
    assert reformulate_question("rotation", None, "q") == "q"


def test_brightness_rounds_half_up():
    gt = new_image(2, 2, (201, 201, 201))
    out = apply_corruption(gt, "q", CorruptionSpec("brightness", {"beta": 0.5}), None, make_rng(0))
    assert np.all(out.image == 101)


def test_rotation_swaps_dims(img):
    out = apply_corruption(img, "q", CorruptionSpec("rotation", {"angle": 90}), None, make_rng(0))
    w, h = dims(img)
    assert dims(out.image) == (h, w)


@pytest.mark.parametrize("quad", ["TL", "TR", "BL", "BR"])
def test_expand_roundtrip(img, pool, quad):
    out = apply_corruption(img, "What is it?", CorruptionSpec("expand", {"quad": quad}), pool, make_rng(4))
    w, h = dims(img)
    assert dims(out.image) == (2 * w, 2 * h)
    restored, _ = execute_trace(out.image, out.oracle_trace)
    assert np.array_equal(restored, img)


@pytest.mark.parametrize("loc", ["TL", "TR", "BL", "BR", "C"])
@pytest.mark.parametrize("scale", [0.125, 0.25, 0.5])
def test_overlay_box_bounds_the_change(img, pool, loc, scale):
    out = apply_corruption(img, "q", CorruptionSpec("overlay", {"location": loc, "scale": scale}), pool,
                           make_rng(2))
    b = out.aux_bbox
    assert b.fits(*dims(img))
    outside = np.ones(img.shape[:2], bool)
    outside[b.y1:b.y2, b.x1:b.x2] = False
    assert np.array_equal(out.image[outside], img[outside])


@pytest.mark.parametrize("font", [1.0, 2.0, 3.0])
def test_watermark(font):
    gt = synthetic_image(3, 900, 200)  # wide enough for the 143-column line at scale 3
    out = apply_corruption(gt, "q", CorruptionSpec("watermark", {"font_scale": font}), None, make_rng(0))
    b = out.aux_bbox
    changed = np.any(out.image != gt, axis=2)
    ys, xs = np.nonzero(changed)
    assert b.x1 <= xs.min() and xs.max() < b.x2 and b.y1 <= ys.min() and ys.max() < b.y2
    assert b.x2 <= 900 - 8 and b.y2 <= 200 - 8  # bottom-right margin
    assert out.provenance["glyph_height"] == 16 * font


def test_watermark_shrinks_to_fit_the_width():
    gt = synthetic_image(3, 300, 100)
    out = apply_corruption(gt, "q", CorruptionSpec("watermark", {"font_scale": 3.0}), None, make_rng(0))
    assert out.provenance["glyph_height"] == 8  # (300 - 16) // 143 = 1 px per font pixel
    assert out.aux_bbox.x1 >= 8


def test_watermark_on_tiny_image_stays_inside():
    gt = synthetic_image(3, 20, 12)
    out = apply_corruption(gt, "q", CorruptionSpec("watermark", {"font_scale": 3.0}), None, make_rng(0))
    assert out.aux_bbox.fits(20, 12)


@pytest.mark.parametrize("template", [1, 2, 3, 4])
def test_realworld_recovers_screen_content(img, pool, template):
    out = apply_corruption(img, "q", CorruptionSpec("realworld", {"template": template}), pool, make_rng(0))
    assert out.question.startswith(f"According to the image on {pool.templates[template - 1].location}, ")
    b = out.aux_bbox
    assert np.array_equal(out.image[b.y1:b.y2, b.x1:b.x2], img)


def test_crop_central_and_random(img):
    w, h = dims(img)
    c = apply_corruption(img, "q", CorruptionSpec("crop", {"scale": 0.5}), None, make_rng(0))
    assert dims(c.image) == (round(0.5 * w), round(0.5 * h))
    assert c.provenance["crop_mode"] == "central"
    r = apply_corruption(img, "q", CorruptionSpec("crop", {"scale": 0.5}), None, make_rng(0), random_crop=True)
    assert r.provenance["crop_mode"] == "random"
    box = BBox.from_dict(r.provenance["crop_box"])
    assert np.array_equal(r.image, img[box.y1:box.y2, box.x1:box.x2])


def test_outcome_is_pure(img, pool):
    spec = CorruptionSpec("noise", {"sigma_n": 0.2})
    a = apply_corruption(img, "q", spec, pool, make_rng(77))
    b = apply_corruption(img, "q", spec, pool, make_rng(77))
    assert np.array_equal(a.image, b.image)


def test_pool_requirements(img, tmp_path):
    small = DistractorPool([tmp_path / "a.png", tmp_path / "b.png"])
    with pytest.raises(PoolTooSmall):
        small.check()
    with pytest.raises(PoolTooSmall):
        apply_corruption(img, "q", CorruptionSpec("expand", {"quad": "TL"}), small, make_rng(0))
    with pytest.raises(PoolTooSmall):
        apply_corruption(img, "q", CorruptionSpec("overlay", {"location": "C", "scale": 0.25}), None, make_rng(0))
