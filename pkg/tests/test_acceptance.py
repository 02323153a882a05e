"""Acceptance suite: nine end-to-end criteria at their stated tolerances.

Each test prints one ``[criterion N] PASS|FAIL`` line; the same lines are
repeated in the pytest terminal summary.
"""

from __future__ import annotations

import json
import math
import signal
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from refinebench import synth
from refinebench.agent import parse_operations
from refinebench.corrupt import DistractorPool
from refinebench.metrics import parameter_score
from refinebench.pipeline import RunConfig, read_records, run_benchmark, strip_timings
from refinebench.raster import add_gaussian_noise, gaussian_convolve, iou_matrix, bbox_iou, BBox, make_rng, psnr
from refinebench.tools import ToolCall, execute_trace, nlm_denoise, richardson_lucy_deblur, validate_call
from refinebench.triplets import export_sft, generate, load_sources, oracle_locator, read_manifest

N_SOURCES = 50
CORPUS_SIZE = 1000


def _tree(root: Path) -> dict:
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


@pytest.fixture(scope="module")
def bench(tmp_path_factory):
    """50 sources, a 1,000-entry i2i corpus built from gt-style images, and their triplets."""
    root = tmp_path_factory.mktemp("acceptance")
    t0 = time.perf_counter()
    data = synth.write_demo_dataset(root / "data", n_sources=N_SOURCES, n_extra_docs=CORPUS_SIZE - N_SOURCES,
                                    seed=1)
    t_data = time.perf_counter() - t0
    t0 = time.perf_counter()
    manifest = generate(load_sources(data["sources"]), DistractorPool.load(data["pool"]), 2024, root / "gen")
    t_gen = time.perf_counter() - t0
    return {"root": root, "data": data, "manifest": manifest, "t_data": t_data, "t_gen": t_gen}


@pytest.fixture(scope="module")
def runs(bench):
    out = {}
    for agent in ("oracle", "pass"):
        cfg = RunConfig(manifest=str(bench["manifest"]), corpus=str(bench["data"]["corpus"]),
                        out_dir=str(bench["root"] / f"run_{agent}"), agent=agent, paradigm="i2i",
                        embedder="fingerprint", k=5)
        t0 = time.perf_counter()
        out[agent] = run_benchmark(cfg)
        out[f"t_{agent}"] = time.perf_counter() - t0
    return out


def test_1_oracle_roundtrip_exactness(bench, criterion):
    with criterion(1, "oracle roundtrip exactness") as c:
        t0 = time.perf_counter()
        triplets = read_manifest(bench["manifest"])
        assert len(triplets) == N_SOURCES * 11
        counts = {}
        for t in triplets:
            if t.kind not in ("rotation", "flip", "expand", "overlay", "watermark", "realworld"):
                continue
            query, gt = t.load_query(), t.load_gt()
            restored, log = execute_trace(query, t.oracle_calls(), oracle_locator(t))
            assert all(s.status == "ok" for s in log.steps), t.sample_id
            if t.kind in ("overlay", "watermark"):
                b = t.bbox
                inside = np.zeros(gt.shape[:2], bool)
                inside[b.y1:b.y2, b.x1:b.x2] = True
                assert restored.shape == gt.shape, t.sample_id
                assert np.array_equal(restored[~inside], gt[~inside]), t.sample_id
                assert (restored[inside] == 255).all(), t.sample_id
            else:
                assert np.array_equal(restored, gt), t.sample_id
            counts[t.kind] = counts.get(t.kind, 0) + 1
        elapsed = bench["t_gen"] + time.perf_counter() - t0
        assert all(n == N_SOURCES for n in counts.values()) and len(counts) == 6
        assert elapsed < 120
        c.detail = f"{sum(counts.values())} triplets over 6 kinds exact, generate+check {elapsed:.1f}s < 120s"


def test_2_determinism(bench, runs, criterion, tmp_path):
    with criterion(2, "determinism of generate and oracle runs") as c:
        again = generate(load_sources(bench["data"]["sources"]), DistractorPool.load(bench["data"]["pool"]), 2024,
                         tmp_path / "gen2", workers=2)
        a, b = _tree(Path(bench["manifest"]).parent), _tree(again.parent)
        assert a == b
        cfg = RunConfig(manifest=str(bench["manifest"]), corpus=str(bench["data"]["corpus"]),
                        out_dir=str(tmp_path / "run2"), agent="oracle", parallelism=2)
        second = run_benchmark(cfg)
        r1 = [strip_timings(r) for r in read_records(runs["oracle"].records_path)]
        r2 = [strip_timings(r) for r in read_records(second.records_path)]
        assert r1 == r2
        c.detail = f"{len(a)} generated files byte-identical; {len(r1)} oracle records identical modulo timings"


def test_3_metric_formula_oracles(criterion):
    with criterion(3, "metric formula oracles (lum similarity, IoU)") as c:
        rng = make_rng(3)
        worst = 0.0
        for _ in range(1000):
            pred, gt = rng.uniform(0.01, 10.0, size=2)
            got = parameter_score([ToolCall("lum", {"factor": float(pred)})], [ToolCall("lum", {"factor": float(gt)})])
            worst = max(worst, abs(got - math.exp(-0.5 * abs(pred - gt))))
        assert worst <= 1e-9

        # every integer box with corners in [0, 16]
        coords = [(x1, x2) for x1 in range(16) for x2 in range(x1 + 1, 17)]
        boxes = np.array([(x1, y1, x2, y2) for x1, x2 in coords for y1, y2 in coords])
        masks = np.zeros((len(boxes), 16, 16), np.float32)
        for i, (x1, y1, x2, y2) in enumerate(boxes):
            masks[i, y1:y2, x1:x2] = 1
        masks = masks.reshape(len(boxes), -1)
        area = masks.sum(axis=1).astype(np.float64)
        mismatches = 0
        for start in range(0, len(boxes), 1024):
            chunk = slice(start, start + 1024)
            inter = (masks[chunk] @ masks.T).astype(np.float64)  # integer counts <= 256, exact in float32
            expected = inter / (area[chunk, None] + area[None, :] - inter)
            mismatches += int(np.count_nonzero(iou_matrix(boxes[chunk], boxes) != expected))
        assert mismatches == 0
        # the scalar entry point shares the same arithmetic
        for i, j in rng.integers(0, len(boxes), size=(2000, 2)):
            assert bbox_iou(BBox(*map(int, boxes[i])), BBox(*map(int, boxes[j]))) == \
                float(iou_matrix(boxes[i], boxes[j])[0, 0])
        c.detail = f"lum max err {worst:.1e} on 1000 pairs; IoU exact on {len(boxes)}^2 box pairs"


def test_4_scripted_agent_calibration(runs, criterion):
    with criterion(4, "scripted-agent calibration") as c:
        oracle = runs["oracle"].report["imperfect"]
        passed = runs["pass"].report["imperfect"]
        assert oracle["tsa"] == 1.0 and oracle["ps"] == 1.0
        assert passed["tsa"] == 0.10
        c.detail = f"oracle TSA={oracle['tsa']} PS={oracle['ps']}; pass TSA={passed['tsa']}"


def test_5_directional_vulnerability_and_restoration(bench, runs, criterion):
    with criterion(5, "directional recall drop and oracle restoration") as c:
        pass_kinds = runs["pass"].report["per_kind"]
        oracle_kinds = runs["oracle"].report["per_kind"]
        original = pass_kinds["original"]["recall"]
        assert oracle_kinds["original"]["recall"] == original
        n_docs = sum(1 for _ in open(bench["data"]["corpus"]))
        assert n_docs == CORPUS_SIZE
        parts = []
        for kind in ("rotation", "flip", "expand", "realworld"):
            degraded, restored = pass_kinds[kind]["recall"], oracle_kinds[kind]["recall"]
            assert original - degraded >= 0.2, kind
            assert restored == original, kind
            parts.append(f"{kind} {degraded:.2f}->{restored:.2f}")
        elapsed = bench["t_data"] + bench["t_gen"] + runs["t_oracle"] + runs["t_pass"]
        assert elapsed < 300
        c.detail = f"original R@5={original:.2f}; " + ", ".join(parts) + f"; {elapsed:.0f}s < 300s"


def test_6_restoration_quality(criterion):
    with criterion(6, "restoration quality (deblur, denoise)") as c:
        deblur_wins = denoise_wins = 0
        for i in range(20):
            gt = synth.synthetic_image(1000 + i, 128, 128)
            blurred = gaussian_convolve(gt, 15)
            deblur_wins += psnr(gt, richardson_lucy_deblur(blurred)) > psnr(gt, blurred)
            noisy = add_gaussian_noise(gt, 0.1, make_rng(i))
            denoise_wins += psnr(gt, nlm_denoise(noisy)) > psnr(gt, noisy)
        assert deblur_wins >= 19 and denoise_wins >= 19
        c.detail = f"deblur {deblur_wins}/20, denoise {denoise_wins}/20"


def test_7_parser_totality(criterion):
    with criterion(7, "parser totality over 1e5 random byte strings") as c:
        rng = make_rng(7)
        seed_doc = json.dumps({"operations": [
            {"tool": "rotate", "params": {"degrees": 90}},
            {"tool": "locate", "params": {"prompt": "the screen"}},
            {"tool": "crop", "params": {"bbox": {"top_left": [1, 2], "bottom_right": [30, 40]}}},
            {"tool": "lum", "params": {"factor": 1.5}}]}).encode()
        emitted = 0
        n_random, n_mutated = 100_000, 50_000
        for i in range(n_random + n_mutated):
            if i < n_random:
                raw = rng.bytes(int(rng.integers(0, 256)))
            else:
                # structured mutation of a valid answer: flips, deletions and insertions
                buf = bytearray(seed_doc)
                for _ in range(int(rng.integers(1, 6))):
                    pos = int(rng.integers(0, len(buf)))
                    op = int(rng.integers(3))
                    if op == 0:
                        buf[pos] = int(rng.integers(256))
                    elif op == 1:
                        del buf[pos]
                    else:
                        buf[pos:pos] = rng.bytes(int(rng.integers(1, 4)))
                raw = bytes(buf)
            decision = parse_operations(raw)
            for op in decision.operations:
                validate_call(op)
                emitted += 1
        c.detail = (f"{n_random} random + {n_mutated} mutated-JSON inputs, no exceptions, "
                    f"{emitted} emitted operations all schema-valid")


def test_8_pipeline_resumability(bench, criterion, tmp_path):
    with criterion(8, "pipeline resumability after SIGKILL") as c:
        out = tmp_path / "killed"
        cmd = [sys.executable, "-m", "refinebench", "run", "--manifest", str(bench["manifest"]),
               "--corpus", str(bench["data"]["corpus"]), "--out", str(out), "--agent", "oracle"]
        proc = subprocess.Popen(cmd, stdout=subprocess.DEVNULL, stderr=subprocess.DEVNULL)
        records = out / "records.jsonl"
        deadline = time.time() + 120
        while time.time() < deadline:
            if records.exists() and records.read_bytes().count(b"\n") >= 60:
                break
            time.sleep(0.05)
        proc.send_signal(signal.SIGKILL)
        proc.wait()
        before = records.read_bytes().count(b"\n")
        total = N_SOURCES * 11
        assert 0 < before < total
        done = subprocess.run(cmd, capture_output=True, text=True)
        assert done.returncode == 0, done.stderr
        ids = [r["sample_id"] for r in read_records(records)]
        assert len(ids) == total and len(set(ids)) == total
        assert records.read_text().count("\n") == total
        c.detail = f"killed after {before} records, resumed to {len(ids)} unique records"


def test_9_sft_export_fidelity(bench, criterion, tmp_path):
    with criterion(9, "SFT export fidelity") as c:
        triplets = {t.sample_id: t for t in read_manifest(bench["manifest"])}
        path = export_sft(bench["manifest"], tmp_path / "sft.jsonl")
        pairs = [json.loads(line) for line in path.read_text().splitlines()]
        assert len(pairs) == len(triplets)
        for p in pairs:
            decision = parse_operations(p["output"])
            assert decision.parse_status == "ok"
            assert [op.to_dict() for op in decision.operations] == triplets[p["sample_id"]].oracle_trace
        c.detail = f"{len(pairs)} pairs parse back to their oracle traces"


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", *sys.argv[1:]]))
