"""Walk one source image through every corruption and back.

For each kind we print the oracle trace, then execute it and report how
close the restored image gets to the ground truth. Rotation, flip, expand
and the real-world recapture come back bit-exact. Fill whitens the marked
region rather than inpainting it, so overlay and watermark lose PSNR even
though the clutter is gone; crop has no fix at all.

    python3 demos/01_corrupt_and_restore.py
"""

from pathlib import Path

import numpy as np

from refinebench.raster import psnr
from refinebench.tools import execute_trace
from refinebench.corrupt import DistractorPool
from refinebench.triplets import generate, load_sources, oracle_locator, read_manifest

HERE = Path(__file__).parent
DATA = HERE / "data"
OUT = HERE / "out" / "triplets"


def describe(t) -> str:
    calls = t.oracle_calls()
    return " -> ".join(f"{c.name}({', '.join(f'{k}={v}' for k, v in c.params.items())})" for c in calls) or "(none)"


def main():
    sources = load_sources(DATA / "sources.jsonl")[:1]
    manifest = generate(sources, DistractorPool.load(DATA / "pool" / "pool.json"), run_seed=0, out_dir=OUT)
    for t in read_manifest(manifest):
        query, gt = t.load_query(), t.load_gt()
        restored, log = execute_trace(query, t.oracle_calls(), oracle_locator(t))
        if restored.shape != gt.shape:
            verdict = f"shape {restored.shape} vs {gt.shape}"
        elif np.array_equal(restored, gt):
            verdict = "exact"
        else:
            verdict = f"PSNR {psnr(gt, query) if query.shape == gt.shape else float('nan'):5.1f} -> {psnr(gt, restored):5.1f} dB"
        print(f"{t.kind:<11} {query.shape[1]:>4}x{query.shape[0]:<4} {verdict:<28} {describe(t)}")
    print(f"\nimages and manifest under {OUT}")


if __name__ == "__main__":
    main()
