"""Offline benchmark on the shipped demo data.

Generates triplets for five sources, then scores three scripted agents:
one that always applies the right fix, one that never touches the query,
and one that picks tools at random. The fingerprint embedder stands in for
a learned one, so everything runs locally in a few seconds.

    python3 demos/02_benchmark_offline.py
"""

from pathlib import Path

from refinebench.corrupt import DistractorPool
from refinebench.metrics import render_table
from refinebench.pipeline import RunConfig, run_benchmark
from refinebench.triplets import generate, verify

HERE = Path(__file__).parent
DATA = HERE / "data"
OUT = HERE / "out"


def main():
    manifest = generate(DATA / "sources.jsonl", DistractorPool.load(DATA / "pool" / "pool.json"),
                        run_seed=0, out_dir=OUT / "triplets")
    print(verify(manifest).summary())

    for agent in ("oracle", "pass", "random"):
        config = RunConfig(manifest=str(manifest), corpus=str(DATA / "corpus.jsonl"),
                           out_dir=str(OUT / f"run_{agent}"), agent=agent, paradigm="i2i", k=5)
        result = run_benchmark(config)
        print(f"\n== {agent} agent ({result.records_path})")
        print(render_table(result.report))


if __name__ == "__main__":
    main()
