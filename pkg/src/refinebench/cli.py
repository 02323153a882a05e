"""``refinebench`` command line: generate, verify, run, score, export-sft, inspect.

Exit status: 0 success, 1 operational failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import metrics, pipeline, triplets
from .agent.prompts import load_template
from .corrupt import DistractorPool
from .errors import RefineBenchError

log = logging.getLogger("refinebench")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _cmd_generate(args) -> int:
    sources = triplets.load_sources(args.sources)
    pool = DistractorPool.load(args.pool)
    path = triplets.generate(sources, pool, args.seed, args.out, random_crop=args.random_crop,
                             workers=args.workers)
    n = len(triplets.read_manifest(path))
    print(f"wrote {n} triplets to {path}")
    return 0


def _cmd_verify(args) -> int:
    report = triplets.verify(args.manifest)
    for check in report.failures:
        print(f"FAIL {check.sample_id}: {check.message}")
    print(report.summary())
    return 0 if report.passed else 1


def _overrides(args) -> dict:
    keys = ("manifest", "corpus", "out_dir", "paradigm", "embedder", "agent", "generator", "locator", "k",
            "parallelism", "run_seed")
    out = {k: getattr(args, k) for k in keys}
    if args.force_retrieval is not None:
        out["force_retrieval"] = args.force_retrieval
    if args.vqpp_template:
        out["templates"] = {"vqpp": args.vqpp_template}
    return out


def _cmd_run(args) -> int:
    overrides = _overrides(args)
    if not args.config and not args.manifest:
        raise UsageError("run: either --config or --manifest is required")
    try:
        if args.config:
            config = pipeline.load_config(args.config, overrides)
        else:
            config = pipeline.RunConfig.from_dict({k: v for k, v in overrides.items() if v is not None})
    except (ValueError, TypeError) as exc:  # bad config values are the caller's mistake
        raise UsageError(f"run: invalid configuration: {exc}") from exc
    result = pipeline.run_benchmark(config)
    print(f"{result.n_new} new records -> {result.records_path}")
    print(metrics.render_table(result.report))
    return 0


def _cmd_score(args) -> int:
    report = pipeline.summarise(args.records, args.manifest, k=args.k)
    if args.json:
        Path(args.json).write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
    if args.csv:
        Path(args.csv).write_text(metrics.render_csv(report), encoding="utf-8")
    print(metrics.render_table(report))
    return 0


def _cmd_export_sft(args) -> int:
    template = load_template("vqpp", args.template) if args.template else None
    path = triplets.export_sft(args.manifest, args.out, template)
    print(f"wrote {path}")
    return 0


def _cmd_inspect(args) -> int:
    found = [t for t in triplets.read_manifest(args.manifest) if t.sample_id == args.sample]
    if not found:
        print(f"no triplet {args.sample!r} in {args.manifest}", file=sys.stderr)
        return 1
    t = found[0]
    print("triplet:")
    print(json.dumps(t.to_dict(), indent=2))
    print("oracle trace:")
    for call in t.oracle_calls():
        print(f"  {call.name} {json.dumps(call.params)}")
    if args.records:
        recs = [r for r in pipeline.read_records(args.records) if r["sample_id"] == args.sample]
        print("record:")
        print(json.dumps(recs[0], indent=2) if recs else "  (none)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="refinebench", description="Imperfect visual query benchmark toolkit.")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="build triplets from clean sources")
    g.add_argument("--sources", required=True, help="sources JSONL")
    g.add_argument("--pool", required=True, help="distractor pool JSON")
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--out", required=True, help="output directory")
    g.add_argument("--random-crop", action="store_true", help="seeded crop offsets instead of central")
    g.add_argument("--workers", type=int, default=1)
    g.set_defaults(func=_cmd_generate)

    v = sub.add_parser("verify", help="check every triplet against its oracle trace")
    v.add_argument("--manifest", required=True)
    v.set_defaults(func=_cmd_verify)

    r = sub.add_parser("run", help="run the refine/retrieve/answer loop")
    r.add_argument("--config", help="TOML or JSON run config; flags override it")
    r.add_argument("--manifest")
    r.add_argument("--corpus")
    r.add_argument("--out", dest="out_dir")
    r.add_argument("--paradigm", choices=pipeline.PARADIGMS)
    r.add_argument("--embedder", choices=("fingerprint", "remote"))
    r.add_argument("--agent", help="oracle, pass, random or chat:<backend>")
    r.add_argument("--generator", help="chat backend used to answer")
    r.add_argument("--locator", choices=("oracle", "none", "remote"))
    r.add_argument("--k", type=int)
    r.add_argument("--parallelism", type=int)
    r.add_argument("--seed", dest="run_seed", type=int)
    r.add_argument("--vqpp-template", help="override file for the tool-selection prompt")
    fr = r.add_mutually_exclusive_group()
    fr.add_argument("--force-retrieval", dest="force_retrieval", action="store_true", default=None)
    fr.add_argument("--agent-decides-retrieval", dest="force_retrieval", action="store_false")
    r.set_defaults(func=_cmd_run)

    s = sub.add_parser("score", help="aggregate a records file")
    s.add_argument("--records", required=True)
    s.add_argument("--manifest", required=True)
    s.add_argument("--k", type=int)
    s.add_argument("--json", help="also write the report JSON here")
    s.add_argument("--csv", help="also write per-kind rows as CSV")
    s.set_defaults(func=_cmd_score)

    e = sub.add_parser("export-sft", help="write tool-selection training pairs")
    e.add_argument("--manifest", required=True)
    e.add_argument("--out", required=True)
    e.add_argument("--template", help="override file for the tool-selection prompt")
    e.set_defaults(func=_cmd_export_sft)

    i = sub.add_parser("inspect", help="print one triplet, its trace and its record")
    i.add_argument("--sample", required=True)
    i.add_argument("--manifest", required=True)
    i.add_argument("--records")
    i.set_defaults(func=_cmd_inspect)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 2
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 2
    except (RefineBenchError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
