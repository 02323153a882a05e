"""Per-sample refine → retrieve → answer loop and the resumable run driver."""

from __future__ import annotations

import json
import logging
import os
import time
from contextlib import contextmanager
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from . import metrics
from .agent import ChatAgent, ChatClient, ChatConfig, caption, decide_retrieval, generate_answer, load_template
from .agent.parse import VqppDecision
from .agent.scripted import OracleAgent, PassAgent, RandomAgent
from .errors import EmptyInput
from .raster import save_image
from .retrieve import PARADIGMS, build_index, embed_query, fingerprint_embedder, load_corpus, recall_at_k, \
    remote_embedder, search_topk
from .tools import NullLocator, OracleLocator, RemoteLocator, execute_trace
from .triplets import RefinementTriplet, read_manifest

log = logging.getLogger(__name__)

RECORDS_NAME = "records.jsonl"
SUMMARY_NAME = "summary.json"
CONFIG_NAME = "config.json"


@dataclass
class RunConfig:
    manifest: str
    corpus: str | None = None
    out_dir: str = "run"
    paradigm: str = "i2i"
    embedder: str = "fingerprint"  # or "remote"
    embedder_endpoint: str | None = None
    embedder_api_key_env: str | None = None
    agent: str = "oracle"  # oracle | pass | random | chat:<backend>
    generator: str | None = None  # backend name; None skips answer generation
    captioner: str | None = None  # backend for caption_then_retrieve
    decider: str | None = None  # backend for the retrieval decision
    locator: str = "oracle"  # oracle | none | remote
    locator_endpoint: str | None = None
    locator_api_key_env: str | None = None
    k: int = 5
    force_retrieval: bool = True
    parallelism: int = 1
    run_seed: int = 0
    templates: dict = field(default_factory=dict)  # template name -> override file
    chat: dict = field(default_factory=dict)  # backend name -> ChatConfig fields

    def __post_init__(self):
        self.validate()

    def validate(self) -> "RunConfig":
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.parallelism < 1:
            raise ValueError("parallelism must be >= 1")
        if self.paradigm not in PARADIGMS:
            raise ValueError(f"paradigm must be one of {PARADIGMS}")
        if self.embedder not in ("fingerprint", "remote"):
            raise ValueError("embedder must be 'fingerprint' or 'remote'")
        if self.embedder == "remote" and not self.embedder_endpoint:
            raise ValueError("remote embedder needs embedder_endpoint")
        if self.locator not in ("oracle", "none", "remote"):
            raise ValueError("locator must be oracle, none or remote")
        if self.locator == "remote" and not self.locator_endpoint:
            raise ValueError("remote locator needs locator_endpoint")
        if self.agent not in ("oracle", "pass", "random") and not self.agent.startswith("chat:"):
            raise ValueError(f"unknown agent {self.agent!r}")
        for ref in (self.agent_backend, self.generator, self.captioner, self.decider):
            if ref is not None and ref not in self.chat:
                raise ValueError(f"no chat backend named {ref!r}")
        if self.paradigm == "caption_then_retrieve" and self.captioner is None:
            raise ValueError("caption_then_retrieve needs a captioner backend")
        return self

    @property
    def agent_backend(self) -> str | None:
        return self.agent.split(":", 1)[1] if self.agent.startswith("chat:") else None

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown config keys: {sorted(extra)}")
        return cls(**d)

    def to_dict(self) -> dict:
        return asdict(self)


def load_config(path, overrides: dict | None = None) -> RunConfig:
    """Read TOML or JSON, then apply non-None ``overrides`` on top."""
    path = Path(path)
    raw = path.read_bytes()
    if path.suffix.lower() == ".json":
        data = json.loads(raw)
    else:
        try:
            import tomllib
        except ModuleNotFoundError:  # Python 3.10
            import tomli as tomllib
        data = tomllib.loads(raw.decode("utf-8"))
    data = dict(data.pop("run", {}), **data) if "run" in data else data
    for key in ("manifest", "corpus", "out_dir"):
        # relative paths in a config file are relative to the file
        if data.get(key) and not Path(data[key]).is_absolute():
            data[key] = str(path.parent / data[key])
    data.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return RunConfig.from_dict(data)


@dataclass
class EvalRecord:
    sample_id: str
    kind: str
    agent: str
    predicted_trace: list = field(default_factory=list)
    trace_log: list = field(default_factory=list)
    parse_status: str = "ok"
    refined_image: str | None = None
    need_retrieval: bool = True
    retrieval_reason: str = ""
    retrieved: list = field(default_factory=list)  # [doc_id, score] pairs in rank order
    recall_hit: int = 0
    answer: str | None = None
    em_hit: int | None = None
    errors: dict = field(default_factory=dict)  # stage -> message
    timings: dict = field(default_factory=dict)  # stage -> ms

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, separators=(",", ":"))


def strip_timings(record: dict) -> dict:
    """A record without its wall-clock fields, for reproducibility checks."""
    out = {k: v for k, v in record.items() if k != "timings"}
    out["trace_log"] = [{k: v for k, v in s.items() if k != "elapsed_ms"} for s in record.get("trace_log", [])]
    return out


@dataclass
class Runtime:
    """Shared, read-only collaborators for one run."""

    index: object | None
    embedder: object | None
    agent: object
    generator: ChatClient | None = None
    decider: ChatClient | None = None
    captioner: ChatClient | None = None
    locator: object | None = None  # a Locator, or None for the per-triplet oracle box
    templates: dict = field(default_factory=dict)


@contextmanager
def _timed(timings: dict, stage: str):
    t0 = time.perf_counter()
    try:
        yield
    finally:
        timings[stage] = round((time.perf_counter() - t0) * 1000, 3)


def _locator_for(triplet, config: RunConfig, runtime: Runtime):
    if runtime.locator is not None:
        return runtime.locator
    return OracleLocator.from_triplet(triplet) if config.locator == "oracle" else NullLocator()


def run_sample(triplet: RefinementTriplet, config: RunConfig, runtime: Runtime, out_dir=None) -> EvalRecord:
    """Refine the query, retrieve with the refined image, then answer with it.

    Stage failures are written into ``errors`` and never propagate.
    """
    rec = EvalRecord(triplet.sample_id, triplet.kind, getattr(runtime.agent, "name", "agent"))
    try:
        query = triplet.load_query()
    except Exception as exc:  # noqa: BLE001 - isolate the sample
        rec.errors["load"] = f"{type(exc).__name__}: {exc}"
        rec.parse_status = "skipped"
        return rec

    # 1. pre-processing plan
    with _timed(rec.timings, "propose"):
        try:
            decision = runtime.agent.propose(query, triplet.question, triplet)
        except Exception as exc:  # noqa: BLE001
            rec.errors["propose"] = f"{type(exc).__name__}: {exc}"
            decision = VqppDecision([], parse_status="error")
    rec.predicted_trace = [c.to_dict() for c in decision.operations]
    rec.parse_status = decision.parse_status
    if decision.errors:
        rec.errors["parse"] = "; ".join(decision.errors)

    # 2. execute the plan; this refined image feeds both retrieval and generation
    with _timed(rec.timings, "execute"):
        refined, trace = execute_trace(query, decision.operations, _locator_for(triplet, config, runtime))
    steps = trace.to_list()
    rec.timings["trace_steps"] = [s.pop("elapsed_ms") for s in steps]
    rec.trace_log = steps
    if out_dir is not None:
        try:
            rel = Path("refined") / f"{triplet.sample_id}.png"
            (Path(out_dir) / "refined").mkdir(parents=True, exist_ok=True)
            save_image(refined, Path(out_dir) / rel)
            rec.refined_image = rel.as_posix()
        except Exception as exc:  # noqa: BLE001
            rec.errors["save"] = f"{type(exc).__name__}: {exc}"

    # 3. retrieval decision
    if config.force_retrieval:
        rec.need_retrieval, rec.retrieval_reason = True, "forced"
    elif runtime.decider is None:
        rec.need_retrieval, rec.retrieval_reason = True, "no decider configured; retrieving"
    else:
        with _timed(rec.timings, "decide"):
            try:
                d = decide_retrieval(runtime.decider, refined, triplet.question,
                                     runtime.templates.get("retrieval"))
                rec.need_retrieval, rec.retrieval_reason = d.need_retrieval, d.reason
            except Exception as exc:  # noqa: BLE001
                rec.errors["decide"] = f"{type(exc).__name__}: {exc}"
                rec.need_retrieval, rec.retrieval_reason = True, "decision failed; retrieving"

    # 4. retrieval
    contexts = []
    if rec.need_retrieval and runtime.index is not None:
        with _timed(rec.timings, "retrieve"):
            try:
                text = None
                if config.paradigm == "caption_then_retrieve":
                    text = caption(runtime.captioner, refined)
                elif config.paradigm == "composed":
                    text = triplet.question
                vec = embed_query(runtime.index, runtime.embedder, image=refined, text=text)
                hits = search_topk(runtime.index, vec, config.k)
                rec.retrieved = [[doc_id, score] for doc_id, score in hits]
                rec.recall_hit = recall_at_k(hits, triplet.golden_doc_ids, config.k)
                entries = runtime.index.entries
                contexts = [(entries[d].title, entries[d].text) for d, _ in hits]
            except Exception as exc:  # noqa: BLE001
                rec.errors["retrieve"] = f"{type(exc).__name__}: {exc}"

    # 5. answer
    if runtime.generator is not None:
        with _timed(rec.timings, "generate"):
            try:
                rec.answer = generate_answer(runtime.generator, refined, triplet.question, contexts,
                                             runtime.templates)
            except Exception as exc:  # noqa: BLE001
                rec.errors["generate"] = f"{type(exc).__name__}: {exc}"
                rec.answer = ""
        rec.em_hit = metrics.substring_exact_match(rec.answer, triplet.answer)
    return rec


# ---------------------------------------------------------------------------
# run driver


def _client(config: RunConfig, name: str | None, cache: dict) -> ChatClient | None:
    if name is None:
        return None
    if name not in cache:
        cache[name] = ChatClient(ChatConfig(**config.chat[name]))
    return cache[name]


def _templates(config: RunConfig) -> dict:
    return {name: load_template(name, path) for name, path in config.templates.items()}


def make_agent(config: RunConfig, clients: dict, templates: dict):
    if config.agent == "oracle":
        return OracleAgent()
    if config.agent == "pass":
        return PassAgent()
    if config.agent == "random":
        return RandomAgent(config.run_seed)
    backend = config.agent_backend
    return ChatAgent(_client(config, backend, clients), templates.get("vqpp"), name=config.agent)


def make_embedder(config: RunConfig):
    if config.embedder == "fingerprint":
        return fingerprint_embedder()
    return remote_embedder(config.embedder_endpoint, api_key_env=config.embedder_api_key_env)


def make_runtime(config: RunConfig, index=None, embedder=None, agent=None) -> Runtime:
    clients: dict = {}
    templates = _templates(config)
    embedder = embedder or make_embedder(config)
    if index is None and config.corpus:
        index = build_index(load_corpus(config.corpus), embedder, config.paradigm)
    locator = None
    if config.locator == "remote":
        locator = RemoteLocator(config.locator_endpoint, api_key_env=config.locator_api_key_env)
    decider = config.decider or config.agent_backend or config.generator
    return Runtime(
        index=index,
        embedder=embedder,
        agent=agent or make_agent(config, clients, templates),
        generator=_client(config, config.generator, clients),
        decider=_client(config, decider, clients),
        captioner=_client(config, config.captioner, clients),
        locator=locator,
        templates=templates,
    )


def read_records(path) -> list[dict]:
    """Well-formed records in file order; a torn trailing line is ignored."""
    path = Path(path)
    if not path.exists():
        return []
    out = []
    for line in path.read_text(encoding="utf-8", errors="replace").splitlines():
        try:
            d = json.loads(line)
        except ValueError:
            continue
        if isinstance(d, dict) and "sample_id" in d:
            out.append(d)
    return out


def _recover(path: Path, wanted: set) -> list[dict]:
    """Keep the first good record per sample and rewrite the file if anything was dropped."""
    if not path.exists():
        return []
    raw = path.read_bytes()
    kept, seen = [], set()
    for d in read_records(path):
        if d["sample_id"] in wanted and d["sample_id"] not in seen:
            seen.add(d["sample_id"])
            kept.append(d)
    clean = "".join(json.dumps(d, ensure_ascii=False, separators=(",", ":")) + "\n" for d in kept)
    if clean.encode("utf-8") != raw:
        tmp = path.with_suffix(".tmp")
        tmp.write_text(clean, encoding="utf-8")
        os.replace(tmp, path)
        log.info("recovered %s: kept %d records", path, len(kept))
    return kept


@dataclass
class RunResult:
    records_path: Path
    summary_path: Path
    report: dict
    n_new: int


def summarise(records_path, manifest, k: int | None = None) -> dict:
    triplets = manifest if isinstance(manifest, list) else read_manifest(manifest)
    try:
        return metrics.aggregate(read_records(records_path), triplets, k=k)
    except EmptyInput:
        return metrics.empty_report(k)


def run_benchmark(config: RunConfig, runtime: Runtime | None = None, limit: int | None = None) -> RunResult:
    """Process every triplet not yet in ``records.jsonl``, then write the summary.

    ``limit`` caps how many new samples this call processes (used to stage
    interrupted runs).
    """
    triplets = read_manifest(config.manifest)
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / CONFIG_NAME).write_text(json.dumps(config.to_dict(), indent=2, sort_keys=True) + "\n",
                                       encoding="utf-8")
    records_path = out_dir / RECORDS_NAME
    done = {d["sample_id"] for d in _recover(records_path, {t.sample_id for t in triplets})}
    pending = [t for t in triplets if t.sample_id not in done]
    if limit is not None:
        pending = pending[:limit]
    log.info("%d triplets, %d done, %d to run", len(triplets), len(done), len(pending))

    if pending:
        runtime = runtime or make_runtime(config)
        with ThreadPoolExecutor(max_workers=config.parallelism) as pool, \
                records_path.open("a", encoding="utf-8") as fh:
            # results come back in manifest order; only this thread writes
            for rec in pool.map(lambda t: run_sample(t, config, runtime, out_dir), pending):
                fh.write(rec.to_json() + "\n")
                fh.flush()

    report = summarise(records_path, triplets, k=config.k)
    summary_path = out_dir / SUMMARY_NAME
    summary_path.write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
    return RunResult(records_path, summary_path, report, len(pending))
