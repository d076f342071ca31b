"""Command-line pipeline: retrieve, pseudo-label, distill, evaluate.

Stages are subcommands sharing a JSON config. Every stage writes fixed
artifact names under the workdir and appends a manifest line recording the
command, a hash of the config fields it consumed, hashes of its input
files, and hashes of its outputs; a stage whose hashes all match a prior
manifest entry is skipped unless --force. Exit codes: 0 ok, 1 usage or
config error, 2 stage failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import logging
import os
import shutil
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import bm25, corpus, encoder, evaluator, fixtures, pseudolabel, reranker, trainer
from .corpus import Document, Query, RunList
from .encoder import EncoderState
from .evaluator import MetricReport
from .pseudolabel import LabelConfig
from .reranker import PairScorer
from .trainer import TrainConfig

logger = logging.getLogger(__name__)

ENDPOINT_ENV_VAR = "ADAPTIR_ENDPOINT"
RERANK_MODES = ("none", "lexical", "remote", "oracle", "constant")
VARIANTS = ("a_bm25", "b_bm25_t5", "c_distill")


class UsageError(Exception):
    """Bad flags or bad config; exit code 1."""


class StageError(Exception):
    """A pipeline stage failed; exit code 2."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"stage {stage} failed: {message}")
        self.stage = stage


@dataclass
class PathsConfig:
    corpus: str
    queries: str
    qrels: str
    workdir: str
    eval_queries: str | None = None
    eval_qrels: str | None = None

    def __post_init__(self) -> None:
        for name in ("corpus", "queries", "qrels", "workdir"):
            if not getattr(self, name):
                raise ValueError(f"paths.{name} must be a non-empty path")


@dataclass
class Bm25Config:
    k1: float = bm25.DEFAULT_K1
    b: float = bm25.DEFAULT_B
    depth: int = 100

    def __post_init__(self) -> None:
        if self.depth < 1:
            raise ValueError(f"bm25.depth must be >= 1, got {self.depth}")


@dataclass
class RerankConfig:
    mode: str = "none"
    endpoint: str = ""
    depth: int = reranker.RERANK_DEPTH
    batch_size: int = 32

    def __post_init__(self) -> None:
        if self.mode not in RERANK_MODES:
            raise ValueError(f"rerank.mode must be one of {RERANK_MODES}, got {self.mode!r}")
        if self.mode == "remote" and not self.endpoint:
            raise ValueError("rerank.mode 'remote' needs rerank.endpoint (or the env override)")
        if self.depth < 1 or self.batch_size < 1:
            raise ValueError("rerank.depth and rerank.batch_size must be >= 1")


@dataclass
class EvalConfig:
    cutoff: int = 10

    def __post_init__(self) -> None:
        if self.cutoff < 1:
            raise ValueError(f"eval.cutoff must be >= 1, got {self.cutoff}")


@dataclass
class EncoderConfig:
    buckets: int = encoder.DEFAULT_BUCKETS
    dim: int = encoder.DEFAULT_DIM
    hash_seed: int = 0
    similarity: str = "dot"
    init_scale: float = 0.01
    init_seed: int = 0

    def initial_state(self) -> EncoderState:
        return encoder.init_state(
            buckets=self.buckets,
            dim=self.dim,
            seed=self.init_seed,
            scale=self.init_scale,
            similarity=self.similarity,
            hash_seed=self.hash_seed,
        )


@dataclass
class PipelineConfig:
    paths: PathsConfig
    bm25: Bm25Config = field(default_factory=Bm25Config)
    label: LabelConfig = field(default_factory=LabelConfig)
    rerank: RerankConfig = field(default_factory=RerankConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    encoder: EncoderConfig = field(default_factory=EncoderConfig)


_SECTIONS = {
    "paths": PathsConfig,
    "bm25": Bm25Config,
    "label": LabelConfig,
    "rerank": RerankConfig,
    "train": TrainConfig,
    "eval": EvalConfig,
    "encoder": EncoderConfig,
}


def _build_section(name: str, cls, data: dict):
    if not isinstance(data, dict):
        raise UsageError(f"config section {name!r} must be an object")
    if name == "label" and "preset" in data:
        overrides = {k: v for k, v in data.items() if k != "preset"}
        try:
            return pseudolabel.preset(data["preset"], **overrides)
        except (KeyError, TypeError, ValueError) as exc:
            raise UsageError(f"config section 'label': {exc}") from exc
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise UsageError(f"config section {name!r} has unknown keys: {', '.join(unknown)}")
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"config section {name!r}: {exc}") from exc


def config_from_dict(data: dict) -> PipelineConfig:
    if not isinstance(data, dict):
        raise UsageError("config root must be a JSON object")
    unknown = sorted(set(data) - set(_SECTIONS))
    if unknown:
        raise UsageError(f"unknown config sections: {', '.join(unknown)}")
    if "paths" not in data:
        raise UsageError("config needs a 'paths' section (corpus, queries, qrels, workdir)")
    sections = {name: _build_section(name, cls, data.get(name, {})) for name, cls in _SECTIONS.items()}
    return PipelineConfig(**sections)


def load_config(path: str | Path, overrides: Sequence[str] = ()) -> PipelineConfig:
    """Read the JSON config, apply the endpoint env var, then --set overrides."""
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"config {path} is not valid JSON: {exc}") from exc

    endpoint = os.environ.get(ENDPOINT_ENV_VAR)
    if endpoint:
        data.setdefault("rerank", {})["endpoint"] = endpoint
    for item in overrides:
        key, sep, raw = item.partition("=")
        if not sep or "." not in key:
            raise UsageError(f"--set expects section.key=value, got {item!r}")
        section, _, name = key.partition(".")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        if not isinstance(data.setdefault(section, {}), dict):
            raise UsageError(f"config section {section!r} must be an object")
        data[section][name] = value
    return config_from_dict(data)


def _canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _sha256_bytes(blob: bytes) -> str:
    return hashlib.sha256(blob).hexdigest()


def _sha256_file(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


@dataclass
class Manifest:
    """Append-only JSONL record of what produced each workdir artifact."""

    path: Path

    def entries(self) -> list[dict]:
        if not self.path.exists():
            return []
        out = []
        with open(self.path, "r", encoding="utf-8") as f:
            for line in f:
                if line.strip():
                    out.append(json.loads(line))
        return out

    def append(self, entry: dict) -> None:
        with open(self.path, "a", encoding="utf-8") as f:
            f.write(json.dumps(entry, sort_keys=True) + "\n")

    def find(self, command: str, config_hash: str, input_hashes: dict) -> dict | None:
        for entry in reversed(self.entries()):
            if (
                entry.get("command") == command
                and entry.get("config_hash") == config_hash
                and entry.get("input_hashes") == input_hashes
            ):
                return entry
        return None


class PipelineRunner:
    """Executes stages against one workdir, loading shared inputs lazily."""

    def __init__(self, cfg: PipelineConfig, scorer: PairScorer | None = None):
        self.cfg = cfg
        self.scorer = scorer
        self.workdir = Path(cfg.paths.workdir)
        self.workdir.mkdir(parents=True, exist_ok=True)
        self.manifest = Manifest(self.workdir / "manifest.jsonl")
        self._docs: list[Document] | None = None
        self._queries: list[Query] | None = None

    # fixed artifact names
    @property
    def index_path(self) -> Path:
        return self.workdir / "bm25_index.json"

    @property
    def bm25_run_path(self) -> Path:
        return self.workdir / "bm25_run.trec"

    @property
    def reranked_run_path(self) -> Path:
        return self.workdir / "reranked_run.trec"

    @property
    def labeling_run_path(self) -> Path:
        return self.reranked_run_path if self.cfg.rerank.mode != "none" else self.bm25_run_path

    @property
    def triplets_path(self) -> Path:
        return self.workdir / "triplets.jsonl"

    @property
    def teacher_triplets_path(self) -> Path:
        return self.workdir / "triplets_teacher.jsonl"

    @property
    def dev_qrels_path(self) -> Path:
        return self.workdir / "dev_qrels.tsv"

    @property
    def zero_shot_state_path(self) -> Path:
        return self.workdir / "encoder_zero_shot.bin"

    @property
    def adapted_state_path(self) -> Path:
        return self.workdir / "encoder_adapted.bin"

    @property
    def history_path(self) -> Path:
        return self.workdir / "train_history.csv"

    @property
    def zero_shot_run_path(self) -> Path:
        return self.workdir / "zero_shot_run.trec"

    @property
    def adapted_run_path(self) -> Path:
        return self.workdir / "adapted_run.trec"

    @property
    def report_path(self) -> Path:
        return self.workdir / "pipeline_report.csv"

    @property
    def docs(self) -> list[Document]:
        if self._docs is None:
            self._docs = corpus.load_corpus(self.cfg.paths.corpus)
        return self._docs

    @property
    def queries(self) -> list[Query]:
        if self._queries is None:
            self._queries = corpus.load_queries(self.cfg.paths.queries)
        return self._queries

    def _run_stage(
        self,
        command: str,
        cfg_subset: dict,
        inputs: dict[str, Path],
        outputs: dict[str, Path],
        build: Callable[[], dict | None],
        force: bool,
    ) -> dict:
        for name, path in inputs.items():
            if not Path(path).exists():
                raise StageError(command, f"missing input {name}: {path}")
        input_hashes = {name: _sha256_file(Path(path)) for name, path in sorted(inputs.items())}
        config_hash = _sha256_bytes(_canonical(cfg_subset).encode("utf-8"))
        cached = self.manifest.find(command, config_hash, input_hashes)
        if cached and not force:
            recorded = cached.get("outputs", {})
            if set(recorded) == set(outputs) and all(
                Path(outputs[name]).exists()
                and _sha256_file(Path(outputs[name])) == recorded[name]["sha256"]
                for name in outputs
            ):
                logger.info("%s: cached, skipping", command)
                return cached
        try:
            extra = build() or {}
        except StageError:
            raise
        except Exception as exc:
            raise StageError(command, str(exc)) from exc
        entry = {
            "command": command,
            "config_hash": config_hash,
            "input_hashes": input_hashes,
            "outputs": {
                name: {"path": str(path), "sha256": _sha256_file(Path(path))}
                for name, path in sorted(outputs.items())
            },
            **extra,
        }
        self.manifest.append(entry)
        return entry

    def _split(self) -> tuple[list[Query], list[Query]]:
        return pseudolabel.split_queries(
            self.queries, self.cfg.label.dev_query_count, self.cfg.label.seed
        )

    def _build_scorer(self) -> PairScorer:
        if self.scorer is not None:
            return self.scorer
        mode = self.cfg.rerank.mode
        if mode == "lexical":
            return reranker.lexical_overlap_scorer()
        if mode == "remote":
            return reranker.remote_scorer(self.cfg.rerank.endpoint, self.cfg.rerank.batch_size)
        if mode == "constant":
            return reranker.ConstantScorer()
        if mode == "oracle":
            gold = corpus.load_qrels(self.cfg.paths.qrels)
            return fixtures.oracle_scorer(gold, self.queries, self.docs)
        raise ValueError(f"no scorer for rerank.mode {mode!r}")

    # stages -----------------------------------------------------------
    def stage_index(self, force: bool = False) -> dict:
        def build() -> dict:
            index = bm25.build_index(self.docs, k1=self.cfg.bm25.k1, b=self.cfg.bm25.b)
            bm25.save_index(index, self.index_path)
            return {"documents": index.doc_count}

        return self._run_stage(
            "index",
            {"bm25": {"k1": self.cfg.bm25.k1, "b": self.cfg.bm25.b}},
            {"corpus": Path(self.cfg.paths.corpus)},
            {"index": self.index_path},
            build,
            force,
        )

    def stage_retrieve(self, force: bool = False) -> dict:
        def build() -> dict:
            index = bm25.load_index(self.index_path)
            runs = [bm25.retrieve_topk(index, q, self.cfg.bm25.depth) for q in self.queries]
            corpus.write_run(runs, "bm25", self.bm25_run_path)
            return {"queries": len(runs)}

        return self._run_stage(
            "retrieve",
            {"bm25": dataclasses.asdict(self.cfg.bm25)},
            {"index": self.index_path, "queries": Path(self.cfg.paths.queries)},
            {"run": self.bm25_run_path},
            build,
            force,
        )

    def stage_rerank(self, force: bool = False) -> dict:
        mode = self.cfg.rerank.mode
        inputs = {
            "run": self.bm25_run_path,
            "corpus": Path(self.cfg.paths.corpus),
            "queries": Path(self.cfg.paths.queries),
        }
        if mode == "oracle":
            inputs["qrels"] = Path(self.cfg.paths.qrels)

        def build() -> dict:
            runs = corpus.read_run(self.bm25_run_path)
            if mode == "none":
                shutil.copyfile(self.bm25_run_path, self.reranked_run_path)
                return {"mode": mode}
            scorer = self._build_scorer()
            queries_by_id = {q.id: q for q in self.queries}
            docs_by_id = {d.id: d for d in self.docs}
            reranked = [
                reranker.rerank_run(run, scorer, queries_by_id, docs_by_id, self.cfg.rerank.depth)
                for run in runs
            ]
            # fixed tag: equivalent scorers must yield byte-identical files
            corpus.write_run(reranked, "reranked", self.reranked_run_path)
            return {"mode": mode}

        subset = {"rerank": dataclasses.asdict(self.cfg.rerank)}
        return self._run_stage("rerank", subset, inputs, {"run": self.reranked_run_path}, build, force)

    def stage_triplets(self, force: bool = False) -> dict:
        run_path = self.labeling_run_path

        def build() -> dict:
            runs_by_id = {r.query_id: r for r in corpus.read_run(run_path)}
            train_queries, _ = self._split()
            runs = [runs_by_id[q.id] for q in train_queries if q.id in runs_by_id]
            doc_ids = [d.id for d in self.docs]
            triplets = pseudolabel.gen_triplets(runs, self.cfg.label, doc_ids)
            pseudolabel.write_triplets(triplets, self.triplets_path)
            return {"triplets": len(triplets)}

        return self._run_stage(
            "triplets",
            {"label": dataclasses.asdict(self.cfg.label), "run": run_path.name},
            {"run": run_path, "corpus": Path(self.cfg.paths.corpus), "queries": Path(self.cfg.paths.queries)},
            {"triplets": self.triplets_path},
            build,
            force,
        )

    def stage_devset(self, force: bool = False) -> dict:
        run_path = self.labeling_run_path

        def build() -> dict:
            runs_by_id = {r.query_id: r for r in corpus.read_run(run_path)}
            _, dev_queries = self._split()
            runs = [runs_by_id[q.id] for q in dev_queries if q.id in runs_by_id]
            doc_ids = [d.id for d in self.docs]
            entries = pseudolabel.gen_dev_qrels(runs, self.cfg.label, doc_ids)
            corpus.write_qrels(entries, self.dev_qrels_path)
            return {"judgments": len(entries)}

        return self._run_stage(
            "devset",
            {"label": dataclasses.asdict(self.cfg.label), "run": run_path.name},
            {"run": run_path, "corpus": Path(self.cfg.paths.corpus), "queries": Path(self.cfg.paths.queries)},
            {"dev_qrels": self.dev_qrels_path},
            build,
            force,
        )

    def stage_attach_teacher(self, force: bool = False) -> dict:
        if self.cfg.rerank.mode == "none" and self.scorer is None:
            raise StageError("attach-teacher", "needs a scorer: set rerank.mode")
        inputs = {
            "triplets": self.triplets_path,
            "corpus": Path(self.cfg.paths.corpus),
            "queries": Path(self.cfg.paths.queries),
        }
        if self.cfg.rerank.mode == "oracle":
            inputs["qrels"] = Path(self.cfg.paths.qrels)

        def build() -> dict:
            triplets = pseudolabel.read_triplets(self.triplets_path)
            scorer = self._build_scorer()
            queries_by_id = {q.id: q for q in self.queries}
            docs_by_id = {d.id: d for d in self.docs}
            scored = pseudolabel.attach_teacher(triplets, scorer, queries_by_id, docs_by_id)
            pseudolabel.write_triplets(scored, self.teacher_triplets_path)
            return {"triplets": len(scored)}

        subset = {"rerank": {"mode": self.cfg.rerank.mode, "endpoint": self.cfg.rerank.endpoint}}
        return self._run_stage(
            "attach-teacher", subset, inputs, {"triplets": self.teacher_triplets_path}, build, force
        )

    def stage_train(self, force: bool = False) -> dict:
        triplets_path = (
            self.teacher_triplets_path if self.cfg.train.loss == "marginmse" else self.triplets_path
        )
        inputs = {
            "triplets": triplets_path,
            "dev_qrels": self.dev_qrels_path,
            "corpus": Path(self.cfg.paths.corpus),
            "queries": Path(self.cfg.paths.queries),
        }
        if self.cfg.train.init_from:
            inputs["init_from"] = Path(self.cfg.train.init_from)

        def build() -> dict:
            triplets = pseudolabel.read_triplets(triplets_path)
            dev_qrels = corpus.load_qrels(self.dev_qrels_path)
            dev_ids = {e.query_id for e in dev_qrels}
            dev_queries = [q for q in self.queries if q.id in dev_ids]
            state0 = (
                encoder.load_state(self.cfg.train.init_from)
                if self.cfg.train.init_from
                else self.cfg.encoder.initial_state()
            )
            encoder.save_state(state0, self.zero_shot_state_path)
            queries_by_id = {q.id: q for q in self.queries}
            best_state, history = trainer.train(
                state0, triplets, queries_by_id, dev_qrels, dev_queries, self.docs, self.cfg.train
            )
            encoder.save_state(best_state, self.adapted_state_path)
            trainer.write_history(history, self.history_path)
            best = max(history, key=lambda h: h.dev_ndcg)
            return {"steps": self.cfg.train.steps, "best_dev_ndcg10": best.dev_ndcg, "best_step": best.step}

        subset = {
            "train": dataclasses.asdict(self.cfg.train),
            "encoder": dataclasses.asdict(self.cfg.encoder),
        }
        outputs = {
            "zero_shot": self.zero_shot_state_path,
            "adapted": self.adapted_state_path,
            "history": self.history_path,
        }
        return self._run_stage("train", subset, inputs, outputs, build, force)

    def _eval_inputs(self) -> tuple[Path, Path]:
        paths = self.cfg.paths
        return (
            Path(paths.eval_queries or paths.queries),
            Path(paths.eval_qrels or paths.qrels),
        )

    def stage_report(self, force: bool = False) -> dict:
        queries_path, qrels_path = self._eval_inputs()
        inputs = {
            "zero_shot": self.zero_shot_state_path,
            "adapted": self.adapted_state_path,
            "corpus": Path(self.cfg.paths.corpus),
            "queries": queries_path,
            "qrels": qrels_path,
        }

        def build() -> dict:
            eval_queries = corpus.load_queries(queries_path)
            qrels = corpus.load_qrels(qrels_path)
            cutoff = self.cfg.eval.cutoff
            reports = {}
            for name, state_path, run_path, tag in (
                ("zero_shot", self.zero_shot_state_path, self.zero_shot_run_path, "zeroshot"),
                ("adapted", self.adapted_state_path, self.adapted_run_path, "adapted"),
            ):
                state = encoder.load_state(state_path)
                runs = _rank_all(state, eval_queries, self.docs, cutoff)
                corpus.write_run(runs, tag, run_path)
                reports[name] = evaluator.evaluate_run(runs, qrels, cutoff)
            comparison = evaluator.compare_runs(reports["zero_shot"], reports["adapted"])
            with open(self.report_path, "w", encoding="utf-8") as f:
                f.write(f"query_id,zero_shot_ndcg@{cutoff},adapted_ndcg@{cutoff},delta\n")
                for query_id, a, b, delta in comparison.rows:
                    f.write(f"{query_id},{a:.6f},{b:.6f},{delta:.6f}\n")
                f.write(f"mean,{comparison.mean_a:.6f},{comparison.mean_b:.6f},{comparison.mean_delta:.6f}\n")
            return {
                "zero_shot_ndcg10": reports["zero_shot"].mean,
                "adapted_ndcg10": reports["adapted"].mean,
                "cutoff": cutoff,
            }

        outputs = {
            "zero_shot_run": self.zero_shot_run_path,
            "adapted_run": self.adapted_run_path,
            "report": self.report_path,
        }
        return self._run_stage(
            "report", {"eval": dataclasses.asdict(self.cfg.eval)}, inputs, outputs, build, force
        )

    def stage_eval(self, run_path: Path, force: bool = False) -> dict:
        _, qrels_path = self._eval_inputs()
        out_path = self.workdir / "eval_report.csv"

        def build() -> dict:
            runs = corpus.read_run(run_path)
            qrels = corpus.load_qrels(qrels_path)
            report = evaluator.evaluate_run(runs, qrels, self.cfg.eval.cutoff)
            evaluator.write_report_csv(report, out_path)
            print(evaluator.format_report_table(report))
            return {"mean": report.mean, "run": str(run_path)}

        return self._run_stage(
            "eval",
            {"eval": dataclasses.asdict(self.cfg.eval), "run": str(run_path)},
            {"run": run_path, "qrels": qrels_path},
            {"report": out_path},
            build,
            force,
        )


def _rank_all(state: EncoderState, queries: Sequence[Query], docs: Sequence[Document], k: int) -> list[RunList]:
    """Score all documents for each query from a precomputed embedding matrix."""
    doc_matrix = encoder.encode_many(state, [d.full_text for d in docs])
    doc_ids = [d.id for d in docs]
    if state.similarity == "cosine":
        norms = np.linalg.norm(doc_matrix, axis=1)
        safe = np.where(norms == 0.0, 1.0, norms)
    runs = []
    for query in queries:
        q = encoder.encode(state, query.text)
        scores = doc_matrix @ q
        if state.similarity == "cosine":
            qn = float(np.linalg.norm(q))
            scores = np.zeros(len(docs)) if qn == 0.0 else np.where(norms == 0.0, 0.0, scores / (safe * qn))
        run = RunList.from_scores(query.id, zip(doc_ids, scores.tolist()))
        run.entries = run.entries[:k]
        runs.append(run)
    return runs


@dataclass
class PipelineResult:
    variant: str
    zero_shot: MetricReport
    adapted: MetricReport
    triplet_count: int
    workdir: Path


def _variant_config(cfg: PipelineConfig, variant: str) -> PipelineConfig:
    if variant == "a_bm25":
        return replace(cfg, rerank=replace(cfg.rerank, mode="none"), train=replace(cfg.train, loss="ranknet"))
    if cfg.rerank.mode == "none":
        raise StageError("rerank", f"variant {variant} needs rerank.mode other than 'none'")
    loss = "marginmse" if variant == "c_distill" else "ranknet"
    return replace(cfg, train=replace(cfg.train, loss=loss))


def run_pipeline(
    cfg: PipelineConfig,
    variant: str,
    scorer: PairScorer | None = None,
    force: bool = False,
) -> PipelineResult:
    """Execute index → retrieve → label → train → report for one variant.

    Variant a trains on raw top-k labels; b re-ranks candidates before
    labeling; c additionally distills the re-ranker's score margins.
    """
    if variant not in VARIANTS:
        raise UsageError(f"variant must be one of {VARIANTS}, got {variant!r}")
    cfg = _variant_config(cfg, variant)
    runner = PipelineRunner(cfg, scorer)
    runner.stage_index(force)
    runner.stage_retrieve(force)
    if variant != "a_bm25":
        runner.stage_rerank(force)
    triplets_entry = runner.stage_triplets(force)
    if variant == "c_distill":
        runner.stage_attach_teacher(force)
    runner.stage_devset(force)
    runner.stage_train(force)
    runner.stage_report(force)

    qrels_path = runner._eval_inputs()[1]
    qrels = corpus.load_qrels(qrels_path)
    cutoff = cfg.eval.cutoff
    zero = evaluator.evaluate_run(corpus.read_run(runner.zero_shot_run_path), qrels, cutoff)
    adapted = evaluator.evaluate_run(corpus.read_run(runner.adapted_run_path), qrels, cutoff)
    return PipelineResult(
        variant=variant,
        zero_shot=zero,
        adapted=adapted,
        triplet_count=int(triplets_entry.get("triplets", 0)),
        workdir=runner.workdir,
    )


def run_sweep(
    cfg: PipelineConfig,
    k_values: Sequence[int],
    m_values: Sequence[int],
    variant: str = "a_bm25",
    scorer: PairScorer | None = None,
    force: bool = False,
) -> list[tuple[int, int, float]]:
    """Run the pipeline once per (k, m) pair, sharing index and retrieval."""
    if len(k_values) != len(m_values):
        raise UsageError("k and m lists must pair up one-to-one")
    if not k_values:
        raise UsageError("need at least one (k, m) pair")
    rows = []
    for k, m in zip(k_values, m_values):
        pair_cfg = replace(cfg, label=replace(cfg.label, k=k, m=m))
        result = run_pipeline(pair_cfg, variant, scorer, force)
        rows.append((k, m, result.adapted.mean))
    workdir = Path(cfg.paths.workdir)
    with open(workdir / "sweep.csv", "w", encoding="utf-8") as f:
        f.write("k,m,ndcg10\n")
        for k, m, ndcg in rows:
            f.write(f"{k},{m},{ndcg:.6f}\n")
    with open(workdir / "sweep_plot.tsv", "w", encoding="utf-8") as f:
        f.write("# k\tndcg10\n")
        for k, _, ndcg in sorted(rows):
            f.write(f"{k}\t{ndcg:.6f}\n")
    return rows


# ---------------------------------------------------------------- CLI glue


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # noqa: D102 - argparse hook
        raise UsageError(message)


def _int_list(raw: str) -> list[int]:
    try:
        return [int(part) for part in raw.split(",") if part != ""]
    except ValueError as exc:
        raise UsageError(f"expected a comma-separated integer list, got {raw!r}") from exc


def build_parser() -> _Parser:
    parser = _Parser(prog="adaptir", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, help_text: str):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="pipeline JSON config")
        p.add_argument(
            "--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE",
            help="override a config value (repeatable; flags win over config and env)",
        )
        p.add_argument("--force", action="store_true", help="rebuild even when cached")
        p.add_argument("--verbose", action="store_true", help="log stage progress")
        return p

    add("index", "build and save the inverted index")
    add("retrieve", "write the lexical candidate run")
    add("rerank", "rescore candidates per rerank.mode")
    add("triplets", "generate training triplets from the labeling run")
    add("devset", "generate graded dev judgments from the labeling run")
    add("attach-teacher", "attach teacher scores to the triplets")
    add("train", "fine-tune the encoder on the triplets")
    p = add("eval", "score a run file against the eval qrels")
    p.add_argument("--run", default=None, help="run file (default: workdir/adapted_run.trec)")
    p = add("pipeline", "run all stages for one training-data variant")
    p.add_argument("--variant", choices=VARIANTS, default="a_bm25")
    p = add("sweep-k", "run the pipeline per paired (k, m) values")
    p.add_argument("--k-values", required=True, type=_int_list, metavar="K1,K2,...")
    p.add_argument("--m-values", required=True, type=_int_list, metavar="M1,M2,...")
    p.add_argument("--variant", choices=VARIANTS, default="a_bm25")
    return parser


def _dispatch(args: argparse.Namespace) -> int:
    cfg = load_config(args.config, args.overrides)
    runner = PipelineRunner(cfg)
    force = args.force
    if args.command == "index":
        runner.stage_index(force)
    elif args.command == "retrieve":
        runner.stage_retrieve(force)
    elif args.command == "rerank":
        runner.stage_rerank(force)
    elif args.command == "triplets":
        entry = runner.stage_triplets(force)
        print(f"triplets: {entry['triplets']}")
    elif args.command == "devset":
        entry = runner.stage_devset(force)
        print(f"dev judgments: {entry['judgments']}")
    elif args.command == "attach-teacher":
        entry = runner.stage_attach_teacher(force)
        print(f"teacher-scored triplets: {entry['triplets']}")
    elif args.command == "train":
        entry = runner.stage_train(force)
        print(f"best dev ndcg@10: {entry['best_dev_ndcg10']:.6f} at step {entry['best_step']}")
    elif args.command == "eval":
        run_path = Path(args.run) if args.run else runner.adapted_run_path
        entry = runner.stage_eval(run_path, force)
        print(f"mean: {entry['mean']:.6f}")
    elif args.command == "pipeline":
        result = run_pipeline(cfg, args.variant, force=force)
        cutoff = cfg.eval.cutoff
        print(f"variant {result.variant}: {result.triplet_count} triplets")
        print(f"zero-shot ndcg@{cutoff}: {result.zero_shot.mean:.6f}")
        print(f"adapted   ndcg@{cutoff}: {result.adapted.mean:.6f}")
        print(f"delta: {result.adapted.mean - result.zero_shot.mean:+.6f}")
        print(f"report: {result.workdir / 'pipeline_report.csv'}")
    elif args.command == "sweep-k":
        rows = run_sweep(cfg, args.k_values, args.m_values, args.variant, force=force)
        print("k,m,ndcg10")
        for k, m, ndcg in rows:
            print(f"{k},{m},{ndcg:.6f}")
    else:  # pragma: no cover - argparse enforces the choices
        raise UsageError(f"unknown command {args.command!r}")
    return 0


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _dispatch(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except StageError as exc:
        print(str(exc), file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
