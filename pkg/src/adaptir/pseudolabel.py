"""Turn ranked candidate lists into training triplets and a graded dev set.

The top k candidates of each query become pseudo-positive documents; each
positive is paired with m negatives sampled uniformly from the collection
outside the query's top-k list, giving k*m triplets per query. Dev
queries instead get graded judgments: '2' for the top two candidates, '1'
for the rest of the top ten, '0' for sampled non-candidates. Per-query
RNGs are derived from the seed and a stable hash of the query id, so any
processing order produces identical output.
"""

from __future__ import annotations

import json
import logging
import random
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .corpus import Document, QrelEntry, Query, RunList
from .encoder import fnv1a64
from .reranker import PairScorer

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Triplet:
    """One (query, positive doc, negative doc) training unit, optionally with teacher scores."""

    query_id: str
    pos_doc_id: str
    neg_doc_id: str
    teacher_pos: float | None = None
    teacher_neg: float | None = None

    def __post_init__(self) -> None:
        if self.pos_doc_id == self.neg_doc_id:
            raise ValueError(f"triplet for {self.query_id!r} has pos == neg == {self.pos_doc_id!r}")
        if (self.teacher_pos is None) != (self.teacher_neg is None):
            raise ValueError(f"triplet for {self.query_id!r} has only one teacher score")

    @property
    def has_teacher(self) -> bool:
        return self.teacher_pos is not None


@dataclass
class LabelConfig:
    """Knobs for pseudo-label generation."""

    k: int = 1
    m: int = 10
    dev_query_count: int = 0
    dev_pos: int = 10
    dev_neg: int = 90
    seed: int = 0
    exclude_full_candidates: bool = False

    def __post_init__(self) -> None:
        if self.k < 1 or self.m < 1:
            raise ValueError(f"k and m must be >= 1, got k={self.k}, m={self.m}")
        if self.dev_pos < 2:
            raise ValueError(f"dev_pos must be >= 2, got {self.dev_pos}")
        if self.dev_query_count < 0 or self.dev_neg < 0:
            raise ValueError("dev_query_count and dev_neg must be >= 0")


# Per-collection (k, m, dev query count) choices that pair the number of
# positives with the number of available queries and documents.
PRESETS: dict[str, dict[str, int]] = {
    "fiqa": {"k": 1, "m": 10, "dev_query_count": 50},
    "scifact": {"k": 5, "m": 10, "dev_query_count": 50},
    "bioasq": {"k": 2, "m": 100, "dev_query_count": 50},
    "trec-covid": {"k": 10, "m": 150, "dev_query_count": 10},
    "touche-2020": {"k": 10, "m": 150, "dev_query_count": 10},
    "robust04": {"k": 10, "m": 50, "dev_query_count": 50},
}


def preset(name: str, **overrides) -> LabelConfig:
    """LabelConfig for a named collection preset."""
    try:
        params = dict(PRESETS[name])
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; known: {sorted(PRESETS)}") from None
    params.update(overrides)
    return LabelConfig(**params)


def _query_rng(seed: int, query_id: str) -> random.Random:
    # Stable per-query stream: parallel and serial generation agree.
    return random.Random(seed ^ fnv1a64(query_id.encode("utf-8")))


def split_queries(
    queries: Sequence[Query], dev_query_count: int, seed: int
) -> tuple[list[Query], list[Query]]:
    """Deterministic seeded (train, dev) split preserving input order."""
    if dev_query_count >= len(queries) and dev_query_count > 0:
        raise ValueError(
            f"dev_query_count {dev_query_count} must be smaller than the query count {len(queries)}"
        )
    shuffled = list(queries)
    random.Random(seed).shuffle(shuffled)
    dev_ids = {q.id for q in shuffled[:dev_query_count]}
    train = [q for q in queries if q.id not in dev_ids]
    dev = [q for q in queries if q.id in dev_ids]
    return train, dev


def gen_triplets(
    runs: Sequence[RunList],
    cfg: LabelConfig,
    corpus_doc_ids: Sequence[str],
    seed: int | None = None,
) -> list[Triplet]:
    """Pseudo-labeled triplets: top-k positives, m sampled negatives per positive.

    Negatives are drawn without replacement from the collection minus the
    query's top-k list (or minus its full candidate list when
    ``exclude_full_candidates`` is set), independently per positive.
    """
    if len(corpus_doc_ids) < cfg.k + cfg.m:
        raise ValueError(
            f"corpus of {len(corpus_doc_ids)} documents is smaller than k+m = {cfg.k + cfg.m}"
        )
    seed = cfg.seed if seed is None else seed
    triplets: list[Triplet] = []
    for run in runs:
        if not run.entries:
            continue
        positives = [doc_id for doc_id, _ in run.entries[: cfg.k]]
        excluded = set(doc_id for doc_id, _ in run.entries) if cfg.exclude_full_candidates else set(positives)
        pool = [doc_id for doc_id in corpus_doc_ids if doc_id not in excluded]
        if len(pool) < cfg.m:
            raise ValueError(
                f"query {run.query_id!r}: only {len(pool)} candidate negatives for m={cfg.m}"
            )
        rng = _query_rng(seed, run.query_id)
        for pos_doc_id in positives:
            for neg_doc_id in rng.sample(pool, cfg.m):
                triplets.append(Triplet(run.query_id, pos_doc_id, neg_doc_id))
    return triplets


def gen_dev_qrels(
    runs: Sequence[RunList],
    cfg: LabelConfig,
    corpus_doc_ids: Sequence[str],
    seed: int | None = None,
) -> list[QrelEntry]:
    """Graded dev judgments from each query's candidate list.

    Top two candidates get grade 2, ranks 3..dev_pos grade 1, and dev_neg
    sampled documents outside the top dev_pos get grade 0. Queries whose
    run is shorter than dev_pos are skipped with a warning.
    """
    seed = cfg.seed if seed is None else seed
    entries: list[QrelEntry] = []
    for run in runs:
        if len(run.entries) < cfg.dev_pos:
            logger.warning(
                "skipping dev query %s: run has %d entries, need %d",
                run.query_id, len(run.entries), cfg.dev_pos,
            )
            continue
        top = [doc_id for doc_id, _ in run.entries[: cfg.dev_pos]]
        for rank, doc_id in enumerate(top, 1):
            entries.append(QrelEntry(run.query_id, doc_id, 2 if rank <= 2 else 1))
        excluded = set(top)
        pool = [doc_id for doc_id in corpus_doc_ids if doc_id not in excluded]
        if len(pool) < cfg.dev_neg:
            raise ValueError(
                f"query {run.query_id!r}: only {len(pool)} candidate non-relevant docs for dev_neg={cfg.dev_neg}"
            )
        rng = _query_rng(seed, run.query_id)
        for doc_id in rng.sample(pool, cfg.dev_neg):
            entries.append(QrelEntry(run.query_id, doc_id, 0))
    return entries


def attach_teacher(
    triplets: Sequence[Triplet],
    scorer: PairScorer,
    queries: Mapping[str, Query],
    docs: Mapping[str, Document],
) -> list[Triplet]:
    """Score every triplet's (query, pos) and (query, neg) pair with ``scorer``."""
    pairs: list[tuple[str, str]] = []
    for t in triplets:
        if t.query_id not in queries:
            raise KeyError(f"query {t.query_id!r} not resolvable")
        query_text = queries[t.query_id].text
        for doc_id in (t.pos_doc_id, t.neg_doc_id):
            if doc_id not in docs:
                raise KeyError(f"document {doc_id!r} not resolvable")
            pairs.append((query_text, docs[doc_id].full_text))
    scores = scorer.score_pairs(pairs)
    return [
        replace(t, teacher_pos=scores[2 * i], teacher_neg=scores[2 * i + 1])
        for i, t in enumerate(triplets)
    ]


def write_triplets(triplets: Iterable[Triplet], path: str | Path) -> None:
    """JSONL with qid/pos/neg and, when present, t_pos/t_neg."""
    with open(path, "w", encoding="utf-8") as f:
        for t in triplets:
            record: dict = {"qid": t.query_id, "pos": t.pos_doc_id, "neg": t.neg_doc_id}
            if t.has_teacher:
                record["t_pos"] = t.teacher_pos
                record["t_neg"] = t.teacher_neg
            f.write(json.dumps(record, sort_keys=False) + "\n")


def read_triplets(path: str | Path) -> list[Triplet]:
    triplets: list[Triplet] = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                triplets.append(
                    Triplet(
                        query_id=record["qid"],
                        pos_doc_id=record["pos"],
                        neg_doc_id=record["neg"],
                        teacher_pos=record.get("t_pos"),
                        teacher_neg=record.get("t_neg"),
                    )
                )
            except (json.JSONDecodeError, KeyError) as exc:
                raise ValueError(f"{path}:{lineno}: malformed triplet line: {exc}") from exc
    return triplets
