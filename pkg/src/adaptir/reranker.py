"""Cross-encoder style (query, document) pair scoring and run re-ranking.

A scorer is anything with ``score_pairs``: the lexical-overlap reference
scorer keeps the whole suite runnable offline, while ``remote_scorer``
talks to a scoring service over HTTP (POST /score with
``{"pairs": [{"query": ..., "doc": ...}]}`` returning ``{"scores": [...]}``).
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Mapping, Protocol, Sequence

import requests

from .bm25 import tokenize
from .corpus import Document, Query, RunList

RERANK_DEPTH = 100
REMOTE_DOC_WORD_LIMIT = 350


class ScorerProtocolError(RuntimeError):
    """The remote scoring service violated the wire protocol."""


class PairScorer(Protocol):
    def score_pairs(self, pairs: Sequence[tuple[str, str]]) -> list[float]:
        """Score (query_text, doc_text) pairs, preserving order and length."""
        ...


@dataclass(frozen=True)
class T5LogitPair:
    """Raw logits of a generative true/false relevance head."""

    z_true: float
    z_false: float


def t5_relevance(logits: T5LogitPair) -> float:
    """Two-way softmax probability of the "true" token, in [0, 1].

    Computed as sigmoid(z_true - z_false), with the exponential always
    taken of a non-positive argument so large logits cannot overflow.
    """
    if not (math.isfinite(logits.z_true) and math.isfinite(logits.z_false)):
        raise ValueError(f"non-finite logits: {logits}")
    delta = logits.z_true - logits.z_false
    if delta >= 0.0:
        return 1.0 / (1.0 + math.exp(-delta))
    e = math.exp(delta)
    return e / (1.0 + e)


class LexicalOverlapScorer:
    """Fraction of distinct query tokens that also occur in the document."""

    def score_pairs(self, pairs: Sequence[tuple[str, str]]) -> list[float]:
        scores = []
        for query_text, doc_text in pairs:
            q_tokens = set(tokenize(query_text))
            if not q_tokens:
                scores.append(0.0)
                continue
            d_tokens = set(tokenize(doc_text))
            scores.append(len(q_tokens & d_tokens) / len(q_tokens))
        return scores


def lexical_overlap_scorer() -> LexicalOverlapScorer:
    return LexicalOverlapScorer()


class ConstantScorer:
    """Scores every pair the same; useful as a degenerate teacher."""

    def __init__(self, value: float = 0.5):
        self.value = value

    def score_pairs(self, pairs: Sequence[tuple[str, str]]) -> list[float]:
        return [self.value] * len(pairs)


def truncate_words(text: str, limit: int = REMOTE_DOC_WORD_LIMIT) -> str:
    """Keep only the first ``limit`` whitespace-separated words."""
    words = text.split()
    if len(words) <= limit:
        return text
    return " ".join(words[:limit])


class RemoteScorer:
    """Client for the HTTP scoring service; batches requests, retries transport errors."""

    def __init__(self, endpoint: str, batch_size: int = 32, timeout: float = 30.0, max_retries: int = 3):
        if batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {batch_size}")
        self.endpoint = endpoint.rstrip("/")
        self.batch_size = batch_size
        self.timeout = timeout
        self.max_retries = max_retries

    def score_pairs(self, pairs: Sequence[tuple[str, str]]) -> list[float]:
        scores: list[float] = []
        for start in range(0, len(pairs), self.batch_size):
            batch = pairs[start:start + self.batch_size]
            scores.extend(self._score_batch(batch))
        return scores

    def _score_batch(self, batch: Sequence[tuple[str, str]]) -> list[float]:
        body = {
            "pairs": [
                {"query": query, "doc": truncate_words(doc)} for query, doc in batch
            ]
        }
        delay = 0.5
        for attempt in range(self.max_retries + 1):
            try:
                resp = requests.post(f"{self.endpoint}/score", json=body, timeout=self.timeout)
                resp.raise_for_status()
                payload = resp.json()
                break
            except (requests.ConnectionError, requests.Timeout) as exc:
                if attempt == self.max_retries:
                    raise ScorerProtocolError(
                        f"scoring service unreachable after {attempt + 1} attempts: {exc}"
                    ) from exc
                time.sleep(delay)
                delay *= 2
        scores = payload.get("scores") if isinstance(payload, dict) else None
        if not isinstance(scores, list) or len(scores) != len(batch):
            got = len(scores) if isinstance(scores, list) else "no"
            raise ScorerProtocolError(f"expected {len(batch)} scores, got {got}")
        return [float(s) for s in scores]


def remote_scorer(endpoint: str, batch_size: int = 32, timeout: float = 30.0) -> RemoteScorer:
    return RemoteScorer(endpoint=endpoint, batch_size=batch_size, timeout=timeout)


def rerank_run(
    run: RunList,
    scorer: PairScorer,
    queries: Mapping[str, Query],
    docs: Mapping[str, Document],
    depth: int = RERANK_DEPTH,
) -> RunList:
    """Rescore the top ``depth`` entries of ``run`` and re-sort them.

    Entries below ``depth`` are dropped; the returned doc_id set equals
    the original top-``depth`` set for any scorer.
    """
    if depth < 1:
        raise ValueError(f"depth must be >= 1, got {depth}")
    if run.query_id not in queries:
        raise KeyError(f"query {run.query_id!r} not resolvable")
    query_text = queries[run.query_id].text
    head = run.entries[:depth]
    pairs = []
    for doc_id, _ in head:
        if doc_id not in docs:
            raise KeyError(f"document {doc_id!r} not resolvable")
        pairs.append((query_text, docs[doc_id].full_text))
    scores = scorer.score_pairs(pairs)
    if len(scores) != len(pairs):
        raise ScorerProtocolError(f"scorer returned {len(scores)} scores for {len(pairs)} pairs")
    return RunList.from_scores(run.query_id, zip((d for d, _ in head), scores))
