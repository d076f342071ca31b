"""BM25 inverted index over the target collection.

The tokenizer is deliberately minimal (lowercased alphanumeric runs, no
stemming or stopwords), so scores are reproducible everywhere but are not
bit-compatible with Lucene-style analyzers. IDF is the non-negative
ln(1 + (N - df + 0.5) / (df + 0.5)) variant.
"""

from __future__ import annotations

import json
import math
import re
from bisect import bisect_left
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .corpus import Document, Query, RunList

DEFAULT_K1 = 0.9
DEFAULT_B = 0.4

_TOKEN_RE = re.compile(r"[a-z0-9]+")

_INDEX_MAGIC = "adaptir-bm25-index"
_INDEX_VERSION = 1


def tokenize(text: str) -> list[str]:
    """Lowercase and split on any non-alphanumeric character."""
    return _TOKEN_RE.findall(text.lower())


@dataclass
class InvertedIndex:
    """Postings plus the per-document statistics BM25 needs.

    Postings map term -> [(doc_ordinal, term_frequency)] with ordinals
    strictly increasing; ``doc_ids`` maps ordinal back to document id.
    """

    postings: dict[str, list[tuple[int, int]]]
    doc_lengths: list[int]
    avg_doc_length: float
    doc_count: int
    doc_ids: list[str]
    k1: float = DEFAULT_K1
    b: float = DEFAULT_B

    def term_frequency(self, term: str, doc_ordinal: int) -> int:
        """Occurrences of ``term`` in the document at ``doc_ordinal`` (0 if absent)."""
        plist = self.postings.get(term)
        if not plist:
            return 0
        i = bisect_left(plist, (doc_ordinal, 0))
        if i < len(plist) and plist[i][0] == doc_ordinal:
            return plist[i][1]
        return 0

    def document_frequency(self, term: str) -> int:
        return len(self.postings.get(term, ()))


def build_index(docs: Sequence[Document], k1: float = DEFAULT_K1, b: float = DEFAULT_B) -> InvertedIndex:
    """Index ``docs`` (title + text) in order; deterministic for a fixed input."""
    if not docs:
        raise ValueError("cannot index an empty corpus")
    if k1 <= 0:
        raise ValueError(f"k1 must be > 0, got {k1}")
    if not 0.0 <= b <= 1.0:
        raise ValueError(f"b must be in [0, 1], got {b}")

    postings: dict[str, list[tuple[int, int]]] = {}
    doc_lengths: list[int] = []
    doc_ids: list[str] = []
    for ordinal, doc in enumerate(docs):
        tokens = tokenize(doc.full_text)
        doc_lengths.append(len(tokens))
        doc_ids.append(doc.id)
        for term, tf in Counter(tokens).items():
            postings.setdefault(term, []).append((ordinal, tf))

    avg = sum(doc_lengths) / len(doc_lengths)
    return InvertedIndex(
        postings=postings,
        doc_lengths=doc_lengths,
        avg_doc_length=avg,
        doc_count=len(docs),
        doc_ids=doc_ids,
        k1=k1,
        b=b,
    )


def idf(index: InvertedIndex, term: str) -> float:
    """Inverse document frequency; unseen terms use df = 0."""
    df = index.document_frequency(term)
    return math.log(1.0 + (index.doc_count - df + 0.5) / (df + 0.5))


def bm25_score(index: InvertedIndex, query: Query, doc_ordinal: int) -> float:
    """Sum idf(w) * tf / (k1 * (1 - b + b * l_d / l_avg) + tf) over distinct shared terms."""
    if not 0 <= doc_ordinal < index.doc_count:
        raise IndexError(f"doc_ordinal {doc_ordinal} out of range")
    score = 0.0
    norm = None
    for term in dict.fromkeys(tokenize(query.text)):
        tf = index.term_frequency(term, doc_ordinal)
        if tf == 0:
            continue
        if norm is None:
            norm = index.k1 * (
                1.0 - index.b + index.b * index.doc_lengths[doc_ordinal] / index.avg_doc_length
            )
        score += idf(index, term) * tf / (norm + tf)
    return score


def retrieve_topk(index: InvertedIndex, query: Query, k: int = 100) -> RunList:
    """Top-k matching documents, score descending, ties by doc_id ascending.

    Documents sharing no term with the query (score 0) are never returned,
    so fewer than k entries come back when fewer documents match.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    scores: dict[int, float] = {}
    for term in dict.fromkeys(tokenize(query.text)):
        plist = index.postings.get(term)
        if not plist:
            continue
        w = idf(index, term)
        k1, b = index.k1, index.b
        avg = index.avg_doc_length
        for ordinal, tf in plist:
            norm = k1 * (1.0 - b + b * index.doc_lengths[ordinal] / avg)
            scores[ordinal] = scores.get(ordinal, 0.0) + w * tf / (norm + tf)
    scored = [(index.doc_ids[ordinal], s) for ordinal, s in scores.items() if s > 0.0]
    scored.sort(key=lambda e: (-e[1], e[0]))
    return RunList(query_id=query.id, entries=scored[:k])


def retrieve_all(index: InvertedIndex, queries: Sequence[Query], k: int = 100) -> list[RunList]:
    """retrieve_topk for every query, preserving query order."""
    return [retrieve_topk(index, q, k) for q in queries]


def save_index(index: InvertedIndex, path: str | Path) -> None:
    """Serialize the index as versioned JSON."""
    payload = {
        "magic": _INDEX_MAGIC,
        "version": _INDEX_VERSION,
        "k1": index.k1,
        "b": index.b,
        "doc_ids": index.doc_ids,
        "doc_lengths": index.doc_lengths,
        "postings": {term: [[o, tf] for o, tf in plist] for term, plist in index.postings.items()},
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, separators=(",", ":"), sort_keys=True)


def load_index(path: str | Path) -> InvertedIndex:
    with open(path, "r", encoding="utf-8") as f:
        payload = json.load(f)
    if payload.get("magic") != _INDEX_MAGIC:
        raise ValueError(f"{path}: not an index file")
    if payload.get("version") != _INDEX_VERSION:
        raise ValueError(f"{path}: unsupported index version {payload.get('version')!r}")
    doc_lengths = [int(n) for n in payload["doc_lengths"]]
    return InvertedIndex(
        postings={
            term: [(int(o), int(tf)) for o, tf in plist]
            for term, plist in payload["postings"].items()
        },
        doc_lengths=doc_lengths,
        avg_doc_length=sum(doc_lengths) / len(doc_lengths),
        doc_count=len(doc_lengths),
        doc_ids=[str(d) for d in payload["doc_ids"]],
        k1=float(payload["k1"]),
        b=float(payload["b"]),
    )
