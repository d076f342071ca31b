"""Deterministic synthetic corpora with planted relevance.

Every document carries a signature: a distinct sig_tokens-sized set drawn
from a small shared pool, padded to tokens_per_doc with common filler.
A query is the signature of each planted document plus noise tokens
sampled from the same pool, their count scaled by the noise knob. Because
a non-planted document can only match a strict subset of a planted
signature, lexical retrieval at noise 0 puts the planted document first
for single-planting queries; noise tokens blur that edge. Pool reuse
across documents is what lets an encoder trained on one query split
generalize to held-out queries. The domain_shift knob rewrites the
surface form of the lowest shift-fraction of the vocabulary, so two specs
differing only in shift produce structurally identical domains whose
token surfaces range from disjoint to identical.
"""

from __future__ import annotations

import itertools
import math
import random
from dataclasses import dataclass
from typing import Sequence

from .corpus import Document, QrelEntry, Query

NOISE_TOKENS_PER_SIGNAL = 2


@dataclass(frozen=True)
class SyntheticSpec:
    n_docs: int
    n_queries: int
    vocab_size: int
    tokens_per_doc: int
    relevant_per_query: int = 1
    domain_shift: float = 0.0
    noise: float = 0.0
    seed: int = 0
    sig_tokens: int = 3
    sig_pool: int | None = None

    def __post_init__(self) -> None:
        if min(self.n_docs, self.n_queries, self.vocab_size, self.tokens_per_doc) < 1:
            raise ValueError("n_docs, n_queries, vocab_size and tokens_per_doc must be >= 1")
        if self.relevant_per_query < 1:
            raise ValueError("relevant_per_query must be >= 1")
        if not (0.0 <= self.domain_shift <= 1.0 and 0.0 <= self.noise <= 1.0):
            raise ValueError("domain_shift and noise must lie in [0, 1]")
        if self.sig_tokens < 1 or self.tokens_per_doc < self.sig_tokens:
            raise ValueError("need tokens_per_doc >= sig_tokens >= 1")
        pool = self.resolved_sig_pool
        if pool < self.sig_tokens:
            raise ValueError(f"sig_pool {pool} smaller than sig_tokens {self.sig_tokens}")
        if math.comb(pool, self.sig_tokens) < self.n_docs:
            raise ValueError(
                f"sig_pool {pool} cannot yield {self.n_docs} distinct {self.sig_tokens}-token signatures"
            )
        if self.vocab_size <= pool:
            raise ValueError(
                f"vocab_size {self.vocab_size} leaves no common pool beyond the "
                f"{pool}-token signature pool"
            )
        if self.domain_shift > 0.0 and round(self.domain_shift * self.vocab_size) == 0:
            raise ValueError(f"vocab_size {self.vocab_size} too small for shift {self.domain_shift}")
        if self.n_queries * self.relevant_per_query > self.n_docs:
            raise ValueError("not enough documents to plant disjoint relevance sets")

    @property
    def resolved_sig_pool(self) -> int:
        if self.sig_pool is not None:
            return self.sig_pool
        return max(2 * self.sig_tokens, round(2 * math.sqrt(self.n_docs)))

    @property
    def noise_tokens_per_query(self) -> int:
        signal = self.relevant_per_query * self.sig_tokens
        return round(self.noise * signal * NOISE_TOKENS_PER_SIGNAL)


def _surface(index: int, shift_count: int) -> str:
    return f"{'x' if index < shift_count else 'w'}{index:06d}"


def _plant_subset_free(
    spec: SyntheticSpec,
    signatures: list[tuple[int, ...]],
    seen: set[tuple[int, ...]],
    rng: random.Random,
) -> list[list[int]]:
    """Pick disjoint planted-doc groups whose signature unions contain no other signature."""
    available = list(range(spec.n_docs))
    plantings: list[list[int]] = []
    for _ in range(spec.n_queries):
        for _attempt in range(200):
            picked = rng.sample(available, spec.relevant_per_query)
            union = sorted({j for i in picked for j in signatures[i]})
            own = {signatures[i] for i in picked}
            clean = all(
                combo in own or combo not in seen
                for combo in itertools.combinations(union, spec.sig_tokens)
            )
            if clean:
                break
        else:
            raise RuntimeError(
                "could not plant a separable multi-doc query; widen sig_pool or lower relevant_per_query"
            )
        for i in picked:
            available.remove(i)
        plantings.append(picked)
    return plantings


def gen_domain(spec: SyntheticSpec) -> tuple[list[Document], list[Query], list[QrelEntry]]:
    """Build one domain: corpus, queries and grade-1 qrels for planted pairs.

    The random draws depend only on seed and the count fields, never on
    domain_shift, so shifted variants of a spec are parallel corpora.
    """
    pool = spec.resolved_sig_pool
    rng = random.Random(spec.seed)
    shift_count = round(spec.domain_shift * spec.vocab_size)
    common_pool = range(pool, spec.vocab_size)

    # Balanced assignment: every pool token lands in (nearly) the same
    # number of signatures, so no token is a stronger relevance cue than
    # another. Each document takes the currently least-used tokens, with
    # random tie-breaking, re-drawn on signature collision.
    signatures: list[tuple[int, ...]] = []
    seen: set[tuple[int, ...]] = set()
    counts = [0] * pool
    for _ in range(spec.n_docs):
        for attempt in range(100):
            if attempt < 10:
                order = sorted(range(pool), key=lambda j: (counts[j], rng.random()))
                sig = tuple(sorted(order[: spec.sig_tokens]))
            else:
                sig = tuple(sorted(rng.sample(range(pool), spec.sig_tokens)))
            if sig not in seen:
                break
        else:
            raise RuntimeError("could not draw a fresh signature; widen sig_pool")
        seen.add(sig)
        signatures.append(sig)
        for j in sig:
            counts[j] += 1

    docs = []
    for i, sig in enumerate(signatures):
        tokens = [_surface(j, shift_count) for j in sig]
        filler = rng.choices(common_pool, k=spec.tokens_per_doc - spec.sig_tokens)
        tokens.extend(_surface(j, shift_count) for j in filler)
        docs.append(Document(id=f"d{i:06d}", title="", text=" ".join(tokens)))

    if spec.relevant_per_query == 1:
        perm = rng.sample(range(spec.n_docs), spec.n_queries)
        plantings = [[i] for i in perm]
    else:
        # A query carrying several signatures stays lexically separable
        # only if no foreign signature hides inside their union; reject
        # such groups so planted docs strictly outscore every distractor.
        plantings = _plant_subset_free(spec, signatures, seen, rng)

    queries: list[Query] = []
    qrels: list[QrelEntry] = []
    for qi in range(spec.n_queries):
        planted = plantings[qi]
        tokens = [_surface(j, shift_count) for i in planted for j in signatures[i]]
        if spec.noise_tokens_per_query:
            noise = rng.choices(range(pool), k=spec.noise_tokens_per_query)
            tokens.extend(_surface(j, shift_count) for j in noise)
        query_id = f"q{qi:06d}"
        queries.append(Query(id=query_id, text=" ".join(tokens)))
        qrels.extend(
            QrelEntry(query_id=query_id, doc_id=f"d{i:06d}", grade=1) for i in sorted(planted)
        )
    return docs, queries, qrels


@dataclass(frozen=True)
class OracleScorer:
    """Noiseless pair scorer: 1.0 for planted pairs, 0.0 for everything else.

    Texts are mapped back to ids through registries captured at creation,
    so the scorer plugs in anywhere a PairScorer does.
    """

    planted: frozenset
    query_registry: dict
    doc_registry: dict

    def score_pairs(self, pairs: Sequence[tuple[str, str]]) -> list[float]:
        scores = []
        for query_text, doc_text in pairs:
            pair = (self.query_registry.get(query_text), self.doc_registry.get(doc_text))
            scores.append(1.0 if None not in pair and pair in self.planted else 0.0)
        return scores


def oracle_scorer(
    gold_qrels: Sequence[QrelEntry],
    queries: Sequence[Query],
    corpus: Sequence[Document],
) -> OracleScorer:
    """Bind gold qrels to the texts the reranking path will present."""
    query_registry = {q.text: q.id for q in queries}
    doc_registry = {d.full_text: d.id for d in corpus}
    if len(query_registry) < len(queries) or len(doc_registry) < len(corpus):
        raise ValueError("duplicate texts make text-to-id lookup ambiguous")
    planted = frozenset((e.query_id, e.doc_id) for e in gold_qrels if e.grade > 0)
    return OracleScorer(planted=planted, query_registry=query_registry, doc_registry=doc_registry)
