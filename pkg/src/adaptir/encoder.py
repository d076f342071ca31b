"""Hashed bag-of-tokens dense encoder with a shared query/document tower.

Each token is hashed to one of B buckets (64-bit FNV-1a of the token
bytes XOR hash_seed, modulo B, so embeddings are stable across processes
and platforms); a text embeds as the mean of its bucket rows over the
first 350 tokens. Similarity is a dot product by default, cosine
optionally. The embedding table is the entire parameter set, which keeps
the model trainable at desk scale while staying behind the same scoring
interface a heavier encoder would use.
"""

from __future__ import annotations

import json
import struct
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .bm25 import tokenize
from .corpus import Document, Query, RunList

MAX_TOKENS = 350
DEFAULT_BUCKETS = 32768
DEFAULT_DIM = 64

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_U64 = 0xFFFFFFFFFFFFFFFF

_STATE_MAGIC = b"ADIRENC\n"
_STATE_VERSION = 1


def fnv1a64(data: bytes) -> int:
    """64-bit FNV-1a hash."""
    h = _FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * _FNV_PRIME) & _U64
    return h


def token_bucket(token: str, hash_seed: int, buckets: int) -> int:
    return (fnv1a64(token.encode("utf-8")) ^ (hash_seed & _U64)) % buckets


@dataclass
class EncoderState:
    """The model parameters: one (buckets, dim) embedding table shared by both towers."""

    embeddings: np.ndarray
    hash_seed: int = 0
    similarity: str = "dot"

    def __post_init__(self) -> None:
        if self.embeddings.ndim != 2 or 0 in self.embeddings.shape:
            raise ValueError(f"embeddings must be a non-empty 2-D array, got shape {self.embeddings.shape}")
        if self.similarity not in ("dot", "cosine"):
            raise ValueError(f"similarity must be 'dot' or 'cosine', got {self.similarity!r}")
        if not np.all(np.isfinite(self.embeddings)):
            raise ValueError("embeddings contain non-finite entries")

    @property
    def buckets(self) -> int:
        return self.embeddings.shape[0]

    @property
    def dim(self) -> int:
        return self.embeddings.shape[1]

    def copy(self) -> "EncoderState":
        return EncoderState(
            embeddings=self.embeddings.copy(),
            hash_seed=self.hash_seed,
            similarity=self.similarity,
        )


def init_state(
    buckets: int = DEFAULT_BUCKETS,
    dim: int = DEFAULT_DIM,
    seed: int = 0,
    scale: float = 0.1,
    similarity: str = "dot",
    hash_seed: int = 0,
) -> EncoderState:
    """Fresh state with entries i.i.d. uniform in [-scale, +scale]."""
    if scale < 0:
        raise ValueError(f"scale must be >= 0, got {scale}")
    rng = np.random.default_rng(seed)
    table = rng.uniform(-scale, scale, size=(buckets, dim)) if scale > 0 else np.zeros((buckets, dim))
    return EncoderState(embeddings=table, hash_seed=hash_seed, similarity=similarity)


def text_profile(state: EncoderState, text: str) -> tuple[np.ndarray, np.ndarray]:
    """Bucket indices and mean-pooling weights (count / n_tokens) for ``text``.

    Tokens beyond the first 350 are ignored; an empty text yields empty
    arrays.
    """
    tokens = tokenize(text)[:MAX_TOKENS]
    if not tokens:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.float64)
    counts = Counter(token_bucket(t, state.hash_seed, state.buckets) for t in tokens)
    idx = np.fromiter(sorted(counts), dtype=np.int64, count=len(counts))
    weights = np.array([counts[i] / len(tokens) for i in idx], dtype=np.float64)
    return idx, weights


def encode(state: EncoderState, text: str) -> np.ndarray:
    """Mean-pooled embedding of ``text``; the zero vector when no tokens survive."""
    idx, weights = text_profile(state, text)
    if idx.size == 0:
        return np.zeros(state.dim)
    return (state.embeddings[idx] * weights[:, None]).sum(axis=0)


def encode_many(state: EncoderState, texts: Sequence[str]) -> np.ndarray:
    """Stack of embeddings, one row per text."""
    out = np.zeros((len(texts), state.dim))
    for i, text in enumerate(texts):
        out[i] = encode(state, text)
    return out


def rsv(state: EncoderState, query_text: str, doc_text: str) -> float:
    """Similarity of the two embeddings under the state's similarity function."""
    q = encode(state, query_text)
    d = encode(state, doc_text)
    return _similarity(state, q, d)


def _similarity(state: EncoderState, q: np.ndarray, d: np.ndarray) -> float:
    if state.similarity == "dot":
        return float(q @ d)
    nq = np.linalg.norm(q)
    nd = np.linalg.norm(d)
    if nq == 0.0 or nd == 0.0:
        return 0.0
    return float(q @ d / (nq * nd))


def rank_with_encoder(state: EncoderState, query: Query, corpus: Sequence[Document], k: int) -> RunList:
    """Exhaustively score ``corpus`` against ``query`` and keep the top k."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    q = encode(state, query.text)
    scored = []
    for doc in corpus:
        d = encode(state, doc.full_text)
        scored.append((doc.id, _similarity(state, q, d)))
    run = RunList.from_scores(query.id, scored)
    run.entries = run.entries[:k]
    return run


def save_state(state: EncoderState, path: str | Path) -> None:
    """Versioned binary: magic, version, JSON header, row-major float64 payload."""
    header = json.dumps(
        {
            "buckets": state.buckets,
            "dim": state.dim,
            "hash_seed": state.hash_seed,
            "similarity": state.similarity,
        },
        sort_keys=True,
    ).encode("utf-8")
    with open(path, "wb") as f:
        f.write(_STATE_MAGIC)
        f.write(struct.pack("<I", _STATE_VERSION))
        f.write(struct.pack("<I", len(header)))
        f.write(header)
        f.write(np.ascontiguousarray(state.embeddings, dtype="<f8").tobytes())


def load_state(path: str | Path) -> EncoderState:
    """Inverse of :func:`save_state`; exact float64 round-trip."""
    with open(path, "rb") as f:
        blob = f.read()
    if len(blob) < len(_STATE_MAGIC) + 8 or not blob.startswith(_STATE_MAGIC):
        raise ValueError(f"{path}: not an encoder state file")
    offset = len(_STATE_MAGIC)
    (version,) = struct.unpack_from("<I", blob, offset)
    if version != _STATE_VERSION:
        raise ValueError(f"{path}: unsupported state version {version}")
    offset += 4
    (header_len,) = struct.unpack_from("<I", blob, offset)
    offset += 4
    if len(blob) < offset + header_len:
        raise ValueError(f"{path}: truncated header")
    header = json.loads(blob[offset:offset + header_len].decode("utf-8"))
    offset += header_len
    buckets, dim = int(header["buckets"]), int(header["dim"])
    expected = buckets * dim * 8
    payload = blob[offset:]
    if len(payload) != expected:
        raise ValueError(f"{path}: payload is {len(payload)} bytes, expected {expected}")
    table = np.frombuffer(payload, dtype="<f8").reshape(buckets, dim).copy()
    return EncoderState(
        embeddings=table,
        hash_seed=int(header["hash_seed"]),
        similarity=str(header["similarity"]),
    )
