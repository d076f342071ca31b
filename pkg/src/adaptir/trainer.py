"""Fine-tune the hashed encoder on triplets.

Two losses: a pairwise probability-of-correct-order loss
(-log sigmoid(s_pos - s_neg)) and margin distillation
((s_pos - s_neg) - (t_pos - t_neg))^2 against teacher scores. Gradients
flow through mean pooling into the embedding rows both towers touch;
Adam moments are kept lazily, updating only touched rows, with bias
correction driven by the global step counter. Every eval_every steps
(plus step 0 and the final step) the dev set is ranked and the state with
the best dev NDCG@10 is kept, earliest step winning ties.
"""

from __future__ import annotations

import logging
import math
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .corpus import Document, QrelEntry, Query, RunList, qrels_to_grades
from .encoder import EncoderState, encode, load_state, text_profile
from .evaluator import ndcg_at_k
from .pseudolabel import Triplet

logger = logging.getLogger(__name__)

# Reference fine-tuning rate for transformer encoders; orders of magnitude
# too small for the hashed bag model, which uses DESK_LR by default.
TRANSFORMER_FINETUNE_LR = 2e-6
DESK_LR = 1e-2


@dataclass
class TrainConfig:
    loss: str = "ranknet"
    batch_size: int = 8
    steps: int = 10000
    lr_max: float = DESK_LR
    lr_min: float = 0.0
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    eval_every: int = 1000
    seed: int = 0
    init_from: str | None = None
    dev_rank_full: bool = False

    def __post_init__(self) -> None:
        if self.loss not in ("ranknet", "marginmse"):
            raise ValueError(f"loss must be 'ranknet' or 'marginmse', got {self.loss!r}")
        if self.batch_size < 1 or self.steps < 1 or self.eval_every < 1:
            raise ValueError("batch_size, steps and eval_every must be >= 1")
        if not (self.lr_max >= self.lr_min >= 0.0):
            raise ValueError(f"need lr_max >= lr_min >= 0, got {self.lr_max}, {self.lr_min}")


@dataclass
class AdamState:
    """First/second moment estimates, same shape as the embedding table."""

    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def for_state(cls, state: EncoderState) -> "AdamState":
        return cls(m=np.zeros_like(state.embeddings), v=np.zeros_like(state.embeddings))


@dataclass
class HistoryEntry:
    step: int
    lr: float
    loss: float
    dev_ndcg: float


def _sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def _softplus(x: float) -> float:
    # log(1 + e^x) without overflow for large |x|
    return max(x, 0.0) + math.log1p(math.exp(-abs(x)))


def ranknet_loss(s_pos: float, s_neg: float) -> tuple[float, float, float]:
    """-log sigmoid(s_pos - s_neg) and its two score gradients."""
    delta = s_pos - s_neg
    loss = _softplus(-delta)
    slope = _sigmoid(-delta)  # 1 - sigmoid(delta)
    return loss, -slope, slope


def marginmse_loss(s_pos: float, s_neg: float, t_pos: float, t_neg: float) -> tuple[float, float, float]:
    """Squared error between student and teacher margins, with score gradients."""
    gap = (s_pos - s_neg) - (t_pos - t_neg)
    return gap * gap, 2.0 * gap, -2.0 * gap


def cosine_lr(step: int, total_steps: int, lr_max: float, lr_min: float = 0.0) -> float:
    """Half-cosine decay from lr_max at step 0 to lr_min at step == total_steps."""
    if not 0 <= step <= total_steps:
        raise ValueError(f"step {step} outside [0, {total_steps}]")
    return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + math.cos(math.pi * step / total_steps))


Profile = tuple[np.ndarray, np.ndarray]


def adam_apply(
    state: EncoderState,
    adam: AdamState,
    row_grads: dict[int, np.ndarray],
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> None:
    """One bias-corrected Adam update restricted to the rows in ``row_grads``."""
    adam.t += 1
    bc1 = 1.0 - beta1 ** adam.t
    bc2 = 1.0 - beta2 ** adam.t
    for row, g in row_grads.items():
        adam.m[row] = beta1 * adam.m[row] + (1.0 - beta1) * g
        adam.v[row] = beta2 * adam.v[row] + (1.0 - beta2) * g * g
        m_hat = adam.m[row] / bc1
        v_hat = adam.v[row] / bc2
        state.embeddings[row] -= lr * m_hat / (np.sqrt(v_hat) + eps)


def _pooled(state: EncoderState, profile: Profile) -> np.ndarray:
    idx, weights = profile
    if idx.size == 0:
        return np.zeros(state.dim)
    return (state.embeddings[idx] * weights[:, None]).sum(axis=0)


def _triplet_grads(
    state: EncoderState,
    triplet: Triplet,
    q_prof: Profile,
    p_prof: Profile,
    n_prof: Profile,
    loss_name: str,
    row_grads: dict[int, np.ndarray],
) -> float:
    """Accumulate one triplet's embedding-row gradients; returns its loss."""
    g_q = _pooled(state, q_prof)
    g_p = _pooled(state, p_prof)
    g_n = _pooled(state, n_prof)
    s_pos = float(g_q @ g_p)
    s_neg = float(g_q @ g_n)
    if loss_name == "ranknet":
        loss, d_pos, d_neg = ranknet_loss(s_pos, s_neg)
    else:
        if not triplet.has_teacher:
            raise ValueError(
                f"triplet ({triplet.query_id}, {triplet.pos_doc_id}, {triplet.neg_doc_id}) "
                "has no teacher scores; margin distillation needs them"
            )
        loss, d_pos, d_neg = marginmse_loss(s_pos, s_neg, triplet.teacher_pos, triplet.teacher_neg)

    # dS/dE[row] = w_q(row) * g_other + w_other(row) * g_q; a row used by
    # both towers receives both contributions.
    def add(profile: Profile, coeff: float, other: np.ndarray) -> None:
        if coeff == 0.0:
            return
        idx, weights = profile
        for row, w in zip(idx, weights):
            contrib = (coeff * w) * other
            if row in row_grads:
                row_grads[row] += contrib
            else:
                row_grads[int(row)] = contrib.copy()

    add(q_prof, d_pos, g_p)
    add(p_prof, d_pos, g_q)
    add(q_prof, d_neg, g_n)
    add(n_prof, d_neg, g_q)
    return loss


def backprop_step(
    state: EncoderState,
    adam: AdamState,
    batch: Sequence[Triplet],
    query_texts: Mapping[str, str],
    doc_texts: Mapping[str, str],
    cfg: TrainConfig,
    lr: float,
) -> tuple[EncoderState, AdamState, float]:
    """Accumulate gradients over ``batch``, apply one Adam update, return mean loss."""
    if not batch:
        raise ValueError("batch must not be empty")
    profiles: dict[str, Profile] = {}

    def prof(text: str, key: str) -> Profile:
        if key not in profiles:
            profiles[key] = text_profile(state, text)
        return profiles[key]

    row_grads: dict[int, np.ndarray] = {}
    total = 0.0
    for t in batch:
        q_prof = prof(query_texts[t.query_id], "q:" + t.query_id)
        p_prof = prof(doc_texts[t.pos_doc_id], "d:" + t.pos_doc_id)
        n_prof = prof(doc_texts[t.neg_doc_id], "d:" + t.neg_doc_id)
        total += _triplet_grads(state, t, q_prof, p_prof, n_prof, cfg.loss, row_grads)

    mean_loss = total / len(batch)
    if not math.isfinite(mean_loss):
        raise RuntimeError(f"non-finite training loss {mean_loss} (batch of {len(batch)})")
    for row in row_grads:
        row_grads[row] /= len(batch)
        if not np.all(np.isfinite(row_grads[row])):
            raise RuntimeError(f"non-finite gradient in embedding row {row}")
    adam_apply(state, adam, row_grads, lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps)
    return state, adam, mean_loss


def _judged_rankings(
    state: EncoderState,
    dev_queries: Sequence[Query],
    grades_by_query: Mapping[str, Mapping[str, int]],
    doc_profiles: Mapping[str, Profile],
) -> list[RunList]:
    """Rank only each dev query's judged documents (cheap dev evaluation)."""
    runs = []
    for query in dev_queries:
        judged = grades_by_query.get(query.id)
        if not judged:
            continue
        g_q = encode(state, query.text)
        scored = []
        for doc_id in sorted(judged):
            g_d = _pooled(state, doc_profiles[doc_id])
            scored.append((doc_id, float(g_q @ g_d)))
        runs.append(RunList.from_scores(query.id, scored))
    return runs


def _dev_ndcg(
    state: EncoderState,
    dev_queries: Sequence[Query],
    grades_by_query: Mapping[str, Mapping[str, int]],
    doc_profiles: Mapping[str, Profile],
    corpus: Sequence[Document],
    rank_full: bool,
    cutoff: int = 10,
) -> float:
    if rank_full:
        from .encoder import rank_with_encoder

        runs = [rank_with_encoder(state, q, corpus, cutoff) for q in dev_queries]
    else:
        runs = _judged_rankings(state, dev_queries, grades_by_query, doc_profiles)
    rankings = {run.query_id: [doc_id for doc_id, _ in run.entries] for run in runs}
    values = [
        ndcg_at_k(rankings.get(query_id, []), grades, cutoff)
        for query_id, grades in grades_by_query.items()
    ]
    return sum(values) / len(values) if values else 0.0


def train(
    state0: EncoderState,
    triplets: Sequence[Triplet],
    queries: Mapping[str, Query],
    dev_qrels: Sequence[QrelEntry],
    dev_queries: Sequence[Query],
    corpus: Sequence[Document],
    cfg: TrainConfig,
) -> tuple[EncoderState, list[HistoryEntry]]:
    """Run cfg.steps batches and return the dev-best state plus the eval history.

    ``queries`` must resolve every triplet's query id. Triplets are
    shuffled per epoch with the seeded RNG and cycled when exhausted.
    """
    if not triplets:
        raise ValueError("no training triplets")
    if cfg.loss == "marginmse":
        for t in triplets:
            if not t.has_teacher:
                raise ValueError(
                    f"triplet ({t.query_id}, {t.pos_doc_id}, {t.neg_doc_id}) lacks teacher scores"
                )
    if not dev_queries or not dev_qrels:
        raise ValueError("dev queries and dev qrels are required for checkpoint selection")

    state = load_state(cfg.init_from) if cfg.init_from else state0.copy()
    adam = AdamState.for_state(state)

    docs_by_id = {d.id: d for d in corpus}
    query_texts: dict[str, str] = {}
    doc_texts: dict[str, str] = {}
    for t in triplets:
        if t.query_id not in query_texts:
            if t.query_id not in queries:
                raise KeyError(f"query {t.query_id!r} not resolvable")
            query_texts[t.query_id] = queries[t.query_id].text
        for doc_id in (t.pos_doc_id, t.neg_doc_id):
            if doc_id not in doc_texts:
                if doc_id not in docs_by_id:
                    raise KeyError(f"document {doc_id!r} not resolvable")
                doc_texts[doc_id] = docs_by_id[doc_id].full_text

    grades_by_query = qrels_to_grades(dev_qrels)
    dev_doc_profiles: dict[str, Profile] = {}
    for grades in grades_by_query.values():
        for doc_id in grades:
            if doc_id not in dev_doc_profiles:
                if doc_id not in docs_by_id:
                    raise KeyError(f"judged document {doc_id!r} not in corpus")
                dev_doc_profiles[doc_id] = text_profile(state, docs_by_id[doc_id].full_text)

    def evaluate() -> float:
        return _dev_ndcg(
            state, dev_queries, grades_by_query, dev_doc_profiles, corpus, cfg.dev_rank_full
        )

    history: list[HistoryEntry] = []
    best_state = state.copy()
    best_ndcg = evaluate()
    best_step = 0
    history.append(HistoryEntry(step=0, lr=cosine_lr(0, cfg.steps, cfg.lr_max, cfg.lr_min),
                                loss=math.nan, dev_ndcg=best_ndcg))

    rng = random.Random(cfg.seed)
    order = list(range(len(triplets)))
    rng.shuffle(order)
    cursor = 0
    loss_sum, loss_count = 0.0, 0
    for step in range(1, cfg.steps + 1):
        batch: list[Triplet] = []
        while len(batch) < cfg.batch_size:
            if cursor >= len(order):
                rng.shuffle(order)
                cursor = 0
            batch.append(triplets[order[cursor]])
            cursor += 1
        lr = cosine_lr(step - 1, cfg.steps, cfg.lr_max, cfg.lr_min)
        _, _, loss = backprop_step(state, adam, batch, query_texts, doc_texts, cfg, lr)
        loss_sum += loss
        loss_count += 1

        if step % cfg.eval_every == 0 or step == cfg.steps:
            ndcg = evaluate()
            history.append(HistoryEntry(step=step, lr=lr, loss=loss_sum / loss_count, dev_ndcg=ndcg))
            loss_sum, loss_count = 0.0, 0
            if ndcg > best_ndcg:
                best_ndcg = ndcg
                best_step = step
                best_state = state.copy()
            logger.info("step %d lr %.3g dev ndcg@10 %.4f (best %.4f @ %d)",
                        step, lr, ndcg, best_ndcg, best_step)
    return best_state, history


def write_history(history: Sequence[HistoryEntry], path: str | Path) -> None:
    """CSV history: step, lr, mean train loss since last entry, dev NDCG@10."""
    with open(path, "w", encoding="utf-8") as f:
        f.write("step,lr,loss,dev_ndcg10\n")
        for h in history:
            f.write(f"{h.step},{h.lr!r},{h.loss!r},{h.dev_ndcg!r}\n")
