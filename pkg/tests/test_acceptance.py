"""End-to-end acceptance checks.

One test per headline guarantee, each printing a single pass/fail line
(visible with -s or on failure). Thresholds and runtime budgets are
asserted, not just reported.
"""

import math
import random
import time
from pathlib import Path

import pytest

from adaptir.bm25 import bm25_score, build_index, retrieve_topk
from adaptir.cli import (
    Bm25Config,
    EncoderConfig,
    EvalConfig,
    PathsConfig,
    PipelineConfig,
    RerankConfig,
    run_pipeline,
    run_sweep,
)
from adaptir.corpus import Query, RunList, write_corpus, write_qrels, write_queries
from adaptir.evaluator import ndcg_at_k
from adaptir.fixtures import SyntheticSpec, gen_domain
from adaptir.pseudolabel import LabelConfig, gen_triplets, preset, split_queries
from adaptir.trainer import TrainConfig, marginmse_loss, ranknet_loss

from .oracles import oracle_bm25, oracle_ndcg
from .test_bm25 import random_corpus, random_query
from .test_trainer import _random_fd_case


def check(criterion: str, conditions: dict, detail: str = ""):
    ok = all(bool(v) for v in conditions.values())
    print(f"[acceptance] {criterion}: {'PASS' if ok else 'FAIL'}" + (f" ({detail})" if detail else ""))
    failed = [name for name, v in conditions.items() if not v]
    assert not failed, f"{criterion}: failed {failed}" + (f" ({detail})" if detail else "")


# ------------------------------------------------------------- arithmetic


def test_triplet_counts_for_collection_presets():
    t0 = time.monotonic()
    rng = random.Random(0)

    bio_corpus = [f"d{i:05d}" for i in range(2000)]
    bio_runs = [
        RunList(f"q{i:04d}", [(d, float(5 - r)) for r, d in enumerate(sorted(rng.sample(bio_corpus, 5)))])
        for i in range(450)
    ]
    bio = gen_triplets(bio_runs, preset("bioasq"), bio_corpus)

    fiqa_corpus = [f"d{i:05d}" for i in range(600)]
    fiqa_queries = [Query(f"q{i:05d}", "t") for i in range(6648)]
    train, _dev = split_queries(fiqa_queries, preset("fiqa").dev_query_count, seed=0)
    fiqa_runs = [
        RunList(q.id, [(d, float(2 - r)) for r, d in enumerate(sorted(rng.sample(fiqa_corpus, 2)))])
        for q in train
    ]
    fiqa = gen_triplets(fiqa_runs, preset("fiqa"), fiqa_corpus)

    elapsed = time.monotonic() - t0
    check(
        "triplet-arithmetic",
        {
            "bioasq_450x2x100": len(bio) == 90_000,
            "fiqa_6598x1x10": len(fiqa) == 65_980,
            "bioasq_in_band": 50_000 <= len(bio) <= 100_000,
            "fiqa_in_band": 50_000 <= len(fiqa) <= 100_000,
            "under_10s": elapsed < 10.0,
        },
        f"bioasq={len(bio)} fiqa={len(fiqa)} {elapsed:.1f}s",
    )


# ------------------------------------------------------------ loss oracles


def test_loss_values_and_gradients():
    ln2_err = abs(ranknet_loss(0.0, 0.0)[0] - math.log(2.0))
    point_err = abs(ranknet_loss(1.0, 0.0)[0] - 0.313262)
    flat = marginmse_loss(0.25, 0.0, 0.75, 0.5)

    cases = 0
    max_rel_err = 0.0
    h = 1e-5
    for loss_name, seed in (("ranknet", 42), ("marginmse", 43)):
        rng = random.Random(seed)
        for _ in range(50):
            state, forward, row_grads = _random_fd_case(rng, loss_name)
            cases += 1
            for row, grad in row_grads.items():
                for d in range(state.dim):
                    plus, minus = state.embeddings.copy(), state.embeddings.copy()
                    plus[row, d] += h
                    minus[row, d] -= h
                    fd = (forward(plus) - forward(minus)) / (2 * h)
                    rel = abs(grad[d] - fd) / max(abs(grad[d]), abs(fd), 1e-3)
                    max_rel_err = max(max_rel_err, rel)
    check(
        "loss-oracles",
        {
            "ranknet_0_0_is_ln2_1e-12": ln2_err <= 1e-12,
            "ranknet_1_0_point_1e-6": point_err <= 1e-6,
            "marginmse_matching_margins_zero": flat == (0.0, 0.0, 0.0),
            "hundred_fd_cases": cases == 100,
            "fd_rel_err_under_1e-5": max_rel_err < 1e-5,
        },
        f"max_rel_err={max_rel_err:.2e}",
    )


# ------------------------------------------------------------- bm25 oracle


def test_bm25_against_naive_reimplementation():
    rng = random.Random(20260814)
    max_err = 0.0
    topk_ok = True
    for trial in range(20):
        docs = random_corpus(rng, max_docs=50)
        doc_texts = {d.id: d.full_text for d in docs}
        index = build_index(docs, k1=0.9, b=0.4)
        for qn in range(3):
            query = random_query(rng, f"q{trial}-{qn}")
            scored = []
            for ordinal, doc in enumerate(docs):
                got = bm25_score(index, query, ordinal)
                want = oracle_bm25(query.text, doc_texts, doc.id, 0.9, 0.4)
                max_err = max(max_err, abs(got - want))
                scored.append((doc.id, got))
            expected = sorted(
                [(d, s) for d, s in scored if s > 0.0], key=lambda e: (-e[1], e[0])
            )
            for k in (1, 5, 100):
                if retrieve_topk(index, query, k).entries != expected[:k]:
                    topk_ok = False
    check(
        "bm25-oracle",
        {"score_equivalence_1e-9": max_err <= 1e-9, "topk_equals_sort_all": topk_ok},
        f"max_abs_err={max_err:.2e}",
    )


# ------------------------------------------------------------- ndcg oracle


def test_ndcg_against_brute_force():
    rng = random.Random(99)
    max_err = 0.0
    for _ in range(1000):
        n = rng.randint(1, 30)
        doc_ids = [f"d{i}" for i in range(n)]
        grades = {d: rng.randint(0, 3) for d in rng.sample(doc_ids, rng.randint(1, n))}
        ranking = rng.sample(doc_ids, rng.randint(1, n))
        k = rng.randint(1, 15)
        max_err = max(max_err, abs(ndcg_at_k(ranking, grades, k) - oracle_ndcg(ranking, grades, k)))
    worked = ndcg_at_k(["a", "b", "c"], {"a": 2, "b": 0, "c": 1}, 3)
    check(
        "ndcg-oracle",
        {
            "thousand_cases_1e-12": max_err <= 1e-12,
            "worked_example_0.963940": abs(worked - 0.963940) < 1e-6,
        },
        f"max_abs_err={max_err:.2e} worked={worked:.6f}",
    )


# ----------------------------------------------------- adaptation pipeline


@pytest.fixture(scope="module")
def shifted_domains(tmp_path_factory):
    """The fixed-seed shifted-domain fixture at two noise levels."""
    root = tmp_path_factory.mktemp("domains")
    out = {}
    for noise in (0.2, 0.5):
        spec = SyntheticSpec(
            n_docs=2000, n_queries=220, vocab_size=3000, tokens_per_doc=6,
            domain_shift=0.8, noise=noise, seed=7, sig_tokens=3, sig_pool=35,
        )
        d = root / f"noise{int(noise * 10):02d}"
        d.mkdir()
        docs, queries, qrels = gen_domain(spec)
        write_corpus(docs, d / "corpus.jsonl")
        write_queries(queries, d / "queries.jsonl")
        write_qrels(qrels, d / "qrels.tsv")
        out[noise] = d
    return out


def adaptation_config(data: Path, workdir: Path, rerank_mode="none", init_scale=0.01, steps=10000):
    return PipelineConfig(
        paths=PathsConfig(
            corpus=str(data / "corpus.jsonl"),
            queries=str(data / "queries.jsonl"),
            qrels=str(data / "qrels.tsv"),
            workdir=str(workdir),
        ),
        bm25=Bm25Config(),
        label=LabelConfig(k=1, m=10, dev_query_count=20, dev_pos=2, seed=0),
        rerank=RerankConfig(mode=rerank_mode),
        train=TrainConfig(loss="ranknet", batch_size=8, steps=steps, lr_max=1e-3,
                          lr_min=0.0, eval_every=1000, seed=0),
        eval=EvalConfig(cutoff=10),
        encoder=EncoderConfig(buckets=32768, dim=32, init_scale=init_scale, init_seed=0),
    )


def test_adaptation_beats_zero_shot(shifted_domains, tmp_path):
    t0 = time.monotonic()
    cfg = adaptation_config(shifted_domains[0.2], tmp_path / "work_a")
    result = run_pipeline(cfg, "a_bm25")
    elapsed = time.monotonic() - t0
    check(
        "self-supervised-adaptation",
        {
            "adapted_ge_zero_shot": result.adapted.mean >= result.zero_shot.mean,
            "under_2min": elapsed < 120.0,
        },
        f"zero={result.zero_shot.mean:.4f} adapted={result.adapted.mean:.4f} {elapsed:.0f}s",
    )


def test_reranked_labels_beat_raw_labels(shifted_domains, tmp_path):
    t0 = time.monotonic()
    noisy = shifted_domains[0.5]
    raw = run_pipeline(adaptation_config(noisy, tmp_path / "work_a"), "a_bm25")
    reranked = run_pipeline(
        adaptation_config(noisy, tmp_path / "work_b", rerank_mode="oracle"), "b_bm25_t5"
    )
    elapsed = time.monotonic() - t0
    check(
        "label-quality-transfer",
        {
            "reranked_ge_raw": reranked.adapted.mean >= raw.adapted.mean,
            "under_3min": elapsed < 180.0,
        },
        f"raw={raw.adapted.mean:.4f} reranked={reranked.adapted.mean:.4f} {elapsed:.0f}s",
    )


def test_margin_distillation_and_flat_teacher(shifted_domains, tmp_path):
    data = shifted_domains[0.2]
    distilled = run_pipeline(
        adaptation_config(data, tmp_path / "work_c", rerank_mode="oracle"), "c_distill"
    )

    flat_dir = tmp_path / "work_flat"
    flat_cfg = adaptation_config(data, flat_dir, rerank_mode="constant", init_scale=0.0, steps=2000)
    run_pipeline(flat_cfg, "c_distill")
    zero_bytes = (flat_dir / "encoder_zero_shot.bin").read_bytes()
    adapted_bytes = (flat_dir / "encoder_adapted.bin").read_bytes()

    check(
        "margin-distillation",
        {
            "distilled_ge_zero_shot": distilled.adapted.mean >= distilled.zero_shot.mean,
            "flat_teacher_exact_noop": adapted_bytes == zero_bytes,
        },
        f"zero={distilled.zero_shot.mean:.4f} distilled={distilled.adapted.mean:.4f}",
    )


# --------------------------------------------------------------- plumbing


def small_domain(root: Path, n_docs=300, n_queries=40, noise=0.2, seed=3):
    spec = SyntheticSpec(n_docs=n_docs, n_queries=n_queries, vocab_size=900,
                         tokens_per_doc=6, noise=noise, seed=seed)
    docs, queries, qrels = gen_domain(spec)
    root.mkdir(parents=True, exist_ok=True)
    write_corpus(docs, root / "corpus.jsonl")
    write_queries(queries, root / "queries.jsonl")
    write_qrels(qrels, root / "qrels.tsv")
    return root


def small_config(data: Path, workdir: Path, **label_kw) -> PipelineConfig:
    label = dict(k=1, m=5, dev_query_count=6, dev_pos=2, dev_neg=20, seed=0)
    label.update(label_kw)
    return PipelineConfig(
        paths=PathsConfig(corpus=str(data / "corpus.jsonl"), queries=str(data / "queries.jsonl"),
                          qrels=str(data / "qrels.tsv"), workdir=str(workdir)),
        label=LabelConfig(**label),
        rerank=RerankConfig(mode="oracle"),
        train=TrainConfig(steps=60, eval_every=20, lr_max=0.005, seed=0),
        encoder=EncoderConfig(buckets=4096, dim=16, init_scale=0.01, init_seed=0),
    )


def test_stage_determinism(tmp_path):
    data = small_domain(tmp_path / "data")
    artifacts = (
        "bm25_index.json", "bm25_run.trec", "reranked_run.trec", "triplets.jsonl",
        "triplets_teacher.jsonl", "dev_qrels.tsv", "encoder_zero_shot.bin",
        "encoder_adapted.bin", "train_history.csv", "zero_shot_run.trec",
        "adapted_run.trec", "pipeline_report.csv",
    )
    for tag in ("r1", "r2"):
        run_pipeline(small_config(data, tmp_path / tag), "c_distill")
    identical = {
        name: (tmp_path / "r1" / name).read_bytes() == (tmp_path / "r2" / name).read_bytes()
        for name in artifacts
    }

    # a rerun over the same workdir revalidates every stage from the
    # manifest hashes without rebuilding anything
    manifest = tmp_path / "r1" / "manifest.jsonl"
    entries_before = manifest.read_text().count("\n")
    run_pipeline(small_config(data, tmp_path / "r1"), "c_distill")
    cached = manifest.read_text().count("\n") == entries_before

    check(
        "stage-determinism",
        {**{f"identical_{n}": v for n, v in identical.items()}, "rerun_fully_cached": cached},
        f"{sum(identical.values())}/{len(artifacts)} artifacts byte-identical",
    )


def test_positive_depth_sweep_completes(tmp_path):
    data = small_domain(tmp_path / "data", n_docs=700, n_queries=40, seed=5)
    cfg = small_config(data, tmp_path / "sweep")
    pairs = [(1, 500), (5, 100), (10, 50)]
    rows = run_sweep(cfg, [k for k, _ in pairs], [m for _, m in pairs], variant="a_bm25")
    table = (tmp_path / "sweep" / "sweep.csv").read_text().splitlines()
    check(
        "k-sweep",
        {
            "three_rows": len(rows) == 3,
            "pairing_preserved": [(k, m) for k, m, _ in rows] == pairs,
            "csv_header_plus_3": len(table) == 4 and table[0] == "k,m,ndcg10",
            "scores_in_range": all(0.0 <= s <= 1.0 for _, _, s in rows),
        },
        " ".join(f"k={k}:{s:.3f}" for k, _, s in rows),
    )
