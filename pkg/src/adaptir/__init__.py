"""Self-supervised domain adaptation for two-tower retrieval.

Lexical top-k candidates become pseudo-relevance labels (optionally
re-ranked by a stronger pair scorer), labels become triplets, and a hashed
bag-of-embeddings encoder is fine-tuned on them with a pairwise ordering
loss or teacher-margin distillation, selecting checkpoints by dev NDCG@10.
"""

from .bm25 import InvertedIndex, bm25_score, build_index, idf, retrieve_topk, tokenize
from .corpus import (
    Document,
    FormatError,
    QrelEntry,
    Query,
    RunList,
    load_corpus,
    load_qrels,
    load_queries,
    read_run,
    write_corpus,
    write_qrels,
    write_queries,
    write_run,
)
from .encoder import EncoderState, encode, init_state, load_state, rank_with_encoder, rsv, save_state
from .evaluator import MetricReport, compare_runs, evaluate_run, ndcg_at_k
from .fixtures import SyntheticSpec, gen_domain, oracle_scorer
from .pseudolabel import (
    LabelConfig,
    Triplet,
    attach_teacher,
    gen_dev_qrels,
    gen_triplets,
    preset,
    read_triplets,
    split_queries,
    write_triplets,
)
from .reranker import (
    ConstantScorer,
    PairScorer,
    RemoteScorer,
    ScorerProtocolError,
    lexical_overlap_scorer,
    rerank_run,
    t5_relevance,
)
from .trainer import TrainConfig, cosine_lr, marginmse_loss, ranknet_loss, train

__version__ = "0.1.0"

__all__ = [
    "ConstantScorer",
    "Document",
    "EncoderState",
    "FormatError",
    "InvertedIndex",
    "LabelConfig",
    "MetricReport",
    "PairScorer",
    "QrelEntry",
    "Query",
    "RemoteScorer",
    "RunList",
    "ScorerProtocolError",
    "SyntheticSpec",
    "TrainConfig",
    "Triplet",
    "attach_teacher",
    "bm25_score",
    "build_index",
    "compare_runs",
    "cosine_lr",
    "encode",
    "evaluate_run",
    "gen_dev_qrels",
    "gen_domain",
    "gen_triplets",
    "idf",
    "init_state",
    "load_corpus",
    "load_qrels",
    "load_queries",
    "load_state",
    "lexical_overlap_scorer",
    "marginmse_loss",
    "ndcg_at_k",
    "oracle_scorer",
    "preset",
    "rank_with_encoder",
    "ranknet_loss",
    "read_run",
    "read_triplets",
    "rerank_run",
    "retrieve_topk",
    "rsv",
    "save_state",
    "split_queries",
    "t5_relevance",
    "tokenize",
    "train",
    "write_corpus",
    "write_qrels",
    "write_queries",
    "write_run",
    "write_triplets",
]
