"""Graded-relevance ranking metrics over runs and qrels.

NDCG uses exponential gain (2^grade - 1) with a log2(rank + 1) discount;
the ideal DCG is computed over all judged documents, truncated at the
cutoff, which is the usual trec-style behavior.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .corpus import QrelEntry, RunList, qrels_to_grades


@dataclass
class MetricReport:
    metric_name: str
    cutoff: int
    per_query: dict[str, float]
    mean: float


@dataclass
class RunComparison:
    """Aligned per-query metric deltas between two reports (b - a)."""

    rows: list[tuple[str, float, float, float]]
    mean_a: float
    mean_b: float
    mean_delta: float


def ndcg_at_k(ranking: Sequence[str], grades: Mapping[str, int], k: int) -> float:
    """NDCG of ``ranking`` at cutoff ``k``; unjudged documents count as grade 0."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    dcg = 0.0
    for i, doc_id in enumerate(ranking[:k], 1):
        gain = (1 << grades.get(doc_id, 0)) - 1
        dcg += gain / math.log2(i + 1)
    idcg = 0.0
    for i, grade in enumerate(sorted(grades.values(), reverse=True)[:k], 1):
        idcg += ((1 << grade) - 1) / math.log2(i + 1)
    if idcg == 0.0:
        return 0.0
    return dcg / idcg


def evaluate_run(runs: Iterable[RunList], qrels: Iterable[QrelEntry], k: int = 10) -> MetricReport:
    """Per-query NDCG@k over every judged query.

    Judged queries missing from the run score 0; run queries without
    judgments are skipped.
    """
    grades_by_query = qrels_to_grades(qrels)
    rankings = {run.query_id: [doc_id for doc_id, _ in run.entries] for run in runs}
    per_query: dict[str, float] = {}
    for query_id, grades in grades_by_query.items():
        per_query[query_id] = ndcg_at_k(rankings.get(query_id, []), grades, k)
    mean = sum(per_query.values()) / len(per_query) if per_query else 0.0
    return MetricReport(metric_name="ndcg", cutoff=k, per_query=per_query, mean=mean)


def compare_runs(report_a: MetricReport, report_b: MetricReport) -> RunComparison:
    """Per-query deltas between two reports of the same metric and cutoff."""
    if report_a.metric_name != report_b.metric_name or report_a.cutoff != report_b.cutoff:
        raise ValueError("reports measure different metrics or cutoffs")
    shared = sorted(set(report_a.per_query) & set(report_b.per_query))
    if not shared:
        raise ValueError("reports share no queries")
    rows = [
        (qid, report_a.per_query[qid], report_b.per_query[qid],
         report_b.per_query[qid] - report_a.per_query[qid])
        for qid in shared
    ]
    mean_a = sum(r[1] for r in rows) / len(rows)
    mean_b = sum(r[2] for r in rows) / len(rows)
    return RunComparison(rows=rows, mean_a=mean_a, mean_b=mean_b, mean_delta=mean_b - mean_a)


def write_report_csv(report: MetricReport, path: str | Path) -> None:
    """Emit one query per row plus a trailing mean row."""
    name = f"{report.metric_name}@{report.cutoff}"
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"query_id,{name}\n")
        for query_id in sorted(report.per_query):
            f.write(f"{query_id},{report.per_query[query_id]:.6f}\n")
        f.write(f"mean,{report.mean:.6f}\n")


def format_report_table(report: MetricReport) -> str:
    """Pretty fixed-width table for standard output."""
    name = f"{report.metric_name}@{report.cutoff}"
    width = max([len("query_id")] + [len(q) for q in report.per_query])
    lines = [f"{'query_id':<{width}}  {name}"]
    for query_id in sorted(report.per_query):
        lines.append(f"{query_id:<{width}}  {report.per_query[query_id]:.4f}")
    lines.append(f"{'mean':<{width}}  {report.mean:.4f}")
    return "\n".join(lines)
