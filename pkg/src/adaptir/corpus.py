"""Target-collection records and their interchange formats.

Documents and queries travel as JSONL (BEIR-style ``_id``/``title``/``text``
keys), relevance judgments as tab-separated qrels, and ranked lists as
TREC run files. Loads are total: any malformed line aborts with its line
number so partially-read collections never escape.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence


class FormatError(ValueError):
    """A file does not conform to its expected interchange format."""


@dataclass(frozen=True)
class Document:
    """One document of the target collection."""

    id: str
    title: str
    text: str

    @property
    def full_text(self) -> str:
        """Title-first concatenation used wherever a document text is needed."""
        return f"{self.title} {self.text}" if self.title else self.text


@dataclass(frozen=True)
class Query:
    id: str
    text: str


@dataclass(frozen=True)
class QrelEntry:
    """A graded relevance judgment for one (query, document) pair."""

    query_id: str
    doc_id: str
    grade: int


@dataclass
class RunList:
    """Ranked (doc_id, score) entries for one query.

    Entries are sorted by score descending, ties broken by doc_id
    ascending, with no duplicate doc_id.
    """

    query_id: str
    entries: list[tuple[str, float]] = field(default_factory=list)

    @classmethod
    def from_scores(cls, query_id: str, scored: Iterable[tuple[str, float]]) -> "RunList":
        """Build a RunList from unordered (doc_id, score) pairs."""
        entries = sorted(scored, key=lambda e: (-e[1], e[0]))
        run = cls(query_id=query_id, entries=entries)
        run.validate()
        return run

    def validate(self) -> None:
        seen: set[str] = set()
        prev: tuple[str, float] | None = None
        for doc_id, score in self.entries:
            if doc_id in seen:
                raise ValueError(f"duplicate doc_id {doc_id!r} in run for query {self.query_id!r}")
            seen.add(doc_id)
            if prev is not None:
                prev_id, prev_score = prev
                if score > prev_score or (score == prev_score and doc_id < prev_id):
                    raise ValueError(
                        f"run for query {self.query_id!r} not sorted at doc {doc_id!r}"
                    )
            prev = (doc_id, score)


def load_corpus(path: str | Path) -> list[Document]:
    """Load a JSONL corpus with ``_id``, ``title``, ``text`` per line."""
    docs: list[Document] = []
    seen: set[str] = set()
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            obj = _parse_json_line(path, lineno, line)
            doc_id = _require_str(obj, "_id", path, lineno)
            if doc_id in seen:
                raise FormatError(f"{path}:{lineno}: duplicate document id {doc_id!r}")
            seen.add(doc_id)
            text = _require_str(obj, "text", path, lineno, allow_empty=True)
            title = str(obj.get("title", "") or "")
            docs.append(Document(id=doc_id, title=title, text=text))
    return docs


def load_queries(path: str | Path) -> list[Query]:
    """Load a JSONL query set with ``_id`` and non-empty ``text`` per line."""
    queries: list[Query] = []
    seen: set[str] = set()
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            obj = _parse_json_line(path, lineno, line)
            query_id = _require_str(obj, "_id", path, lineno)
            if query_id in seen:
                raise FormatError(f"{path}:{lineno}: duplicate query id {query_id!r}")
            seen.add(query_id)
            text = _require_str(obj, "text", path, lineno)
            queries.append(Query(id=query_id, text=text))
    return queries


def write_corpus(docs: Iterable[Document], path: str | Path) -> None:
    """Write documents in the JSONL format read by :func:`load_corpus`."""
    with open(path, "w", encoding="utf-8") as f:
        for doc in docs:
            f.write(json.dumps({"_id": doc.id, "title": doc.title, "text": doc.text}) + "\n")


def write_queries(queries: Iterable[Query], path: str | Path) -> None:
    """Write queries in the JSONL format read by :func:`load_queries`."""
    with open(path, "w", encoding="utf-8") as f:
        for query in queries:
            f.write(json.dumps({"_id": query.id, "text": query.text}) + "\n")


def load_qrels(path: str | Path) -> list[QrelEntry]:
    """Load tab-separated ``query-id  corpus-id  score`` judgments.

    A single header line is skipped iff its third field is not an integer.
    """
    entries: list[QrelEntry] = []
    seen: set[tuple[str, str]] = set()
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise FormatError(f"{path}:{lineno}: expected 3 tab-separated fields, got {len(parts)}")
            query_id, doc_id, grade_str = parts
            if lineno == 1 and not _is_int(grade_str):
                continue  # header
            if not _is_int(grade_str):
                raise FormatError(f"{path}:{lineno}: non-integer grade {grade_str!r}")
            grade = int(grade_str)
            if grade < 0:
                raise FormatError(f"{path}:{lineno}: negative grade {grade}")
            key = (query_id, doc_id)
            if key in seen:
                raise FormatError(f"{path}:{lineno}: duplicate judgment for {key}")
            seen.add(key)
            entries.append(QrelEntry(query_id=query_id, doc_id=doc_id, grade=grade))
    return entries


def write_qrels(entries: Iterable[QrelEntry], path: str | Path) -> None:
    """Write qrels in the tab-separated format read by :func:`load_qrels`."""
    with open(path, "w", encoding="utf-8") as f:
        for e in entries:
            f.write(f"{e.query_id}\t{e.doc_id}\t{e.grade}\n")


def qrels_to_grades(entries: Iterable[QrelEntry]) -> dict[str, dict[str, int]]:
    """Group judgments as query_id -> {doc_id: grade}."""
    grades: dict[str, dict[str, int]] = {}
    for e in entries:
        grades.setdefault(e.query_id, {})[e.doc_id] = e.grade
    return grades


def write_run(runs: Sequence[RunList], tag: str, path: str | Path) -> None:
    """Write runs as TREC ``qid Q0 docid rank score tag`` lines, rank from 1."""
    with open(path, "w", encoding="utf-8") as f:
        for run in runs:
            run.validate()
            for rank, (doc_id, score) in enumerate(run.entries, 1):
                f.write(f"{run.query_id} Q0 {doc_id} {rank} {score:.6f} {tag}\n")


def read_run(path: str | Path) -> list[RunList]:
    """Read a TREC run file; inverse of :func:`write_run` up to 6-decimal scores."""
    runs: list[RunList] = []
    current: RunList | None = None
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != 6:
                raise FormatError(f"{path}:{lineno}: expected 6 fields, got {len(parts)}")
            query_id, _q0, doc_id, rank_str, score_str, _tag = parts
            try:
                rank = int(rank_str)
                score = float(score_str)
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: bad rank/score: {exc}") from exc
            if current is None or current.query_id != query_id:
                current = RunList(query_id=query_id)
                runs.append(current)
            if rank != len(current.entries) + 1:
                raise FormatError(f"{path}:{lineno}: rank {rank} out of sequence")
            current.entries.append((doc_id, score))
    return runs


def _parse_json_line(path: str | Path, lineno: int, line: str) -> dict:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise FormatError(f"{path}:{lineno}: expected a JSON object")
    return obj


def _require_str(obj: dict, key: str, path: str | Path, lineno: int, allow_empty: bool = False) -> str:
    value = obj.get(key)
    if not isinstance(value, str) or (not allow_empty and not value):
        raise FormatError(f"{path}:{lineno}: missing or empty {key!r} field")
    return value


def _is_int(s: str) -> bool:
    try:
        int(s)
    except ValueError:
        return False
    return True
