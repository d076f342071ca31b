"""Round-trip and validation tests for the corpus I/O layer."""

import pytest
from hypothesis import given, strategies as st

from adaptir.corpus import (
    Document,
    FormatError,
    QrelEntry,
    Query,
    RunList,
    load_corpus,
    load_qrels,
    load_queries,
    qrels_to_grades,
    read_run,
    write_corpus,
    write_qrels,
    write_queries,
    write_run,
)

ids = st.text(st.characters(whitelist_categories=("Lu", "Ll", "Nd"), whitelist_characters="-_."), min_size=1, max_size=12)
texts = st.text(min_size=1, max_size=60)


def test_full_text_concatenation():
    assert Document("d1", "Heart", "attacks hurt").full_text == "Heart attacks hurt"
    assert Document("d1", "", "attacks hurt").full_text == "attacks hurt"


@given(st.lists(st.tuples(ids, st.text(max_size=30), texts), max_size=20, unique_by=lambda t: t[0]))
def test_corpus_round_trip(tmp_path_factory, rows):
    path = tmp_path_factory.mktemp("corpus") / "corpus.jsonl"
    docs = [Document(i, title, text) for i, title, text in rows]
    write_corpus(docs, path)
    assert load_corpus(path) == docs


@given(st.lists(st.tuples(ids, texts), max_size=20, unique_by=lambda t: t[0]))
def test_queries_round_trip(tmp_path_factory, rows):
    path = tmp_path_factory.mktemp("queries") / "queries.jsonl"
    queries = [Query(i, text) for i, text in rows]
    write_queries(queries, path)
    assert load_queries(path) == queries


def test_corpus_missing_title_defaults_empty(tmp_path):
    path = tmp_path / "c.jsonl"
    path.write_text('{"_id": "d1", "text": "body"}\n')
    assert load_corpus(path) == [Document("d1", "", "body")]


def test_corpus_blank_lines_skipped(tmp_path):
    path = tmp_path / "c.jsonl"
    path.write_text('\n{"_id": "d1", "title": "", "text": "a"}\n\n')
    assert len(load_corpus(path)) == 1


@pytest.mark.parametrize(
    "line,fragment",
    [
        ("not json", "invalid JSON"),
        ("[1, 2]", "expected a JSON object"),
        ('{"title": "t", "text": "x"}', "'_id'"),
        ('{"_id": "", "text": "x"}', "'_id'"),
        ('{"_id": 3, "text": "x"}', "'_id'"),
        ('{"_id": "d1"}', "'text'"),
    ],
)
def test_corpus_format_errors_carry_line_numbers(tmp_path, line, fragment):
    path = tmp_path / "c.jsonl"
    path.write_text('{"_id": "d0", "title": "", "text": "ok"}\n' + line + "\n")
    with pytest.raises(FormatError, match=":2:") as exc:
        load_corpus(path)
    assert fragment in str(exc.value)


def test_corpus_duplicate_id_rejected(tmp_path):
    path = tmp_path / "c.jsonl"
    path.write_text('{"_id": "d1", "text": "a"}\n{"_id": "d1", "text": "b"}\n')
    with pytest.raises(FormatError, match="duplicate document id"):
        load_corpus(path)


def test_corpus_allows_empty_text_but_queries_do_not(tmp_path):
    cpath = tmp_path / "c.jsonl"
    cpath.write_text('{"_id": "d1", "text": ""}\n')
    assert load_corpus(cpath)[0].text == ""
    qpath = tmp_path / "q.jsonl"
    qpath.write_text('{"_id": "q1", "text": ""}\n')
    with pytest.raises(FormatError, match="'text'"):
        load_queries(qpath)


def test_queries_duplicate_id_rejected(tmp_path):
    path = tmp_path / "q.jsonl"
    path.write_text('{"_id": "q1", "text": "a"}\n{"_id": "q1", "text": "b"}\n')
    with pytest.raises(FormatError, match="duplicate query id"):
        load_queries(path)


@given(st.lists(st.tuples(ids, ids, st.integers(0, 3)), max_size=30, unique_by=lambda t: (t[0], t[1])))
def test_qrels_round_trip(tmp_path_factory, rows):
    path = tmp_path_factory.mktemp("qrels") / "qrels.tsv"
    entries = [QrelEntry(q, d, g) for q, d, g in rows]
    write_qrels(entries, path)
    assert load_qrels(path) == entries


def test_qrels_header_skipped_iff_third_field_non_integer(tmp_path):
    with_header = tmp_path / "a.tsv"
    with_header.write_text("query-id\tcorpus-id\tscore\nq1\td1\t2\n")
    assert load_qrels(with_header) == [QrelEntry("q1", "d1", 2)]

    headerless = tmp_path / "b.tsv"
    headerless.write_text("q1\td1\t2\nq2\td2\t0\n")
    assert load_qrels(headerless) == [QrelEntry("q1", "d1", 2), QrelEntry("q2", "d2", 0)]


def test_qrels_non_integer_grade_past_line_one_rejected(tmp_path):
    path = tmp_path / "q.tsv"
    path.write_text("q1\td1\t1\nq2\td2\toops\n")
    with pytest.raises(FormatError, match="non-integer grade"):
        load_qrels(path)


def test_qrels_field_count_and_grade_sign_checked(tmp_path):
    short = tmp_path / "short.tsv"
    short.write_text("q1\td1\n")
    with pytest.raises(FormatError, match="3 tab-separated fields"):
        load_qrels(short)
    negative = tmp_path / "neg.tsv"
    negative.write_text("q1\td1\t-1\n")
    with pytest.raises(FormatError, match="negative grade"):
        load_qrels(negative)


def test_qrels_duplicate_pair_rejected(tmp_path):
    path = tmp_path / "q.tsv"
    path.write_text("q1\td1\t1\nq1\td1\t2\n")
    with pytest.raises(FormatError, match="duplicate judgment"):
        load_qrels(path)


def test_qrels_to_grades_groups_by_query():
    entries = [QrelEntry("q1", "d1", 2), QrelEntry("q1", "d2", 0), QrelEntry("q2", "d1", 1)]
    assert qrels_to_grades(entries) == {"q1": {"d1": 2, "d2": 0}, "q2": {"d1": 1}}


def test_from_scores_sorts_desc_then_doc_id_asc():
    run = RunList.from_scores("q1", [("b", 1.0), ("a", 1.0), ("c", 2.0), ("d", 0.5)])
    assert run.entries == [("c", 2.0), ("a", 1.0), ("b", 1.0), ("d", 0.5)]


@given(st.lists(st.tuples(ids, st.floats(-100, 100)), max_size=20, unique_by=lambda t: t[0]))
def test_from_scores_always_validates(scored):
    run = RunList.from_scores("q", scored)
    run.validate()
    scores = [s for _, s in run.entries]
    assert scores == sorted(scores, reverse=True)


def test_validate_rejects_duplicates_and_misordering():
    with pytest.raises(ValueError, match="duplicate doc_id"):
        RunList("q", [("a", 2.0), ("a", 1.0)]).validate()
    with pytest.raises(ValueError, match="not sorted"):
        RunList("q", [("a", 1.0), ("b", 2.0)]).validate()
    with pytest.raises(ValueError, match="not sorted"):
        RunList("q", [("b", 1.0), ("a", 1.0)]).validate()


def test_write_run_format_and_round_trip(tmp_path):
    path = tmp_path / "run.trec"
    runs = [
        RunList("q1", [("d2", 1.5), ("d1", 0.25)]),
        RunList("q2", [("d3", 0.125)]),
    ]
    write_run(runs, "mytag", path)
    lines = path.read_text().splitlines()
    assert lines[0] == "q1 Q0 d2 1 1.500000 mytag"
    assert lines[2] == "q2 Q0 d3 1 0.125000 mytag"
    assert read_run(path) == runs  # tag is not part of the data


def test_write_run_validates_entries(tmp_path):
    with pytest.raises(ValueError, match="not sorted"):
        write_run([RunList("q1", [("a", 1.0), ("b", 2.0)])], "t", tmp_path / "r.trec")


def test_read_run_rejects_rank_gaps_and_bad_fields(tmp_path):
    gap = tmp_path / "gap.trec"
    gap.write_text("q1 Q0 d1 1 2.000000 t\nq1 Q0 d2 3 1.000000 t\n")
    with pytest.raises(FormatError, match="out of sequence"):
        read_run(gap)
    short = tmp_path / "short.trec"
    short.write_text("q1 Q0 d1 1 2.000000\n")
    with pytest.raises(FormatError, match="6 fields"):
        read_run(short)
    bad = tmp_path / "bad.trec"
    bad.write_text("q1 Q0 d1 one 2.000000 t\n")
    with pytest.raises(FormatError, match="bad rank/score"):
        read_run(bad)


def test_read_run_restarts_ranks_per_query(tmp_path):
    path = tmp_path / "r.trec"
    path.write_text("q1 Q0 d1 1 2.000000 t\nq2 Q0 d1 1 9.000000 t\nq2 Q0 d2 2 8.000000 t\n")
    runs = read_run(path)
    assert [r.query_id for r in runs] == ["q1", "q2"]
    assert runs[1].entries == [("d1", 9.0), ("d2", 8.0)]
