"""Hand-rolled reference implementations, written from the formulas alone.

These deliberately share no code with the package: the BM25 oracle scans
raw token lists with no index, and the NDCG oracle computes both DCGs by
direct summation. Test modules compare the real implementations against
these.
"""

import math
import re

_WORD = re.compile(r"[a-z0-9]+")


def oracle_tokenize(text: str) -> list[str]:
    return _WORD.findall(text.lower())


def oracle_bm25(query_text: str, doc_texts: dict[str, str], doc_id: str, k1: float, b: float) -> float:
    """Direct Σ idf(w)·tf/(k1·(1−b+b·l/l_avg)+tf) over distinct query terms."""
    tokens = {d: oracle_tokenize(t) for d, t in doc_texts.items()}
    n = len(tokens)
    avg_len = sum(len(ts) for ts in tokens.values()) / n
    doc = tokens[doc_id]
    score = 0.0
    for term in set(oracle_tokenize(query_text)):
        tf = doc.count(term)
        if tf == 0:
            continue
        df = sum(1 for ts in tokens.values() if term in ts)
        idf = math.log(1.0 + (n - df + 0.5) / (df + 0.5))
        score += idf * tf / (k1 * (1.0 - b + b * len(doc) / avg_len) + tf)
    return score


def oracle_ndcg(ranking: list[str], grades: dict[str, int], k: int) -> float:
    """DCG with gain 2^grade − 1 and log2(rank+1) discount, over the ideal DCG."""

    def dcg(gains: list[int]) -> float:
        return sum((2.0 ** g - 1.0) / math.log2(i + 2.0) for i, g in enumerate(gains[:k]))

    realized = dcg([grades.get(doc_id, 0) for doc_id in ranking])
    ideal = dcg(sorted(grades.values(), reverse=True))
    return realized / ideal if ideal > 0.0 else 0.0
