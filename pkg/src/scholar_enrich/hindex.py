"""h-index by three independent algorithms, cross-checked."""
from __future__ import annotations

from collections import defaultdict
from typing import Iterable, Mapping

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from ._validation import check_citations
from .exceptions import ConsistencyError, InputError


def h_index_sorted(citations) -> int:
    """Sort descending and take the last 1-based rank whose count reaches it."""
    ranked = sorted(check_citations(citations), reverse=True)
    h = 0
    for i, c in enumerate(ranked, 1):
        if c >= i:
            h = i
        else:
            break
    return h


def h_index_definition(citations) -> int:
    """Search candidate h from len(citations) down to 0, straight from the definition."""
    values = check_citations(citations)
    for h in range(len(values), 0, -1):
        if sum(1 for c in values if c >= h) >= h:
            return h
    return 0


def h_index_counting(citations) -> int:
    """Bucket counts clamped at n, then scan suffix sums from the top; O(n)."""
    values = check_citations(citations)
    n = len(values)
    buckets = [0] * (n + 1)
    for c in values:
        buckets[min(c, n)] += 1
    at_least = 0
    for k in range(n, 0, -1):
        at_least += buckets[k]
        if at_least >= k:
            return k
    return 0


METHODS = {
    "sorted": h_index_sorted,
    "definition": h_index_definition,
    "counting": h_index_counting,
}


def h_index_checked(citations) -> int:
    """Run all three methods and return their common value.

    Raises :class:`ConsistencyError` if they disagree, which would mean a bug.
    """
    values = check_citations(citations)
    results = {name: fn(values) for name, fn in METHODS.items()}
    if len(set(results.values())) != 1:
        raise ConsistencyError(f"h-index methods disagree on {values!r}: {results}")
    return results["sorted"]


class HIndexTransformer(TransformerMixin, BaseEstimator):
    """Map citation arrays to h-indexes.

    ``method`` is one of ``"checked"`` (default), ``"sorted"``,
    ``"definition"`` or ``"counting"``. Stateless; ``fit`` only validates.
    """

    def __init__(self, method="checked"):
        self.method = method

    def fit(self, X=None, y=None):
        if self.method != "checked" and self.method not in METHODS:
            raise InputError(f"unknown h-index method {self.method!r}")
        self.fitted_ = True
        return self

    def transform(self, X):
        if not hasattr(self, "fitted_"):
            self.fit()
        fn = h_index_checked if self.method == "checked" else METHODS[self.method]
        return np.array([fn(list(c)) for c in X], dtype=np.int64)


def author_citations(joined_triples: Iterable, citation_counts: Mapping[str, int]) -> dict:
    """Per-author citation arrays, one entry per distinct paper.

    Papers missing from ``citation_counts`` count as 0 citations.
    """
    papers = defaultdict(set)
    for t in joined_triples:
        papers[t.author_id].add(t.paper_id)
    return {
        author: [citation_counts.get(p, 0) for p in sorted(pids)]
        for author, pids in papers.items()
    }


def author_h_indexes(joined_triples, citation_counts, authors: Iterable[str] = ()) -> dict:
    """h-index per author; ids listed in ``authors`` without papers get 0."""
    arrays = author_citations(joined_triples, citation_counts)
    result = {a: 0 for a in authors}
    for author, cites in arrays.items():
        result[author] = h_index_checked(cites)
    return result
