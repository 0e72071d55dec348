"""Annual co-authorship ego networks."""
from __future__ import annotations

from collections import Counter, defaultdict
from itertools import combinations
from typing import Iterable, Iterator, Optional

from .mobility import id_key
from .records import AuthorshipTriple, EgoNetwork

DEFAULT_MAX_AUTHORS = 500


def build_ego_networks(
    joined_triples: Iterable[AuthorshipTriple],
    *,
    max_authors: Optional[int] = DEFAULT_MAX_AUTHORS,
    stats: Optional[Counter] = None,
) -> Iterator[EgoNetwork]:
    """Yield one ego network per (author, year), ordered by year then ego.

    An alter's weight is the number of distinct papers the ego shared with it
    that year. Rows repeating a (paper, author) pair under several
    affiliations count once. Papers with more than ``max_authors`` authors
    are skipped and counted as ``hyperauthored_papers``.
    """
    stats = stats if stats is not None else Counter()
    papers = {}
    for t in joined_triples:
        entry = papers.get(t.paper_id)
        if entry is None:
            papers[t.paper_id] = entry = (t.year, set())
        entry[1].add(t.author_id)

    by_year = defaultdict(lambda: defaultdict(Counter))
    for paper_id, (year, authors) in papers.items():
        if max_authors is not None and len(authors) > max_authors:
            stats["hyperauthored_papers"] += 1
            continue
        egos = by_year[year]
        for a in authors:
            egos[a]  # single-author papers still give the author an (empty) network
        for a, b in combinations(sorted(authors), 2):
            egos[a][b] += 1
            egos[b][a] += 1
        stats["papers"] += 1

    for year in sorted(by_year):
        egos = by_year[year]
        for ego in sorted(egos, key=id_key):
            alters = egos[ego]
            yield EgoNetwork(ego, year, {b: alters[b] for b in sorted(alters, key=id_key)})
