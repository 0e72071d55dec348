from collections import Counter, defaultdict
from itertools import combinations

from hypothesis import given, settings
from hypothesis import strategies as st

from scholar_enrich.egonet import build_ego_networks
from scholar_enrich.records import AuthorshipTriple


def _t(paper, author, year, aff=None):
    return AuthorshipTriple(paper, author, aff, year)


def _as_dict(nets):
    return {(n.ego, n.year): n.alters for n in nets}


def test_shared_papers_are_counted():
    triples = [_t("P1", "a1", 2000), _t("P1", "a2", 2000), _t("P2", "a1", 2000), _t("P2", "a2", 2000),
               _t("P3", "a1", 2001), _t("P3", "a3", 2001)]
    nets = _as_dict(build_ego_networks(triples))
    assert nets[("a1", 2000)] == {"a2": 2}
    assert nets[("a1", 2001)] == {"a3": 1}


def test_single_author_paper_gives_empty_ego():
    assert _as_dict(build_ego_networks([_t("P1", "a1", 2000)])) == {("a1", 2000): {}}


def test_three_author_clique():
    nets = _as_dict(build_ego_networks([_t("P1", a, 2000) for a in ("a1", "a2", "a3")]))
    assert nets == {("a1", 2000): {"a2": 1, "a3": 1}, ("a2", 2000): {"a1": 1, "a3": 1},
                    ("a3", 2000): {"a1": 1, "a2": 1}}


def test_multi_affiliation_rows_count_once():
    triples = [_t("P1", "a1", 2000, "F1"), _t("P1", "a1", 2000, "F2"), _t("P1", "a2", 2000, "F1")]
    assert _as_dict(build_ego_networks(triples))[("a1", 2000)] == {"a2": 1}


def test_hyperauthored_papers_skipped_and_counted():
    stats = Counter()
    triples = [_t("P1", f"a{i}", 2000) for i in range(5)] + [_t("P2", "a0", 2000), _t("P2", "a1", 2000)]
    nets = _as_dict(build_ego_networks(triples, max_authors=3, stats=stats))
    assert stats["hyperauthored_papers"] == 1
    assert nets == {("a0", 2000): {"a1": 1}, ("a1", 2000): {"a0": 1}}


def brute_force(triples):
    """O(n^2) pairwise enumeration over the distinct (paper, author, year) rows."""
    rows = sorted({(t.paper_id, t.author_id, t.year) for t in triples})
    egos = defaultdict(Counter)
    for p, a, y in rows:
        egos[(a, y)]
    for (p1, a1, y1), (p2, a2, y2) in combinations(rows, 2):
        if p1 == p2 and a1 != a2:
            egos[(a1, y1)][a2] += 1
            egos[(a2, y2)][a1] += 1
    return {k: dict(v) for k, v in egos.items()}


corpora = st.lists(
    st.tuples(st.integers(0, 40), st.integers(0, 25), st.sampled_from(["F1", "F2", None])),
    max_size=300,
)


@settings(max_examples=100, deadline=None)
@given(corpora)
def test_matches_brute_force(rows):
    triples = [_t(f"P{p}", f"a{a}", 2000 + p % 3, f) for p, a, f in rows]
    nets = list(build_ego_networks(triples, max_authors=None))
    got = _as_dict(nets)
    assert got == brute_force(triples)
    for (ego, year), alters in got.items():
        assert ego not in alters
        for b, w in alters.items():
            assert w >= 1 and got[(b, year)][ego] == w
    papers = defaultdict(set)
    for t in triples:
        papers[(t.paper_id, t.year)].add(t.author_id)
    per_year = Counter()
    for (p, y), authors in papers.items():
        per_year[y] += len(authors) * (len(authors) - 1)
    for y in per_year:
        assert sum(sum(a.values()) for (e, yy), a in got.items() if yy == y) == per_year[y]
    assert [n.year for n in nets] == sorted(n.year for n in nets)
