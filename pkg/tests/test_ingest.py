import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scholar_enrich.exceptions import InputError
from scholar_enrich.ingest import (
    DumpManifest,
    JoinStats,
    StreamStats,
    join_triples_with_years,
    parse_dump_stream,
)
from scholar_enrich.records import AuthorshipTriple, DocType, PaperRecord


def test_triple_line_maps_fields(write_file):
    m = DumpManifest.from_paths(triples=write_file("t.txt", "P1\tA1\tF1\n"))
    assert list(parse_dump_stream(m, "triples")) == [AuthorshipTriple("P1", "A1", "F1")]


def test_empty_file_is_empty_stream(write_file):
    stats = StreamStats("triples")
    m = DumpManifest.from_paths(triples=write_file("t.txt", ""))
    assert list(parse_dump_stream(m, "triples", stats=stats)) == []
    assert (stats.lines, stats.malformed) == (0, 0)


def test_short_line_is_malformed_and_stream_continues(write_file):
    events, stats = [], StreamStats("triples")
    m = DumpManifest.from_paths(triples=write_file("t.txt", "P1\tA1\tF1\nP2\tA2\nP3\tA3\tF3\n"))
    out = list(parse_dump_stream(m, "triples", on_malformed=events.append, stats=stats))
    assert [t.paper_id for t in out] == ["P1", "P3"]
    assert stats.malformed == 1
    assert len(events) == 1 and events[0].lineno == 2


def test_skip_malformed_still_counts(write_file):
    events, stats = [], StreamStats("triples")
    m = DumpManifest.from_paths(triples=write_file("t.txt", "P1\tA1\nP2\tA2\tF2\n"))
    out = list(parse_dump_stream(m, "triples", skip_malformed=True, on_malformed=events.append, stats=stats))
    assert len(out) == 1 and stats.malformed == 1 and events == []


def test_missing_file_is_fatal(tmp_path):
    m = DumpManifest.from_paths(papers=tmp_path / "nope.txt")
    with pytest.raises(InputError):
        list(parse_dump_stream(m, "papers"))


def test_paper_fields_and_bad_year(write_file):
    stats = StreamStats("papers")
    m = DumpManifest.from_paths(papers=write_file("p.txt", "1\t2005\tJournal\t3\t4\t\n2\t1700\tJournal\t0\t0\t\n3\t2001\tWeird\t-1\t0\t\n"))
    out = list(parse_dump_stream(m, "papers", stats=stats))
    assert out == [PaperRecord("1", 2005, DocType.JOURNAL, 3, 4, None)]
    assert stats.malformed == 2


def test_invalid_utf8_is_replaced_and_counted(write_file):
    stats = StreamStats("abstracts")
    m = DumpManifest.from_paths(abstracts=write_file("a.txt", b"1\tcaf\xe9 au lait\n", mode="wb"))
    rows = list(parse_dump_stream(m, "abstracts", stats=stats))
    assert rows[0]["text"] == "caf� au lait"
    assert stats.decode_errors == 1


def test_abstract_text_keeps_embedded_tabs(write_file):
    m = DumpManifest.from_paths(abstracts=write_file("a.txt", "1\tone\ttwo\n"))
    assert list(parse_dump_stream(m, "abstracts")) == [{"paper_id": "1", "text": "one\ttwo"}]


def test_manifest_file_options(write_file, tmp_path):
    write_file("t.csv", "paper,author,aff,seq\nP1,A1,F1,1\n")
    manifest = write_file("m.txt", "triples = t.csv\ntriples.columns = paper_id, author_id, affiliation_id, seq\n"
                          "triples.delimiter = comma\ntriples.header = true\n")
    m = DumpManifest.load(manifest)
    assert m.spec("triples").path == tmp_path / "t.csv"
    with pytest.raises(InputError, match="header lacks"):
        list(parse_dump_stream(m, "triples"))


def test_enriched_csv_mode_reads_header(write_file):
    m = DumpManifest().add("stocks", write_file("s.csv", "country,year,stock\nFR,2010,3\n"))
    assert list(parse_dump_stream(m, "stocks")) == [{"country": "FR", "year": "2010", "stock": "3"}]


def _papers(*rows):
    return [PaperRecord(pid, year) for pid, year in rows]


def test_join_fills_year():
    out = list(join_triples_with_years([AuthorshipTriple("P1", "A1", "F1")], _papers(("P1", 2005))))
    assert out == [AuthorshipTriple("P1", "A1", "F1", 2005)]


def test_join_rejects_unknown_paper():
    rejects, stats = [], JoinStats()
    out = list(join_triples_with_years([AuthorshipTriple("P9", "A1", "F1")], _papers(("P1", 2005)),
                                       on_reject=rejects.append, stats=stats))
    assert out == [] and stats.rejected == 1
    assert rejects[0].reason == "unknown paper"


def test_join_three_triples_two_papers_keeps_order():
    triples = [AuthorshipTriple("P2", "A1"), AuthorshipTriple("P1", "A1"), AuthorshipTriple("P2", "A2")]
    out = list(join_triples_with_years(triples, _papers(("P1", 2001), ("P2", 2002))))
    assert [(t.paper_id, t.author_id, t.year) for t in out] == [("P2", "A1", 2002), ("P1", "A1", 2001), ("P2", "A2", 2002)]


def test_join_paper_without_year_is_rejected():
    rejects = []
    out = list(join_triples_with_years([AuthorshipTriple("P1", "A1")], _papers(("P1", None)), on_reject=rejects.append))
    assert out == [] and rejects[0].reason == "paper has no year"


ids = st.text(alphabet="abc123", min_size=1, max_size=3)


@settings(max_examples=60, deadline=None)
@given(
    papers=st.lists(st.tuples(ids, st.one_of(st.none(), st.integers(1990, 2020))), max_size=30),
    triples=st.lists(st.tuples(ids, ids), max_size=60),
    budget=st.integers(160, 2000),
)
def test_spill_join_matches_in_memory_join(papers, triples, budget, tmp_path_factory):
    papers = _papers(*papers)
    triples = [AuthorshipTriple(p, a) for p, a in triples]
    mem_rejects, spill_rejects = [], []
    mem_stats, spill_stats = JoinStats(), JoinStats()
    expected = list(join_triples_with_years(triples, papers, on_reject=mem_rejects.append, stats=mem_stats))
    got = list(join_triples_with_years(triples, papers, memory_budget=budget, partitions=4,
                                       on_reject=spill_rejects.append, stats=spill_stats,
                                       tmpdir=tmp_path_factory.mktemp("spill")))
    assert got == expected
    assert sorted(map(repr, spill_rejects)) == sorted(map(repr, mem_rejects))
    # lossless modulo rejects
    assert spill_stats.joined + spill_stats.rejected == len(triples)


def test_spill_join_is_used_and_deterministic(tmp_path):
    rng = random.Random(5)
    papers = _papers(*[(str(i), 1990 + i % 30) for i in range(500)])
    triples = [AuthorshipTriple(str(rng.randrange(600)), str(rng.randrange(50))) for _ in range(2000)]
    stats = JoinStats()
    a = list(join_triples_with_years(triples, papers, memory_budget=160 * 50, stats=stats, tmpdir=tmp_path))
    b = list(join_triples_with_years(triples, papers, memory_budget=160 * 50, tmpdir=tmp_path))
    assert stats.spilled and a == b
    assert a == list(join_triples_with_years(triples, papers))
    assert list(tmp_path.iterdir()) == []
