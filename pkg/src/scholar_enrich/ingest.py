"""Streaming readers for raw dump subsets and the paper-year join.

Raw dumps are headerless, tab-separated, one record per line. Enriched
outputs of this package are comma-separated with a header row; both are read
through :func:`parse_dump_stream` depending on the manifest entry.
"""
from __future__ import annotations

import csv
import heapq
import logging
import os
import shutil
import tempfile
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Iterator, Optional

from .exceptions import InputError
from .records import (
    AffiliationRecord,
    AuthorRecord,
    AuthorshipTriple,
    DocType,
    PaperRecord,
)

logger = logging.getLogger(__name__)

csv.field_size_limit(1 << 30)

# Column layout of each subset when the manifest does not override it.
DEFAULT_COLUMNS = {
    "papers": ("paper_id", "year", "doc_type", "citation_count", "reference_count", "venue_id"),
    "authors": ("author_id", "display_name", "last_known_affiliation", "paper_count", "citation_count"),
    "affiliations": ("affiliation_id", "name", "latitude", "longitude", "wiki_url"),
    "triples": ("paper_id", "author_id", "affiliation_id"),
    "fields_of_study": ("fos_id", "name", "level"),
    "fos_children": ("parent_id", "child_id"),
    "paper_fos": ("paper_id", "fos_id"),
    "abstracts": ("paper_id", "text"),
    "infobox": ("affiliation_id", "wikitext"),
}

# Subsets whose last column is free text that may itself contain the delimiter.
_TRAILING_TEXT = {"abstracts", "infobox"}

# Files referenced by the manifest that are not record streams.
RESOURCE_KEYS = {"gazetteer", "countries", "country_aliases", "territories"}

YEAR_RANGE = (1800, 2100)

MAX_LOGGED_MALFORMED = 20


@dataclass(frozen=True)
class SubsetSpec:
    path: Path
    columns: tuple
    delimiter: str = "\t"
    header: bool = False


@dataclass
class DumpManifest:
    """Maps subset names to files and their column layout.

    The manifest file is a plain ``key = value`` listing::

        papers = Papers.txt
        triples = PaperAuthorAffiliations.txt
        triples.columns = paper_id, author_id, affiliation_id, sequence
        gazetteer = cities.csv

    Relative paths resolve against the manifest's directory. Optional
    ``<subset>.columns``, ``<subset>.delimiter`` (``tab``/``comma``/literal)
    and ``<subset>.header`` (true/false) override the defaults.
    """

    subsets: dict = field(default_factory=dict)
    resources: dict = field(default_factory=dict)
    base_dir: Path = Path(".")

    @classmethod
    def load(cls, path) -> "DumpManifest":
        path = Path(path)
        if not path.is_file():
            raise InputError(f"manifest not found: {path}")
        base = path.parent
        entries, options = {}, {}
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise InputError(f"{path}:{lineno}: expected 'key = value'")
                key, value = (part.strip() for part in line.split("=", 1))
                if "." in key:
                    name, opt = key.split(".", 1)
                    options.setdefault(name, {})[opt] = value
                else:
                    entries[key] = value
        manifest = cls(base_dir=base)
        for name, value in entries.items():
            file_path = Path(value)
            if not file_path.is_absolute():
                file_path = base / file_path
            if name in RESOURCE_KEYS:
                manifest.resources[name] = file_path
                continue
            manifest.subsets[name] = _subset_spec(name, file_path, options.get(name, {}))
        unknown = set(options) - set(entries)
        if unknown:
            raise InputError(f"options given for unlisted subsets: {sorted(unknown)}")
        return manifest

    @classmethod
    def from_paths(cls, **paths) -> "DumpManifest":
        """Build a manifest in code with default column layouts."""
        manifest = cls()
        for name, value in paths.items():
            if name in RESOURCE_KEYS:
                manifest.resources[name] = Path(value)
            else:
                manifest.subsets[name] = _subset_spec(name, Path(value), {})
        return manifest

    def add(self, name, path, *, columns=None, delimiter=",", header=True) -> "DumpManifest":
        """Register a subset, by default an enriched CSV with a header row."""
        cols = tuple(columns) if columns else DEFAULT_COLUMNS.get(name, ())
        if not cols and not header:
            raise InputError(f"no column schema for subset '{name}'")
        self.subsets[name] = SubsetSpec(Path(path), cols, delimiter, header)
        return self

    def __contains__(self, name):
        return name in self.subsets or name in self.resources

    def spec(self, name) -> SubsetSpec:
        try:
            return self.subsets[name]
        except KeyError:
            raise InputError(f"manifest has no '{name}' subset") from None

    def resource(self, name, default=None):
        return self.resources.get(name, default)


def _subset_spec(name, path, opts):
    columns = opts.get("columns")
    if columns:
        columns = tuple(c.strip() for c in columns.split(",") if c.strip())
    else:
        columns = DEFAULT_COLUMNS.get(name)
    header = opts.get("header", "false").strip().lower() in {"1", "true", "yes"}
    if columns is None and not header:
        raise InputError(f"no column schema for subset '{name}'; set {name}.columns")
    delim = opts.get("delimiter", "tab")
    delim = {"tab": "\t", "\\t": "\t", "comma": ","}.get(delim, delim)
    return SubsetSpec(path=path, columns=columns or (), delimiter=delim, header=header)


@dataclass
class StreamStats:
    """Counters for one parsed stream; ``lines == records + malformed``."""

    subset: str
    lines: int = 0
    records: int = 0
    malformed: int = 0
    decode_errors: int = 0


@dataclass(frozen=True)
class MalformedLine:
    subset: str
    lineno: int
    reason: str
    raw: str


def _decoded_lines(path, stats):
    with open(path, "rb") as fh:
        for raw in fh:
            try:
                yield raw.decode("utf-8")
            except UnicodeDecodeError:
                stats.decode_errors += 1
                yield raw.decode("utf-8", errors="replace")


def _opt(value):
    value = value.strip()
    return value or None


def _count(value):
    value = value.strip()
    if not value:
        return 0
    n = int(value)
    if n < 0:
        raise ValueError(f"negative count {n}")
    return n


def _year(value):
    value = value.strip()
    if not value:
        return None
    year = int(value)
    if not YEAR_RANGE[0] <= year <= YEAR_RANGE[1]:
        raise ValueError(f"year {year} outside {YEAR_RANGE}")
    return year


def _float(value):
    value = value.strip()
    return float(value) if value else None


def _required(value, name):
    value = value.strip()
    if not value:
        raise ValueError(f"empty {name}")
    return value


def _paper(row):
    return PaperRecord(
        paper_id=_required(row["paper_id"], "paper_id"),
        year=_year(row.get("year", "")),
        doc_type=DocType.parse(row.get("doc_type", "")),
        citation_count=_count(row.get("citation_count", "")),
        reference_count=_count(row.get("reference_count", "")),
        venue_id=_opt(row.get("venue_id", "")),
    )


def _author(row):
    return AuthorRecord(
        author_id=_required(row["author_id"], "author_id"),
        display_name=row.get("display_name", "").strip(),
        last_known_affiliation=_opt(row.get("last_known_affiliation", "")),
        paper_count=_count(row.get("paper_count", "")),
        citation_count=_count(row.get("citation_count", "")),
    )


def _affiliation(row):
    lat, lon = _float(row.get("latitude", "")), _float(row.get("longitude", ""))
    if (lat is None) != (lon is None):
        raise ValueError("only one of latitude/longitude given")
    if lat is not None and not (-90 <= lat <= 90 and -180 <= lon <= 180):
        raise ValueError(f"coordinates out of range ({lat}, {lon})")
    return AffiliationRecord(
        affiliation_id=_required(row["affiliation_id"], "affiliation_id"),
        name=row.get("name", "").strip(),
        latitude=lat,
        longitude=lon,
        wiki_url=_opt(row.get("wiki_url", "")),
    )


def _triple(row):
    year = row.get("year")
    return AuthorshipTriple(
        paper_id=_required(row["paper_id"], "paper_id"),
        author_id=_required(row["author_id"], "author_id"),
        affiliation_id=_opt(row.get("affiliation_id", "")),
        year=_year(year) if year is not None else None,
    )


def _plain_row(row):
    return row


RECORD_BUILDERS = {
    "papers": _paper,
    "authors": _author,
    "affiliations": _affiliation,
    "triples": _triple,
}


def parse_dump_stream(
    manifest: DumpManifest,
    subset: str,
    *,
    skip_malformed: bool = False,
    on_malformed: Optional[Callable[[MalformedLine], None]] = None,
    stats: Optional[StreamStats] = None,
) -> Iterator:
    """Yield typed records of ``subset`` in file order.

    Known subsets (papers, authors, affiliations, triples) yield record
    dataclasses; the others yield ``dict`` rows keyed by column name.

    A line whose arity does not match the schema, or whose fields fail type
    conversion, is a malformed-line event: it is counted in ``stats``, passed
    to ``on_malformed`` and logged, and the stream continues. With
    ``skip_malformed`` such lines are only counted.
    """
    spec = manifest.spec(subset)
    if not spec.path.is_file():
        raise InputError(f"{subset}: file not found: {spec.path}")
    if stats is None:
        stats = StreamStats(subset)
    build = RECORD_BUILDERS.get(subset, _plain_row)
    trailing = subset in _TRAILING_TEXT
    quoting = csv.QUOTE_MINIMAL if spec.delimiter == "," else csv.QUOTE_NONE
    reader = csv.reader(_decoded_lines(spec.path, stats), delimiter=spec.delimiter, quoting=quoting)

    columns = spec.columns
    if spec.header:
        try:
            header = [c.strip() for c in next(reader)]
        except StopIteration:
            return
        if columns:
            missing = [c for c in columns if c not in header]
            if missing:
                raise InputError(f"{subset}: header lacks columns {missing}")
        columns = tuple(header)
    arity = len(columns)
    logged = 0

    def malformed(lineno, reason, fields):
        nonlocal logged
        stats.malformed += 1
        if skip_malformed:
            return
        event = MalformedLine(subset, lineno, reason, spec.delimiter.join(fields))
        if on_malformed is not None:
            on_malformed(event)
        if logged < MAX_LOGGED_MALFORMED:
            logger.warning("%s:%d: malformed line (%s)", spec.path.name, lineno, reason)
            logged += 1

    for fields in reader:
        lineno = reader.line_num
        if not fields or fields == [""]:
            continue  # blank line
        stats.lines += 1
        if len(fields) > arity and trailing:
            fields = fields[: arity - 1] + [spec.delimiter.join(fields[arity - 1 :])]
        if len(fields) != arity:
            malformed(lineno, f"expected {arity} fields, got {len(fields)}", fields)
            continue
        try:
            record = build(dict(zip(columns, fields)))
        except (ValueError, KeyError) as exc:
            malformed(lineno, str(exc), fields)
            continue
        stats.records += 1
        yield record


# ---------------------------------------------------------------------------
# paper-year join


# Rough resident size of one paper_id -> year dict entry, used against the budget.
INDEX_ENTRY_BYTES = 160
SPILL_PARTITIONS = 32


@dataclass
class JoinStats:
    triples_in: int = 0
    joined: int = 0
    rejected: int = 0
    papers_indexed: int = 0
    duplicate_papers: int = 0
    spilled: bool = False
    partitions: int = 1


@dataclass(frozen=True)
class RejectedTriple:
    triple: AuthorshipTriple
    reason: str


def _partition(key, n):
    return zlib.crc32(key.encode("utf-8")) % n


def join_triples_with_years(
    triples: Iterable[AuthorshipTriple],
    papers: Iterable[PaperRecord],
    *,
    memory_budget: Optional[int] = None,
    on_reject: Optional[Callable[[RejectedTriple], None]] = None,
    stats: Optional[JoinStats] = None,
    tmpdir=None,
    partitions: int = SPILL_PARTITIONS,
) -> Iterator[AuthorshipTriple]:
    """Attach the publication year of each triple's paper.

    Output preserves the input order of ``triples``. Triples whose paper is
    unknown or has no year go to ``on_reject`` instead. When the paper index
    would exceed ``memory_budget`` bytes, papers and triples are hash
    partitioned to disk, each partition is joined on its own, and the
    per-partition outputs are merged back by input sequence number.
    """
    if stats is None:
        stats = JoinStats()
    limit = None if memory_budget is None else max(1, memory_budget // INDEX_ENTRY_BYTES)

    index = {}
    papers = iter(papers)
    for paper in papers:
        if paper.paper_id in index:
            stats.duplicate_papers += 1
            continue
        index[paper.paper_id] = paper.year
        if limit is not None and len(index) > limit:
            yield from _spill_join(index, papers, triples, stats, on_reject, tmpdir, partitions)
            return
    stats.papers_indexed = len(index)

    for triple in triples:
        stats.triples_in += 1
        year = index.get(triple.paper_id, _MISSING)
        if year is _MISSING or year is None:
            stats.rejected += 1
            if on_reject is not None:
                reason = "unknown paper" if year is _MISSING else "paper has no year"
                on_reject(RejectedTriple(triple, reason))
            continue
        stats.joined += 1
        yield AuthorshipTriple(triple.paper_id, triple.author_id, triple.affiliation_id, year)


_MISSING = object()


def _spill_join(index, papers, triples, stats, on_reject, tmpdir, n):
    stats.spilled = True
    stats.partitions = n
    workdir = tempfile.mkdtemp(prefix="join-spill-", dir=tmpdir)
    try:
        paper_files = [open(os.path.join(workdir, f"papers.{i}"), "w", encoding="utf-8") for i in range(n)]

        def spill_paper(pid, year):
            paper_files[_partition(pid, n)].write(f"{pid}\t{'' if year is None else year}\n")

        for pid, year in index.items():
            spill_paper(pid, year)
        index.clear()
        for paper in papers:
            spill_paper(paper.paper_id, paper.year)
        for fh in paper_files:
            fh.close()

        triple_files = [open(os.path.join(workdir, f"triples.{i}"), "w", encoding="utf-8") for i in range(n)]
        for seq, t in enumerate(triples):
            stats.triples_in += 1
            triple_files[_partition(t.paper_id, n)].write(
                f"{seq}\t{t.paper_id}\t{t.author_id}\t{t.affiliation_id or ''}\n"
            )
        for fh in triple_files:
            fh.close()

        out_paths = []
        for i in range(n):
            part = {}
            with open(os.path.join(workdir, f"papers.{i}"), encoding="utf-8") as fh:
                for line in fh:
                    pid, year = line.rstrip("\n").split("\t")
                    if pid in part:
                        stats.duplicate_papers += 1
                        continue
                    part[pid] = int(year) if year else None
            stats.papers_indexed += len(part)
            out_path = os.path.join(workdir, f"joined.{i}")
            with open(os.path.join(workdir, f"triples.{i}"), encoding="utf-8") as src, open(
                out_path, "w", encoding="utf-8"
            ) as dst:
                for line in src:
                    seq, pid, aid, aff = line.rstrip("\n").split("\t")
                    year = part.get(pid, _MISSING)
                    if year is _MISSING:
                        dst.write(f"{seq}\tu\t{pid}\t{aid}\t{aff}\t\n")
                    elif year is None:
                        dst.write(f"{seq}\tn\t{pid}\t{aid}\t{aff}\t\n")
                    else:
                        dst.write(f"{seq}\tj\t{pid}\t{aid}\t{aff}\t{year}\n")
            out_paths.append(out_path)

        handles = [open(p, encoding="utf-8") for p in out_paths]
        try:
            keyed = [((int(line.split("\t", 1)[0]), line) for line in fh) for fh in handles]
            for _, line in heapq.merge(*keyed):
                _, kind, pid, aid, aff, year = line.rstrip("\n").split("\t")
                if kind == "j":
                    stats.joined += 1
                    yield AuthorshipTriple(pid, aid, aff or None, int(year))
                else:
                    stats.rejected += 1
                    if on_reject is not None:
                        reason = "unknown paper" if kind == "u" else "paper has no year"
                        on_reject(RejectedTriple(AuthorshipTriple(pid, aid, aff or None), reason))
        finally:
            for fh in handles:
                fh.close()
    finally:
        shutil.rmtree(workdir, ignore_errors=True)
