"""Author careers, annual locations, career nationality, stocks and flows.

An author's annual location is the modal country over that year's
affiliation entries; the career nationality is the country of the first
geolocated entry of the career. Stocks count authors located in a country
whose nationality differs from it. Flows link consecutive observed
locations that change country and are attributed to the arrival year.

Ties (modal country, first entry within a year) are broken by paper id
ascending: numeric ids compare as integers, others as strings after them.
"""
from __future__ import annotations

from collections import Counter, defaultdict
from itertools import groupby
from operator import attrgetter
from typing import Iterable, Iterator, Mapping, Optional

from .records import (
    AnnualLocation,
    AuthorshipTriple,
    CareerEntry,
    CareerNationality,
    CareerYear,
    FlowEdge,
    StockEntry,
)


def id_key(value):
    """Sort key putting numeric ids in numeric order before non-numeric ones."""
    if value is None:
        return (2, "")
    return (0, int(value), value) if value.isdigit() else (1, 0, value)


def _entry_key(entry):
    return (id_key(entry.paper_id), id_key(entry.affiliation_id))


def build_careers(
    joined_triples: Iterable[AuthorshipTriple],
    geo: Mapping[str, str],
    stats: Optional[Counter] = None,
) -> Iterator[CareerYear]:
    """Group year-joined triples into per-(author, year) career records.

    ``geo`` maps affiliation id to country alpha-2. Entries whose affiliation
    is missing or not geolocated keep an empty country. Output is ordered by
    author id, then year; entries by paper id.
    """
    stats = stats if stats is not None else Counter()
    careers = defaultdict(lambda: defaultdict(set))
    for t in joined_triples:
        if t.year is None:
            raise ValueError(f"triple without year: {t}")
        careers[t.author_id][t.year].add((t.paper_id, t.affiliation_id))
    for author in sorted(careers, key=id_key):
        years = careers[author]
        for year in sorted(years):
            entries = []
            for paper_id, aff in years[year]:
                country = geo.get(aff) if aff is not None else None
                entries.append(CareerEntry(paper_id, aff, country or None))
                stats["entries"] += 1
                if country:
                    stats["geolocated_entries"] += 1
            entries.sort(key=_entry_key)
            yield CareerYear(author, year, tuple(entries))
        del years


def annual_location(career_year: CareerYear) -> Optional[AnnualLocation]:
    """Most frequent entry country of the year; ties go to the country seen first by paper id."""
    counts = Counter()
    first_seen = {}
    for pos, entry in enumerate(sorted(career_year.entries, key=_entry_key)):
        if entry.country_alpha2:
            counts[entry.country_alpha2] += 1
            first_seen.setdefault(entry.country_alpha2, pos)
    if not counts:
        return None
    country = min(counts, key=lambda c: (-counts[c], first_seen[c]))
    return AnnualLocation(career_year.author_id, career_year.year, country)


def career_nationality(career_years: Iterable[CareerYear]) -> Optional[CareerNationality]:
    """Country of the first geolocated entry over the career (earliest year, then paper id)."""
    for cy in sorted(career_years, key=attrgetter("year")):
        for entry in sorted(cy.entries, key=_entry_key):
            if entry.country_alpha2:
                return CareerNationality(cy.author_id, entry.country_alpha2, cy.year)
    return None


def locate_authors(careers: Iterable[CareerYear]) -> Iterator[tuple]:
    """Yield ``(author_id, [AnnualLocation...], CareerNationality | None)`` per author.

    ``careers`` must be grouped by author (as produced by :func:`build_careers`).
    """
    for author, group in groupby(careers, key=attrgetter("author_id")):
        years = list(group)
        locations = [loc for loc in map(annual_location, years) if loc is not None]
        yield author, locations, career_nationality(years)


def _nationality_map(nationalities):
    if isinstance(nationalities, Mapping):
        return {
            a: (n.country_alpha2 if isinstance(n, CareerNationality) else n)
            for a, n in nationalities.items()
            if n
        }
    return {n.author_id: n.country_alpha2 for n in nationalities if n is not None}


def compute_stocks(annual_locations: Iterable[AnnualLocation], nationalities) -> list:
    """Per (country, year): located authors, and non-working-native migrants among them.

    Authors without a known nationality are located but never part of the
    stock; they are reported in ``no_nationality``.
    """
    nat = _nationality_map(nationalities)
    located = Counter()
    stock = Counter()
    natives = Counter()
    unknown = Counter()
    for loc in annual_locations:
        key = (loc.country_alpha2, loc.year)
        located[key] += 1
        home = nat.get(loc.author_id)
        if home is None:
            unknown[key] += 1
        elif home == loc.country_alpha2:
            natives[key] += 1
        else:
            stock[key] += 1
    return [
        StockEntry(country, year, stock[(country, year)], located[(country, year)],
                   natives[(country, year)], unknown[(country, year)])
        for country, year in sorted(located)
    ]


def author_movements(locations: Iterable[AnnualLocation], nationality: Optional[str] = None) -> list:
    """Movements of one author as ``(year, origin, destination, returner, origin_native, destination_native)``.

    Consecutive observed locations are compared; silent years in between do
    not create or break a movement.
    """
    ordered = sorted(locations, key=attrgetter("year"))
    moves = []
    visited = set()
    for prev, cur in zip(ordered, ordered[1:]):
        visited.add(prev.country_alpha2)
        if cur.country_alpha2 == prev.country_alpha2:
            continue
        moves.append((
            cur.year,
            prev.country_alpha2,
            cur.country_alpha2,
            cur.country_alpha2 in visited,
            nationality is not None and prev.country_alpha2 == nationality,
            nationality is not None and cur.country_alpha2 == nationality,
        ))
    return moves


def compute_flows(annual_locations: Iterable[AnnualLocation], nationalities) -> list:
    """Aggregate all authors' movements into weighted (year, origin, destination) edges."""
    nat = _nationality_map(nationalities)
    per_author = defaultdict(list)
    for loc in annual_locations:
        per_author[loc.author_id].append(loc)
    acc = defaultdict(lambda: [0, 0, 0, 0])
    for author, locs in per_author.items():
        for year, origin, dest, returner, o_native, d_native in author_movements(locs, nat.get(author)):
            edge = acc[(year, origin, dest)]
            edge[0] += 1
            edge[1] += returner
            edge[2] += o_native
            edge[3] += d_native
    return [FlowEdge(year, o, d, *acc[(year, o, d)]) for year, o, d in sorted(acc)]


def aggregate_country_flows(flows: Iterable[FlowEdge]) -> list:
    """``(year, country, total_in, total_out)`` rows from the edge list."""
    totals = defaultdict(lambda: [0, 0])
    for f in flows:
        totals[(f.year, f.destination_alpha2)][0] += f.weight
        totals[(f.year, f.origin_alpha2)][1] += f.weight
    return [(year, c, *totals[(year, c)]) for year, c in sorted(totals)]
