"""Writers and readers for the enriched output subsets (CSV with header, JSON Lines)."""
from __future__ import annotations

import csv
import json
import os
from contextlib import contextmanager
from pathlib import Path

from .records import CareerEntry, CareerYear, GeoEnrichment

AFFILIATIONS_GEO = "AffiliationsGeo.csv"
AUTHOR_CAREER = "AuthorCareer.jsonl"
AUTHOR_YEAR_LOCATION = "AuthorYearLocation.jsonl"
STOCKS = "StocksAnnual.csv"
FLOWS = "FlowsAnnual.csv"
COUNTRY_FLOWS = "CountryAnnualFlowsAggregated.csv"
EGO_NETWORKS = "AuthorEgoNetworks.jsonl"
HINDEX = "Authors_Hindex.csv"
ABSTRACTS = "AbstractsProcessed.jsonl"
FOS_LABELED = "FieldOfStudyLabeled.csv"
PAPER_FOS_LABELED = "PaperFieldsOfStudyLabeled.csv"

STOCK_COLUMNS = ("country", "year", "stock", "located_authors", "natives", "no_nationality")
FLOW_COLUMNS = ("year", "origin", "destination", "weight", "returners", "origin_natives", "destination_natives")
COUNTRY_FLOW_COLUMNS = ("year", "country", "total_in", "total_out")


def format_value(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


@contextmanager
def atomic_writer(path: Path):
    """Write to a temp file next to ``path`` and move it into place on success."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    try:
        with open(tmp, "w", encoding="utf-8", newline="") as fh:
            yield fh
        os.replace(tmp, path)
    finally:
        if tmp.exists():
            tmp.unlink()


def write_csv(path, header, rows) -> int:
    n = 0
    with atomic_writer(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([format_value(v) for v in row])
            n += 1
    return n


def dumps(obj) -> str:
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":"))


def write_jsonl(path, objects) -> int:
    n = 0
    with atomic_writer(path) as fh:
        for obj in objects:
            fh.write(dumps(obj))
            fh.write("\n")
            n += 1
    return n


def read_jsonl(path):
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                yield json.loads(line)


def read_csv(path):
    with open(path, encoding="utf-8", newline="") as fh:
        yield from csv.DictReader(fh)


def geo_rows(records):
    names = GeoEnrichment.field_names()
    for r in records:
        yield [getattr(r, name) for name in names]


def career_object(author_id, career_years) -> dict:
    return {
        "author_id": author_id,
        "career": {
            str(cy.year): [
                {"paper_id": e.paper_id, "affiliation_id": e.affiliation_id, "country_alpha2": e.country_alpha2}
                for e in cy.entries
            ]
            for cy in career_years
        },
    }


def career_years_from_object(obj) -> list:
    author = obj["author_id"]
    return [
        CareerYear(author, int(year), tuple(
            CareerEntry(e["paper_id"], e.get("affiliation_id"), e.get("country_alpha2")) for e in entries
        ))
        for year, entries in sorted(obj["career"].items(), key=lambda kv: int(kv[0]))
    ]


def location_object(author_id, locations, nationality) -> dict:
    return {
        "author_id": author_id,
        "career_nationality": nationality.country_alpha2 if nationality else None,
        "nationality_year": nationality.established_year if nationality else None,
        "locations": {str(loc.year): loc.country_alpha2 for loc in locations},
    }
