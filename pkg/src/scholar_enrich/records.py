"""Immutable record types passed between pipeline stages."""
from __future__ import annotations

from dataclasses import dataclass, field, fields
from enum import Enum
from typing import Optional


class DocType(str, Enum):
    JOURNAL = "journal"
    PATENT = "patent"
    CONFERENCE = "conference"
    BOOK = "book"
    BOOK_CHAPTER = "book_chapter"
    NONE = "none"

    @classmethod
    def parse(cls, raw: str) -> "DocType":
        key = raw.strip().casefold().replace(" ", "").replace("_", "")
        return _DOC_TYPES.get(key, cls.NONE)


_DOC_TYPES = {
    "journal": DocType.JOURNAL,
    "patent": DocType.PATENT,
    "conference": DocType.CONFERENCE,
    "book": DocType.BOOK,
    "bookchapter": DocType.BOOK_CHAPTER,
}


@dataclass(frozen=True, slots=True)
class PaperRecord:
    paper_id: str
    year: Optional[int]
    doc_type: DocType = DocType.NONE
    citation_count: int = 0
    reference_count: int = 0
    venue_id: Optional[str] = None


@dataclass(frozen=True, slots=True)
class AuthorRecord:
    author_id: str
    display_name: str = ""
    last_known_affiliation: Optional[str] = None
    paper_count: int = 0
    citation_count: int = 0


@dataclass(frozen=True, slots=True)
class AuthorshipTriple:
    paper_id: str
    author_id: str
    affiliation_id: Optional[str] = None
    year: Optional[int] = None


@dataclass(frozen=True, slots=True)
class AffiliationRecord:
    affiliation_id: str
    name: str = ""
    latitude: Optional[float] = None
    longitude: Optional[float] = None
    wiki_url: Optional[str] = None


@dataclass(frozen=True, slots=True)
class GazetteerEntry:
    city_name: str
    latitude: float
    longitude: float
    country_alpha2: str
    admin1: str = ""
    population: int = 0
    alt_names: tuple = ()


@dataclass(frozen=True, slots=True)
class CountryRecord:
    alpha2: str
    alpha3: str
    common_name: str
    official_name: str


@dataclass(frozen=True)
class GeoEnrichment:
    """Standardised location and institutional metadata for one affiliation.

    ``latitude``/``longitude`` are the affiliation's own coordinates as given
    in the input; ``city_latitude``/``city_longitude`` locate the matched city
    and are only set together with ``city``.
    """

    affiliation_id: str
    latitude: Optional[float] = None
    longitude: Optional[float] = None
    city: Optional[str] = None
    city_latitude: Optional[float] = None
    city_longitude: Optional[float] = None
    state: Optional[str] = None
    postcode: Optional[str] = None
    country_alpha2: Optional[str] = None
    country_alpha2_secondary: Optional[str] = None
    country_alpha3: Optional[str] = None
    country_official_name: Optional[str] = None
    country_common_name: Optional[str] = None
    foundation_date: Optional[str] = None
    foundation_date_raw: Optional[str] = None
    entity_type: Optional[str] = None
    acronym: Optional[str] = None
    homepage: Optional[str] = None
    provenance: Optional[str] = None

    @classmethod
    def field_names(cls):
        return [f.name for f in fields(cls)]


@dataclass(frozen=True, slots=True)
class CareerEntry:
    paper_id: str
    affiliation_id: Optional[str]
    country_alpha2: Optional[str]


@dataclass(frozen=True, slots=True)
class CareerYear:
    author_id: str
    year: int
    entries: tuple  # of CareerEntry, sorted by paper id


@dataclass(frozen=True, slots=True)
class AnnualLocation:
    author_id: str
    year: int
    country_alpha2: str


@dataclass(frozen=True, slots=True)
class CareerNationality:
    author_id: str
    country_alpha2: str
    established_year: int


@dataclass(frozen=True, slots=True)
class StockEntry:
    country_alpha2: str
    year: int
    stock: int
    located_authors: int
    natives: int = 0
    no_nationality: int = 0


@dataclass(frozen=True, slots=True)
class FlowEdge:
    year: int
    origin_alpha2: str
    destination_alpha2: str
    weight: int
    returners: int = 0
    origin_natives: int = 0
    destination_natives: int = 0


@dataclass(frozen=True, slots=True)
class EgoNetwork:
    ego: str
    year: int
    alters: dict = field(default_factory=dict)


@dataclass(frozen=True, slots=True)
class AbstractRecord:
    paper_id: str
    text: str
    language: str
    tokens: dict
    types: list
