"""Offline reverse geocoding, country normalisation and source merging."""
from __future__ import annotations

import csv
import logging
import re
import unicodedata
from collections import Counter, defaultdict
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Optional

import numpy as np
from scipy.spatial import cKDTree
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_coordinate_array, check_latlon
from .exceptions import InputError
from .records import AffiliationRecord, CountryRecord, GazetteerEntry, GeoEnrichment

logger = logging.getLogger(__name__)

EARTH_RADIUS_KM = 6371.0088
FUZZY_THRESHOLD = 0.85

# Chord-length slack when collecting equidistant candidates; far below any
# real separation between distinct places yet above float noise.
_TIE_SLACK = 1e-9


def _data_path(name):
    return resources.files("scholar_enrich") / "data" / name


# ---------------------------------------------------------------------------
# countries


def _normalize_name(text):
    text = unicodedata.normalize("NFKD", text.casefold())
    text = "".join(ch for ch in text if not unicodedata.combining(ch))
    text = re.sub(r"[^\w\s]|_", "", text)
    return " ".join(text.split())


def similarity(a: str, b: str) -> float:
    """1 - Levenshtein(a, b) / max(len(a), len(b)); 1.0 for two empty strings."""
    if a == b:
        return 1.0
    if len(a) < len(b):
        a, b = b, a
    previous = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        current = [i]
        for j, cb in enumerate(b, 1):
            current.append(min(previous[j] + 1, current[j - 1] + 1, previous[j - 1] + (ca != cb)))
        previous = current
    return 1.0 - previous[-1] / len(a)


class CountryTable:
    """ISO 3166 country rows with exact and fuzzy name lookup."""

    def __init__(self, records: Iterable[CountryRecord], aliases: Optional[Mapping[str, str]] = None,
                 threshold: float = FUZZY_THRESHOLD):
        self.threshold = threshold
        self.records = sorted(records, key=lambda r: r.alpha2)
        self.by_alpha2 = {}
        self.by_alpha3 = {}
        for r in self.records:
            if not all((r.alpha2, r.alpha3, r.common_name, r.official_name)):
                raise InputError(f"incomplete country row {r}")
            if r.alpha2 in self.by_alpha2 or r.alpha3 in self.by_alpha3:
                raise InputError(f"duplicate country code in row {r}")
            self.by_alpha2[r.alpha2] = r
            self.by_alpha3[r.alpha3] = r

        self._exact = {}
        self._fuzzy = []  # (normalized name, alpha2) in table order
        for r in self.records:
            for name in (r.alpha2, r.alpha3, r.common_name, r.official_name):
                self._exact.setdefault(name.casefold(), r.alpha2)
                self._fuzzy.append((_normalize_name(name), r.alpha2))
        for alias, alpha2 in sorted((aliases or {}).items()):
            if alpha2 not in self.by_alpha2:
                raise InputError(f"alias {alias!r} points to unknown code {alpha2}")
            self._exact.setdefault(alias.casefold(), alpha2)
            self._fuzzy.append((_normalize_name(alias), alpha2))

    @classmethod
    def load(cls, path=None, aliases_path=None, threshold: float = FUZZY_THRESHOLD) -> "CountryTable":
        """Read ``alpha2,alpha3,common_name,official_name`` rows (bundled table by default)."""
        source = Path(path) if path else _data_path("countries.csv")
        with source.open(encoding="utf-8", newline="") as fh:
            records = [
                CountryRecord(row["alpha2"].strip(), row["alpha3"].strip(),
                              row["common_name"].strip(), row["official_name"].strip())
                for row in csv.DictReader(fh)
            ]
        aliases = {}
        if aliases_path is None and path is None:
            aliases_path = _data_path("country_aliases.csv")
        if aliases_path is not None:
            with Path(aliases_path).open(encoding="utf-8", newline="") as fh:
                aliases = {row["alias"]: row["alpha2"] for row in csv.DictReader(fh)}
        return cls(records, aliases, threshold)

    def __contains__(self, alpha2):
        return alpha2 in self.by_alpha2

    def __len__(self):
        return len(self.records)

    def get(self, alpha2) -> Optional[CountryRecord]:
        return self.by_alpha2.get(alpha2)

    def exact(self, raw: str) -> Optional[CountryRecord]:
        code = self._exact.get(raw.strip().casefold())
        return self.by_alpha2[code] if code else None

    def fuzzy(self, raw: str, threshold: Optional[float] = None) -> Optional[CountryRecord]:
        threshold = self.threshold if threshold is None else threshold
        return self._fuzzy_cached(_normalize_name(raw), threshold)

    @lru_cache(maxsize=4096)
    def _fuzzy_cached(self, query, threshold):
        if not query:
            return None
        best, best_code = -1.0, None
        for name, code in self._fuzzy:
            # length gap alone bounds the similarity from above
            if 1.0 - abs(len(name) - len(query)) / max(len(name), len(query), 1) < max(best, threshold):
                continue
            s = similarity(query, name)
            if s > best:
                best, best_code = s, code
        if best_code is None or best < threshold:
            return None
        return self.by_alpha2[best_code]

    def __hash__(self):
        return id(self)


@lru_cache(maxsize=1)
def default_country_table() -> CountryTable:
    return CountryTable.load()


def normalize_country(raw, table: Optional[CountryTable] = None, threshold: Optional[float] = None):
    """Map free country text to a :class:`CountryRecord`, or ``None`` if nothing matches.

    Exact (casefolded) matches on codes, names and aliases are tried first,
    then the best fuzzy match on casefolded, punctuation-stripped text whose
    similarity reaches ``threshold`` (the table's own threshold by default).
    """
    if raw is None or not str(raw).strip():
        raise InputError("country text is empty")
    table = table or default_country_table()
    return table.exact(raw) or table.fuzzy(raw, threshold)


class CountryNormalizer(BaseEstimator):
    """Transformer mapping country strings to ISO alpha-2 codes (``None`` when unmatched)."""

    def __init__(self, threshold=FUZZY_THRESHOLD):
        self.threshold = threshold

    def fit(self, X=None, y=None, table=None):
        if not 0.0 < self.threshold <= 1.0:
            raise InputError(f"threshold must be in (0, 1], got {self.threshold}")
        self.table_ = table or default_country_table()
        return self

    def transform(self, X):
        check_is_fitted(self, "table_")
        out = []
        for raw in X:
            rec = None
            if raw is not None and str(raw).strip():
                rec = normalize_country(str(raw), self.table_, self.threshold)
            out.append(rec.alpha2 if rec else None)
        return np.asarray(out, dtype=object)


def load_territories(path=None) -> dict:
    source = Path(path) if path else _data_path("territories.csv")
    with source.open(encoding="utf-8", newline="") as fh:
        mapping = {row["territory"].strip(): row["parent"].strip() for row in csv.DictReader(fh)}
    for territory, parent in mapping.items():
        if territory == parent or parent in mapping:
            raise InputError(f"territory table must map territories to non-territory parents: {territory}->{parent}")
    return mapping


TERRITORY_PARENTS = load_territories()


def secondary_country(alpha2, territories: Optional[Mapping[str, str]] = None) -> Optional[str]:
    """Parent country code for dual-coded territories (``PR`` -> ``US``), else ``None``."""
    if not alpha2:
        return None
    return (TERRITORY_PARENTS if territories is None else territories).get(alpha2)


# ---------------------------------------------------------------------------
# gazetteer and nearest-city search


def haversine_km(lat1, lon1, lat2, lon2, radius=EARTH_RADIUS_KM):
    lat1, lon1, lat2, lon2 = map(np.radians, (lat1, lon1, lat2, lon2))
    a = np.sin((lat2 - lat1) / 2) ** 2 + np.cos(lat1) * np.cos(lat2) * np.sin((lon2 - lon1) / 2) ** 2
    return 2 * radius * np.arcsin(np.sqrt(np.clip(a, 0.0, 1.0)))


def _unit_vectors(lat, lon):
    lat, lon = np.radians(lat), np.radians(lon)
    cos_lat = np.cos(lat)
    return np.column_stack((cos_lat * np.cos(lon), cos_lat * np.sin(lon), np.sin(lat)))


class Gazetteer:
    """Populated places with a casefolded name index."""

    COLUMNS = ("name", "alt_names", "latitude", "longitude", "country_alpha2", "admin1", "population")

    def __init__(self, entries: Iterable[GazetteerEntry]):
        self.entries = list(entries)
        self.by_name = defaultdict(list)
        for i, e in enumerate(self.entries):
            keys = {e.city_name.casefold()} | {n.casefold() for n in e.alt_names if n}
            for key in keys:
                self.by_name[key].append(i)
        self.by_name = dict(self.by_name)

    def __len__(self):
        return len(self.entries)

    @classmethod
    def load(cls, path, country_table: Optional[CountryTable] = None, stats: Optional[Counter] = None):
        """Read a GeoNames-style CSV; rows with bad coordinates or unknown countries are dropped and counted."""
        path = Path(path)
        if not path.is_file():
            raise InputError(f"gazetteer not found: {path}")
        table = country_table or default_country_table()
        stats = stats if stats is not None else Counter()
        entries = []
        with path.open(encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            missing = set(cls.COLUMNS) - set(reader.fieldnames or ())
            if missing:
                raise InputError(f"gazetteer {path} lacks columns {sorted(missing)}")
            for row in reader:
                try:
                    lat, lon = check_latlon(row["latitude"], row["longitude"])
                    population = int(row["population"] or 0)
                except (InputError, ValueError):
                    stats["gazetteer_bad_rows"] += 1
                    continue
                code = row["country_alpha2"].strip()
                if code not in table or population < 0:
                    stats["gazetteer_bad_rows"] += 1
                    continue
                alt = tuple(n.strip() for n in (row["alt_names"] or "").split(";") if n.strip())
                entries.append(GazetteerEntry(row["name"].strip(), lat, lon, code,
                                              row["admin1"].strip(), population, alt))
        if not entries:
            raise InputError(f"gazetteer {path} has no usable rows")
        return cls(entries)

    def lookup(self, name: str) -> list:
        return [self.entries[i] for i in self.by_name.get(name.strip().casefold(), ())]


class ReverseGeocoder(BaseEstimator):
    """Nearest gazetteer city by great-circle distance.

    Indexes places as unit vectors in a 3-D k-d tree; chord length is
    monotone in great-circle distance so the nearest neighbour is exact.
    Equidistant places resolve to the larger population, then the
    lexicographically smaller name.

    Parameters
    ----------
    max_distance_km : float or None
        Queries farther than this from every place are unlocated.
    earth_radius_km : float
    """

    def __init__(self, max_distance_km=None, earth_radius_km=EARTH_RADIUS_KM):
        self.max_distance_km = max_distance_km
        self.earth_radius_km = earth_radius_km

    def fit(self, gazetteer, y=None):
        if not isinstance(gazetteer, Gazetteer):
            gazetteer = Gazetteer(gazetteer)
        if len(gazetteer) == 0:
            raise InputError("gazetteer is empty")
        self.gazetteer_ = gazetteer
        entries = gazetteer.entries
        self._lat = np.array([e.latitude for e in entries], dtype=float)
        self._lon = np.array([e.longitude for e in entries], dtype=float)
        self._tree = cKDTree(_unit_vectors(self._lat, self._lon))
        self.n_places_ = len(entries)
        return self

    def kneighbors(self, X):
        """Return ``(distances_km, indices)`` of the nearest place per (lat, lon) row."""
        check_is_fitted(self, "gazetteer_")
        X = check_coordinate_array(X)
        n = X.shape[0]
        if n == 0:
            return np.empty(0), np.empty(0, dtype=int)
        vecs = _unit_vectors(X[:, 0], X[:, 1])
        chord, _ = self._tree.query(vecs, k=1)
        candidates = self._tree.query_ball_point(vecs, r=np.asarray(chord) + _TIE_SLACK)
        entries = self.gazetteer_.entries
        dist = np.empty(n)
        idx = np.empty(n, dtype=int)
        for q in range(n):
            cand = np.asarray(candidates[q], dtype=int)
            d = haversine_km(X[q, 0], X[q, 1], self._lat[cand], self._lon[cand], self.earth_radius_km)
            best = min(range(len(cand)),
                       key=lambda k: (d[k], -entries[cand[k]].population, entries[cand[k]].city_name))
            dist[q], idx[q] = d[best], cand[best]
        return dist, idx

    def query(self, latitude, longitude):
        """Nearest ``(GazetteerEntry, distance_km)``, or ``None`` beyond ``max_distance_km``."""
        lat, lon = check_latlon(latitude, longitude)
        dist, idx = self.kneighbors([[lat, lon]])
        if self.max_distance_km is not None and dist[0] > self.max_distance_km:
            return None
        return self.gazetteer_.entries[idx[0]], float(dist[0])

    def predict(self, X):
        """Country alpha-2 code of the nearest place (``None`` beyond the cutoff)."""
        dist, idx = self.kneighbors(X)
        entries = self.gazetteer_.entries
        out = [entries[i].country_alpha2 for i in idx]
        if self.max_distance_km is not None:
            out = [c if d <= self.max_distance_km else None for c, d in zip(out, dist)]
        return np.asarray(out, dtype=object)


def reverse_geocode(latitude, longitude, geocoder: ReverseGeocoder):
    """Nearest gazetteer entry and its distance in km for one coordinate pair."""
    return geocoder.query(latitude, longitude)


# ---------------------------------------------------------------------------
# merging


GEO_FIELDS = (
    "city", "city_latitude", "city_longitude", "state", "postcode",
    "country_alpha2", "country_alpha3", "country_official_name", "country_common_name",
)
INSTITUTION_FIELDS = ("foundation_date", "foundation_date_raw", "entity_type", "acronym", "homepage")


def country_fields(record: Optional[CountryRecord]) -> dict:
    if record is None:
        return {}
    return {
        "country_alpha2": record.alpha2,
        "country_alpha3": record.alpha3,
        "country_official_name": record.official_name,
        "country_common_name": record.common_name,
    }


def reverse_partial(entry: GazetteerEntry, table: CountryTable) -> dict:
    """Partial enrichment from a reverse-geocoded place (city, state, country)."""
    partial = {"city": entry.city_name, "state": entry.admin1 or None}
    partial.update(country_fields(table.get(entry.country_alpha2)))
    return partial


def _present(partial):
    return bool(partial) and any(v not in (None, "") for v in partial.values())


def _same_city(a, b):
    return bool(a) and bool(b) and a.strip().casefold() == b.strip().casefold()


def merge_geo_sources(reverse: Optional[Mapping], urlbased: Optional[Mapping], *,
                      affiliation_id="", latitude=None, longitude=None,
                      territories=None, stats: Optional[Counter] = None) -> GeoEnrichment:
    """Combine reverse-geocoded and infobox-derived partial enrichments.

    The reverse result is the base whenever it carries a country; a matching
    infobox country may then fill a missing city or state, and the infobox
    city coordinates are attached only when both sides name the same city.
    Without a reverse country the infobox geography is taken as is.
    Institutional fields always come from the infobox. On a country conflict
    the reverse country wins; on a postcode conflict the reverse postcode wins.
    ``latitude``/``longitude`` are the affiliation's own coordinates, passed through.
    """
    reverse = dict(reverse or {})
    urlbased = dict(urlbased or {})
    if not _present(reverse) and not _present(urlbased):
        raise InputError("merge_geo_sources needs at least one non-empty source")
    stats = stats if stats is not None else Counter()

    used_reverse = used_url = False
    if reverse.get("country_alpha2"):
        used_reverse = True
        out = {k: reverse.get(k) for k in GEO_FIELDS}
        url_country = urlbased.get("country_alpha2")
        if url_country == out["country_alpha2"]:
            for key in ("city", "state"):
                if not out.get(key) and urlbased.get(key):
                    out[key] = urlbased[key]
                    used_url = True
            if _same_city(out.get("city"), urlbased.get("city")) and urlbased.get("city_latitude") is not None:
                out["city_latitude"] = urlbased["city_latitude"]
                out["city_longitude"] = urlbased["city_longitude"]
                used_url = True
        elif url_country:
            stats["country_conflicts"] += 1
        url_postcode = urlbased.get("postcode")
        if url_postcode:
            if not out.get("postcode"):
                if url_country == out["country_alpha2"]:
                    out["postcode"] = url_postcode
                    used_url = True
            elif out["postcode"] != url_postcode:
                stats["postcode_conflicts"] += 1
    else:
        out = {k: urlbased.get(k) for k in GEO_FIELDS}
        used_url = any(v not in (None, "") for v in out.values())
        if not used_url and any(reverse.get(k) not in (None, "") for k in GEO_FIELDS):
            out = {k: reverse.get(k) for k in GEO_FIELDS}
            used_reverse = True

    for key in INSTITUTION_FIELDS:
        value = urlbased.get(key)
        if value not in (None, ""):
            out[key] = value
            used_url = True

    if not out.get("city"):
        out["city_latitude"] = out["city_longitude"] = None
    out["country_alpha2_secondary"] = secondary_country(out.get("country_alpha2"), territories)
    if used_reverse and used_url:
        out["provenance"] = "merged"
    else:
        out["provenance"] = "reverse" if used_reverse else "url"
    return GeoEnrichment(affiliation_id=affiliation_id, latitude=latitude, longitude=longitude,
                         **{k: v for k, v in out.items() if v not in (None, "")})


def enrich_affiliations(
    affiliations: Iterable[AffiliationRecord],
    geocoder: ReverseGeocoder,
    country_table: Optional[CountryTable] = None,
    infobox_store: Optional[Mapping[str, str]] = None,
    *,
    territories=None,
    stats: Optional[Counter] = None,
) -> Iterator[GeoEnrichment]:
    """Yield one :class:`GeoEnrichment` per affiliation.

    ``infobox_store`` maps affiliation ids to fetched infobox wikitext.
    Affiliations ending without a country are counted as ``unlocated``.
    """
    from .infobox import infobox_partial

    table = country_table or default_country_table()
    store = infobox_store or {}
    stats = stats if stats is not None else Counter()
    gazetteer = geocoder.gazetteer_
    for aff in affiliations:
        stats["affiliations"] += 1
        reverse = {}
        if aff.latitude is not None and aff.longitude is not None:
            hit = geocoder.query(aff.latitude, aff.longitude)
            if hit is None:
                stats["beyond_max_distance"] += 1
            else:
                reverse = reverse_partial(hit[0], table)
        text = store.get(aff.affiliation_id)
        urlbased = infobox_partial(text, gazetteer, table, stats=stats) if text else {}
        if _present(reverse) or _present(urlbased):
            record = merge_geo_sources(reverse, urlbased, affiliation_id=aff.affiliation_id,
                                       latitude=aff.latitude, longitude=aff.longitude,
                                       territories=territories, stats=stats)
        else:
            record = GeoEnrichment(affiliation_id=aff.affiliation_id,
                                   latitude=aff.latitude, longitude=aff.longitude)
        if record.country_alpha2:
            stats[f"provenance_{record.provenance}"] += 1
        else:
            stats["unlocated"] += 1
        yield record
