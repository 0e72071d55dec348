"""Wikipedia infobox parsing and URL-based geolocation of affiliations."""
from __future__ import annotations

import datetime as _dt
import html
import re
from collections import Counter
from dataclasses import dataclass, fields
from typing import Optional

from .geocode import CountryTable, Gazetteer, country_fields, default_country_table, normalize_country

_INFOBOX_START = re.compile(r"\{\{\s*infobox", re.IGNORECASE)

CITY_KEYS = ("city", "location", "headquarter", "headquarters")
FOUNDATION_KEYS = ("foundation", "foundation_date", "established", "founded")
HOMEPAGE_KEYS = ("homepage", "url", "website")
COUNTRY_KEYS = ("country",)
STATE_KEYS = ("state",)
ACRONYM_KEYS = ("acronym", "abbreviation")
TYPE_KEYS = ("type",)

# Templates that carry no usable text when collapsed.
_DROPPED_TEMPLATES = {
    "flagicon", "flag icon", "flagdeco", "citation needed", "cn", "efn", "refn", "sfn",
    "coord", "reflist", "small", "smaller", "ubl", "hlist", "plainlist", "increase", "decrease",
}
_DATE_TEMPLATES = {"start date", "start date and age", "birth date", "date", "founded date"}
_SECOND_ARG_TEMPLATES = {"lang", "transl", "native name"}

_MULTI_SEPARATORS = re.compile(r"\s*;\s*")


@dataclass(frozen=True)
class InfoboxRaw:
    """Ordered ``(key, cleaned value)`` pairs plus the uncleaned values for audit."""

    affiliation_id: str = ""
    pairs: tuple = ()
    raw_values: tuple = ()

    def get(self, key, default=None):
        for k, v in self.pairs:
            if k == key:
                return v
        return default


@dataclass(frozen=True)
class InfoboxFields:
    city: Optional[str] = None
    state: Optional[str] = None
    country: Optional[str] = None
    acronym: Optional[str] = None
    foundation_date: Optional[str] = None
    homepage: Optional[str] = None
    entity_type: Optional[str] = None


def _infobox_body(text):
    """Split the first infobox template into top-level ``|`` segments."""
    m = _INFOBOX_START.search(text)
    if m is None:
        return None
    i, n = m.start() + 2, len(text)
    braces, links = 1, 0
    segments, start = [], i
    while i < n:
        two = text[i:i + 2]
        if two == "{{":
            braces += 1
            i += 2
        elif two == "}}":
            braces -= 1
            if braces == 0:
                break
            i += 2
        elif two == "[[":
            links += 1
            i += 2
        elif two == "]]" and links:
            links -= 1
            i += 2
        elif text[i] == "|" and braces == 1 and links == 0:
            segments.append(text[start:i])
            start = i = i + 1
        else:
            i += 1
    segments.append(text[start:i])
    return segments


def _link(match):
    inner = match.group(1)
    target = inner.split("|", 1)[0].strip().casefold()
    if target.startswith(("file:", "image:", "category:")):
        return ""
    return inner.rsplit("|", 1)[-1]


def _template(match):
    parts = match.group(1).split("|")
    name = parts[0].strip().casefold()
    positional = [p.strip() for p in parts[1:] if "=" not in p]
    if name in _DROPPED_TEMPLATES or not positional:
        return ""
    if name in _DATE_TEMPLATES:
        nums = [p for p in positional if p.isdigit()][:3]
        if nums:
            return "-".join([nums[0]] + [p.zfill(2) for p in nums[1:]])
    if name in _SECOND_ARG_TEMPLATES and len(positional) > 1:
        return positional[1]
    return positional[0]


def clean_wikitext(value: str) -> str:
    """Strip wiki markup from one infobox value (best effort, lossy)."""
    text = re.sub(r"<!--.*?(-->|$)", "", value, flags=re.DOTALL)
    text = re.sub(r"<ref\b[^>]*/>", "", text, flags=re.IGNORECASE)
    text = re.sub(r"<ref\b[^>]*>.*?(</ref\s*>|$)", "", text, flags=re.IGNORECASE | re.DOTALL)
    text = re.sub(r"<br\s*/?>", "; ", text, flags=re.IGNORECASE)
    for _ in range(50):
        new = re.sub(r"\[\[([^\[\]]*)\]\]", _link, text)
        new = re.sub(r"\{\{([^{}]*)\}\}", _template, new)
        if new == text:
            break
        text = new
    text = re.sub(r"\[(?:https?:)?//\S+\s+([^\]]*)\]", r"\1", text)
    text = re.sub(r"\[((?:https?:)?//[^\]\s]+)\]", r"\1", text)
    text = re.sub(r"'{2,}", "", text)
    text = re.sub(r"</?[A-Za-z][^>]*>", "", text)
    text = html.unescape(text).replace("\xa0", " ")
    text = re.sub(r"^\s*[*#:]+\s*", "", text, flags=re.MULTILINE)
    text = re.sub(r"\s*\n\s*", "; ", text.strip())
    text = re.sub(r"(;\s*)+", "; ", text)
    return " ".join(text.split()).strip(" ;")


def parse_infobox(text, affiliation_id="") -> InfoboxRaw:
    """Extract ``| key = value`` rows of the first ``{{Infobox ...}}`` in ``text``.

    Keys are casefolded and trimmed, values cleaned of markup; rows without a
    top-level ``=`` (positional arguments) are skipped. No infobox yields no pairs.
    """
    if not isinstance(text, str):
        return InfoboxRaw(affiliation_id)
    segments = _infobox_body(text)
    if not segments:
        return InfoboxRaw(affiliation_id)
    pairs, raws = [], []
    for segment in segments[1:]:
        eq = segment.find("=")
        if eq < 0:
            continue
        key = segment[:eq]
        if "{{" in key or "[[" in key:
            continue
        key = " ".join(key.split()).casefold()
        if not key:
            continue
        raw = segment[eq + 1:].strip()
        pairs.append((key, clean_wikitext(raw)))
        raws.append(raw)
    return InfoboxRaw(affiliation_id, tuple(pairs), tuple(raws))


def _first(raw, keywords):
    for keyword in keywords:
        for key, value in raw.pairs:
            if key.replace(" ", "_") == keyword and value:
                return value
    return None


def extract_fields(raw: InfoboxRaw, stats: Optional[Counter] = None) -> InfoboxFields:
    """Pick standard fields from parsed pairs; the earlier keyword in each list wins.

    When the city value lists several places only the first is kept and the
    case is counted as ``multi_location``.
    """
    city = _first(raw, CITY_KEYS)
    if city:
        parts = [p for p in _MULTI_SEPARATORS.split(city) if p]
        if len(parts) > 1 and stats is not None:
            stats["multi_location"] += 1
        city = parts[0] if parts else None
    return InfoboxFields(
        city=city,
        state=_first(raw, STATE_KEYS),
        country=_first(raw, COUNTRY_KEYS),
        acronym=_first(raw, ACRONYM_KEYS),
        foundation_date=_first(raw, FOUNDATION_KEYS),
        homepage=_first(raw, HOMEPAGE_KEYS),
        entity_type=_first(raw, TYPE_KEYS),
    )


def _try_country(text, table):
    if not text or not text.strip():
        return None
    return normalize_country(text, table)


def resolve_location(fields_: InfoboxFields, gazetteer: Optional[Gazetteer], country_table: Optional[CountryTable] = None) -> dict:
    """Partial geographic enrichment from infobox fields.

    Looks the city up in the gazetteer, then normalises the country text;
    falling back to the state text as a country, then to the matched city's
    country. City coordinates come from a gazetteer match in the resolved country.
    """
    table = country_table or default_country_table()
    matches = gazetteer.lookup(fields_.city) if gazetteer is not None and fields_.city else []
    matches = [m for m in matches if m.country_alpha2 in table]
    state = fields_.state

    country = _try_country(fields_.country, table)
    if country is None and state:
        country = _try_country(state, table)
        if country is not None:
            state = None
    if country is None and matches:
        best = min(matches, key=lambda e: (-e.population, e.city_name, e.latitude, e.longitude))
        country = table.get(best.country_alpha2)

    partial = {}
    if fields_.city:
        local = [m for m in matches if country is not None and m.country_alpha2 == country.alpha2]
        if local:
            best = min(local, key=lambda e: (-e.population, e.city_name, e.latitude, e.longitude))
            partial.update(city=best.city_name, city_latitude=best.latitude, city_longitude=best.longitude)
        else:
            partial["city"] = fields_.city
    if state:
        partial["state"] = state
    partial.update(country_fields(country))
    return partial


_MONTHS = {m.casefold(): i for i, m in enumerate(
    ["January", "February", "March", "April", "May", "June", "July",
     "August", "September", "October", "November", "December"], 1)}
_MONTH_RE = "|".join(_MONTHS) + "|" + "|".join(m[:3] for m in _MONTHS)


def _iso(year, month, day):
    try:
        return _dt.date(int(year), int(month), int(day)).isoformat()
    except ValueError:
        return None


def _month(name):
    name = name.casefold()
    return _MONTHS.get(name) or next(i for m, i in _MONTHS.items() if m.startswith(name))


def normalize_foundation_date(text: Optional[str]) -> Optional[str]:
    """ISO-8601 full date or year from free infobox text, or ``None`` if unparseable."""
    if not text:
        return None
    s = text.strip()
    m = re.search(r"(?<!\d)(\d{4})-(\d{1,2})-(\d{1,2})(?!\d)", s)
    if m and (iso := _iso(*m.groups())):
        return iso
    m = re.search(rf"(?<!\d)(\d{{1,2}})\s+({_MONTH_RE})\.?,?\s+(\d{{4}})(?!\d)", s, re.IGNORECASE)
    if m and (iso := _iso(m.group(3), _month(m.group(2)), m.group(1))):
        return iso
    m = re.search(rf"\b({_MONTH_RE})\.?\s+(\d{{1,2}}),?\s+(\d{{4}})(?!\d)", s, re.IGNORECASE)
    if m and (iso := _iso(m.group(3), _month(m.group(1)), m.group(2))):
        return iso
    m = re.search(r"(?<!\d)(\d{4})(?!\d)", s)
    if m and 1000 <= int(m.group(1)) <= 2100:
        return m.group(1)
    if re.fullmatch(r"\d{3}", s):
        return s.zfill(4)
    return None


def infobox_partial(text, gazetteer, country_table=None, *, stats: Optional[Counter] = None) -> dict:
    """Parse, extract and resolve one infobox into a partial enrichment (URL-based source)."""
    fields_ = extract_fields(parse_infobox(text), stats)
    partial = resolve_location(fields_, gazetteer, country_table)
    if fields_.foundation_date:
        partial["foundation_date_raw"] = fields_.foundation_date
        partial["foundation_date"] = normalize_foundation_date(fields_.foundation_date)
    for key in ("acronym", "homepage", "entity_type"):
        value = getattr(fields_, key)
        if value:
            partial[key] = value
    return {k: v for k, v in partial.items() if v is not None}


def infobox_field_names():
    return [f.name for f in fields(InfoboxFields)]
