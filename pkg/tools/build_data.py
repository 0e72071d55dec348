"""Regenerate the bundled data files under src/scholar_enrich/data.

Needs the unpacked pycountry wheel, langdetect sdist, and Django/Sphinx wheels
(for their gettext catalogs) under SOURCE_DIR. Not used at runtime.

    python tools/build_data.py /tmp/dl/ex
"""
import collections
import csv
import glob
import json
import random
import re
import sys
from pathlib import Path

DATA = Path(__file__).resolve().parents[1] / "src" / "scholar_enrich" / "data"
LANGS = ["en", "fr", "de", "es", "it", "pt", "nl"]
PROFILE_SIZE = 300
PER_LANGUAGE = 100

# Everyday names not present in ISO 3166 under any of its name fields.
EXTRA_ALIASES = {
    "UK": "GB", "Great Britain": "GB", "England": "GB", "Scotland": "GB", "Wales": "GB",
    "Northern Ireland": "GB", "Russia": "RU", "Iran": "IR", "Syria": "SY", "Vietnam": "VN",
    "Laos": "LA", "Bolivia": "BO", "Venezuela": "VE", "Tanzania": "TZ", "Moldova": "MD",
    "Czech Republic": "CZ", "Korea": "KR", "Republic of Korea": "KR", "North Korea": "KP",
    "Macedonia": "MK", "Brunei": "BN", "Ivory Coast": "CI", "Cape Verde": "CV",
    "Holland": "NL", "The Netherlands": "NL", "Turkey": "TR", "Swaziland": "SZ",
    "Burma": "MM", "East Timor": "TL", "Vatican": "VA", "Vatican City": "VA",
    "Palestine": "PS", "Micronesia": "FM", "US": "US", "U.S.": "US", "America": "US",
    "People's Republic of China": "CN", "PRC": "CN", "Republic of China": "TW",
    "Hong Kong SAR": "HK", "Macau": "MO", "Congo-Kinshasa": "CD", "Congo-Brazzaville": "CG",
    "Democratic Republic of the Congo": "CD", "Republic of the Congo": "CG",
}


def build_countries(src):
    rows = json.load(open(src / "pycountry/databases/iso3166-1.json", encoding="utf-8"))["3166-1"]
    rows.sort(key=lambda r: r["alpha_2"])
    with open(DATA / "countries.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["alpha2", "alpha3", "common_name", "official_name"])
        for r in rows:
            w.writerow([r["alpha_2"], r["alpha_3"], r.get("common_name", r["name"]),
                        r.get("official_name", r["name"])])
    aliases = {}
    for r in rows:
        if r.get("common_name"):
            aliases[r["name"]] = r["alpha_2"]
    aliases.update(EXTRA_ALIASES)
    with open(DATA / "country_aliases.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["alias", "alpha2"])
        for alias in sorted(aliases):
            w.writerow([alias, aliases[alias]])


def build_profiles(src):
    profiles = {}
    for lang in LANGS:
        d = json.load(open(src / f"langdetect-1.0.9/langdetect/profiles/{lang}", encoding="utf-8"))
        counts = collections.Counter()
        for gram, n in d["freq"].items():
            if len(gram) == 3:
                counts[gram.casefold()] += n
        ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
        profiles[lang] = [g for g, _ in ranked[:PROFILE_SIZE]]
    with open(DATA / "trigram_profiles.json", "w", encoding="utf-8") as fh:
        json.dump(profiles, fh, ensure_ascii=False, indent=0)
        fh.write("\n")


def _parse_po(path):
    entries, msgid, msgstr, mode, fuzzy, pending_fuzzy = [], [], [], None, False, False
    for line in open(path, encoding="utf-8"):
        line = line.rstrip("\n")
        if line.startswith("#,") and "fuzzy" in line:
            pending_fuzzy = True
        elif line.startswith("msgid "):
            if msgid:
                entries.append(("".join(msgid), "".join(msgstr), fuzzy))
            msgid, msgstr, mode = [eval(line[6:])], [], "id"
            fuzzy, pending_fuzzy = pending_fuzzy, False
        elif line.startswith("msgstr "):
            msgstr, mode = [eval(line[7:])], "str"
        elif line.startswith(("msgid_plural", "msgstr[")):
            mode = None
        elif line.startswith('"') and mode:
            (msgid if mode == "id" else msgstr).append(eval(line))
    if msgid:
        entries.append(("".join(msgid), "".join(msgstr), fuzzy))
    return entries


def _clean(text):
    text = re.sub(r"%\([^)]*\)[sdr]|%[sdr]|\{[^}]*\}|<[^>]*>|`|\*", " ", text)
    return re.sub(r"\s+", " ", text).strip()


def build_sample(src):
    english_ids = set()
    per_lang = {}
    for lang in LANGS[1:]:
        found = set()
        for path in sorted(glob.glob(str(src / f"**/locale/{lang}/LC_MESSAGES/*.po"), recursive=True)):
            for mid, mstr, fuzzy in _parse_po(path):
                if not mid or not mstr or fuzzy:
                    continue
                english_ids.add(_clean(mid))
                found.add(_clean(mstr))
        per_lang[lang] = found
    per_lang["en"] = english_ids
    rows = []
    for lang in LANGS:
        pool = sorted(s for s in per_lang[lang] if len(s) >= 35
                      and (lang == "en" or s not in english_ids))
        for sentence in random.Random(lang).sample(pool, PER_LANGUAGE):
            rows.append((lang, sentence))
    with open(DATA / "language_sample.tsv", "w", encoding="utf-8") as fh:
        for lang, sentence in rows:
            fh.write(f"{lang}\t{sentence}\n")


if __name__ == "__main__":
    source = Path(sys.argv[1])
    DATA.mkdir(parents=True, exist_ok=True)
    build_countries(source)
    build_profiles(source)
    build_sample(source)
