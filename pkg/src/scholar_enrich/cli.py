"""Command-line pipeline: one subcommand per output stage, plus ``all``.

Exit codes: 0 success, 1 input/validation error (including a missing prior
stage), 2 internal-consistency error.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from itertools import groupby
from pathlib import Path
from typing import Optional

from . import outputs as out
from .egonet import DEFAULT_MAX_AUTHORS, build_ego_networks
from .exceptions import ConsistencyError, DependencyError, InputError
from .fos import build_dag, propagate_labels, score_papers
from .geocode import (
    FUZZY_THRESHOLD,
    CountryTable,
    Gazetteer,
    ReverseGeocoder,
    enrich_affiliations,
    load_territories,
)
from .hindex import author_h_indexes
from .ingest import DumpManifest, JoinStats, StreamStats, join_triples_with_years, parse_dump_stream
from .mobility import (
    aggregate_country_flows,
    build_careers,
    compute_flows,
    compute_stocks,
    id_key,
    locate_authors,
)
from .records import AnnualLocation, CareerNationality, GeoEnrichment
from .textproc import DEFAULT_LANGUAGES, LanguageDetector, process_abstract

logger = logging.getLogger("scholar_enrich")

ENV_PREFIX = "SCHOLAR_ENRICH_"

STAGES = (
    "geocode-affiliations",
    "build-careers",
    "annual-locations",
    "stocks",
    "flows",
    "egonets",
    "hindex",
    "abstracts",
    "fos-propagate",
    "paper-areas",
)

# manifest subsets each stage reads
STAGE_INPUTS = {
    "geocode-affiliations": ("affiliations", "gazetteer"),
    "build-careers": ("papers", "triples"),
    "annual-locations": (),
    "stocks": (),
    "flows": (),
    "egonets": ("papers", "triples"),
    "hindex": ("papers", "triples"),
    "abstracts": ("abstracts",),
    "fos-propagate": ("fields_of_study", "fos_children"),
    "paper-areas": ("paper_fos",),
}


def parse_size(text) -> Optional[int]:
    """``"512M"``/``"2G"``/``"1048576"`` to bytes; empty or ``none`` means unlimited."""
    if text is None:
        return None
    s = str(text).strip().upper()
    if s in ("", "NONE", "0"):
        return None
    units = {"K": 1 << 10, "M": 1 << 20, "G": 1 << 30, "T": 1 << 40}
    mult = 1
    if s.endswith("B"):
        s = s[:-1]
    if s and s[-1] in units:
        mult = units[s[-1]]
        s = s[:-1]
    try:
        value = float(s)
    except ValueError:
        raise InputError(f"bad size {text!r}") from None
    if value < 0:
        raise InputError(f"bad size {text!r}")
    return int(value * mult)


def _bool(text):
    return str(text).strip().lower() in {"1", "true", "yes", "on"}


@dataclass
class PipelineConfig:
    manifest: Path
    out_dir: Path
    memory_budget: Optional[int] = None
    jobs: int = 1
    skip_malformed: bool = False
    max_distance_km: Optional[float] = None
    languages: tuple = DEFAULT_LANGUAGES
    max_authors: Optional[int] = DEFAULT_MAX_AUTHORS
    fuzzy_threshold: float = FUZZY_THRESHOLD

    # config key -> (environment suffix, parser)
    KEYS = {
        "manifest": ("MANIFEST", Path),
        "out_dir": ("OUT", Path),
        "memory_budget": ("MEMORY_BUDGET", parse_size),
        "jobs": ("JOBS", int),
        "skip_malformed": ("SKIP_MALFORMED", _bool),
        "max_distance_km": ("MAX_DISTANCE_KM", float),
        "languages": ("LANGUAGES", lambda s: tuple(x.strip() for x in s.split(",") if x.strip())),
        "max_authors": ("MAX_AUTHORS", lambda s: None if s.strip().lower() in ("", "none", "0") else int(s)),
        "fuzzy_threshold": ("FUZZY_THRESHOLD", float),
    }

    @classmethod
    def resolve(cls, args, environ=None) -> "PipelineConfig":
        """Command-line flags override ``SCHOLAR_ENRICH_*`` variables, which override defaults."""
        environ = os.environ if environ is None else environ
        values = {}
        for key, (suffix, parse) in cls.KEYS.items():
            raw = getattr(args, key, None)
            if raw is None and ENV_PREFIX + suffix in environ:
                raw = environ[ENV_PREFIX + suffix]
            if raw is None:
                continue
            try:
                values[key] = parse(raw) if isinstance(raw, str) else raw
            except ValueError as exc:
                raise InputError(f"bad value for {key}: {raw!r} ({exc})") from None
        for key in ("manifest", "out_dir"):
            if key not in values:
                flag = "--manifest" if key == "manifest" else "--out"
                raise InputError(f"{flag} is required (or set {ENV_PREFIX}{cls.KEYS[key][0]})")
        cfg = cls(**values)
        cfg.validate()
        return cfg

    def validate(self):
        if self.jobs < 1:
            raise InputError("parallelism (--jobs) must be >= 1")
        if self.max_distance_km is not None and self.max_distance_km < 0:
            raise InputError("--max-distance-km must be non-negative")
        if not 0 < self.fuzzy_threshold <= 1:
            raise InputError("--fuzzy-threshold must be in (0, 1]")
        self.out_dir.mkdir(parents=True, exist_ok=True)
        if not os.access(self.out_dir, os.W_OK):
            raise InputError(f"output directory not writable: {self.out_dir}")


@dataclass
class RunReport:
    stage: str
    streams: dict = field(default_factory=dict)
    counters: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    runtime_s: float = 0.0

    def stream(self, name, n_in, n_out, rejects):
        self.streams[name] = {"in": n_in, "out": n_out, "rejects": rejects}

    def file_stream(self, stats: StreamStats):
        self.stream(f"{stats.subset}_file", stats.lines, stats.records, stats.malformed)
        if stats.decode_errors:
            self.counters[f"{stats.subset}_decode_errors"] = stats.decode_errors

    def count(self, counter):
        for k, v in sorted(counter.items()):
            self.counters[k] = self.counters.get(k, 0) + v

    def write(self, out_dir: Path):
        path = out_dir / "reports" / f"{self.stage}.json"
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n", encoding="utf-8")


class Context:
    def __init__(self, config: PipelineConfig):
        self.config = config
        self.manifest = DumpManifest.load(config.manifest)
        self._rejects = {}

    def require(self, *names):
        missing = [n for n in names if n not in self.manifest]
        if missing:
            raise InputError(f"manifest {self.config.manifest} lacks {missing}")

    def prior(self, filename, stage) -> Path:
        path = self.config.out_dir / filename
        if not path.is_file():
            raise DependencyError(filename, stage)
        return path

    def output(self, filename) -> Path:
        return self.config.out_dir / filename

    def stream(self, subset, report: RunReport, rejects: list):
        stats = StreamStats(subset)
        records = parse_dump_stream(
            self.manifest, subset, skip_malformed=self.config.skip_malformed,
            on_malformed=lambda ev: rejects.append(f"{ev.lineno}\t{ev.reason}\t{ev.raw}"), stats=stats,
        )
        yield from records
        report.file_stream(stats)

    def write_rejects(self, subset, lines):
        path = self.config.out_dir / f"{subset}.rejects.tsv"
        with out.atomic_writer(path) as fh:
            for line in lines:
                fh.write(line.replace("\n", "\\n") + "\n")

    def joined_triples(self, report: RunReport):
        """Year-joined triples (materialised), writing both rejects files."""
        paper_rejects, triple_rejects = [], []
        citations = {}

        def papers():
            for p in self.stream("papers", report, paper_rejects):
                citations.setdefault(p.paper_id, p.citation_count)
                yield p

        join_stats = JoinStats()
        joined = list(join_triples_with_years(
            self.stream("triples", report, triple_rejects), papers(),
            memory_budget=self.config.memory_budget, stats=join_stats,
            on_reject=lambda r: triple_rejects.append(
                f"join\t{r.reason}\t{r.triple.paper_id}\t{r.triple.author_id}\t{r.triple.affiliation_id or ''}"
            ),
        ))
        report.stream("triples_join", join_stats.triples_in, join_stats.joined, join_stats.rejected)
        report.counters.update(duplicate_papers=join_stats.duplicate_papers,
                               join_spilled=int(join_stats.spilled))
        self.write_rejects("papers", paper_rejects)
        self.write_rejects("triples", triple_rejects)
        return joined, citations


# ---------------------------------------------------------------------------
# stages


def stage_geocode(ctx: Context, report: RunReport):
    ctx.require("affiliations", "gazetteer")
    m = ctx.manifest
    table = CountryTable.load(m.resource("countries"), m.resource("country_aliases"),
                              threshold=ctx.config.fuzzy_threshold)
    territories = load_territories(m.resource("territories")) if m.resource("territories") else None
    stats = Counter()
    gazetteer = Gazetteer.load(m.resource("gazetteer"), table, stats)
    geocoder = ReverseGeocoder(max_distance_km=ctx.config.max_distance_km).fit(gazetteer)

    store = {}
    if "infobox" in m:
        infobox_rejects = []
        for row in ctx.stream("infobox", report, infobox_rejects):
            store[row["affiliation_id"].strip()] = row["wikitext"].replace("\\n", "\n")
        ctx.write_rejects("infobox", infobox_rejects)

    aff_rejects = []
    records = enrich_affiliations(ctx.stream("affiliations", report, aff_rejects), geocoder, table, store,
                                  territories=territories, stats=stats)
    n = out.write_csv(ctx.output(out.AFFILIATIONS_GEO), GeoEnrichment.field_names(), out.geo_rows(records))
    ctx.write_rejects("affiliations", aff_rejects)
    report.count(stats)
    report.outputs[out.AFFILIATIONS_GEO] = n


def _geo_map(path):
    return {row["affiliation_id"]: row["country_alpha2"] for row in out.read_csv(path) if row["country_alpha2"]}


def stage_careers(ctx: Context, report: RunReport):
    ctx.require("papers", "triples")
    geo = _geo_map(ctx.prior(out.AFFILIATIONS_GEO, "geocode-affiliations"))
    joined, _ = ctx.joined_triples(report)
    stats = Counter()
    careers = build_careers(joined, geo, stats)

    def objects():
        for author, years in groupby(careers, key=lambda cy: cy.author_id):
            stats["authors"] += 1
            yield out.career_object(author, list(years))

    report.outputs[out.AUTHOR_CAREER] = out.write_jsonl(ctx.output(out.AUTHOR_CAREER), objects())
    report.count(stats)


def stage_locations(ctx: Context, report: RunReport):
    path = ctx.prior(out.AUTHOR_CAREER, "build-careers")
    stats = Counter()

    def careers():
        for obj in out.read_jsonl(path):
            yield from out.career_years_from_object(obj)

    def objects():
        for author, locations, nationality in locate_authors(careers()):
            stats["authors"] += 1
            stats["author_years_located"] += len(locations)
            if nationality is None:
                stats["unlocated_authors"] += 1
            yield out.location_object(author, locations, nationality)

    report.outputs[out.AUTHOR_YEAR_LOCATION] = out.write_jsonl(ctx.output(out.AUTHOR_YEAR_LOCATION), objects())
    report.count(stats)


def _read_locations(ctx: Context):
    path = ctx.prior(out.AUTHOR_YEAR_LOCATION, "annual-locations")
    locations, nationalities = [], {}
    for obj in out.read_jsonl(path):
        author = obj["author_id"]
        for year, country in obj["locations"].items():
            locations.append(AnnualLocation(author, int(year), country))
        if obj.get("career_nationality"):
            nationalities[author] = CareerNationality(author, obj["career_nationality"], obj["nationality_year"])
    return locations, nationalities


def stage_stocks(ctx: Context, report: RunReport):
    locations, nationalities = _read_locations(ctx)
    stocks = compute_stocks(locations, nationalities)
    rows = ([s.country_alpha2, s.year, s.stock, s.located_authors, s.natives, s.no_nationality] for s in stocks)
    report.outputs[out.STOCKS] = out.write_csv(ctx.output(out.STOCKS), out.STOCK_COLUMNS, rows)
    report.stream("annual_locations", len(locations), len(locations), 0)


def stage_flows(ctx: Context, report: RunReport):
    locations, nationalities = _read_locations(ctx)
    flows = compute_flows(locations, nationalities)
    rows = ([f.year, f.origin_alpha2, f.destination_alpha2, f.weight, f.returners,
             f.origin_natives, f.destination_natives] for f in flows)
    report.outputs[out.FLOWS] = out.write_csv(ctx.output(out.FLOWS), out.FLOW_COLUMNS, rows)
    report.outputs[out.COUNTRY_FLOWS] = out.write_csv(
        ctx.output(out.COUNTRY_FLOWS), out.COUNTRY_FLOW_COLUMNS, aggregate_country_flows(flows))
    report.counters["movements"] = sum(f.weight for f in flows)


def stage_egonets(ctx: Context, report: RunReport):
    ctx.require("papers", "triples")
    joined, _ = ctx.joined_triples(report)
    stats = Counter()
    nets = build_ego_networks(joined, max_authors=ctx.config.max_authors, stats=stats)
    objects = ({"ego": n.ego, "year": n.year, "alters": n.alters} for n in nets)
    report.outputs[out.EGO_NETWORKS] = out.write_jsonl(ctx.output(out.EGO_NETWORKS), objects)
    report.count(stats)


def stage_hindex(ctx: Context, report: RunReport):
    ctx.require("papers", "triples")
    joined, citations = ctx.joined_triples(report)
    authors = []
    if "authors" in ctx.manifest:
        author_rejects = []
        authors = [a.author_id for a in ctx.stream("authors", report, author_rejects)]
        ctx.write_rejects("authors", author_rejects)
    h = author_h_indexes(joined, citations, authors)
    rows = ([a, h[a]] for a in sorted(h, key=id_key))
    report.outputs[out.HINDEX] = out.write_csv(ctx.output(out.HINDEX), ("author_id", "h_index"), rows)


def _process_chunk(args):
    chunk, languages = args
    detector = LanguageDetector(languages=languages).fit()
    return [process_abstract(pid, text, detector) for pid, text in chunk]


def _chunks(rows, size):
    chunk = []
    for row in rows:
        chunk.append((row["paper_id"].strip(), row["text"].replace("\\n", "\n")))
        if len(chunk) == size:
            yield chunk
            chunk = []
    if chunk:
        yield chunk


def stage_abstracts(ctx: Context, report: RunReport):
    ctx.require("abstracts")
    rejects = []
    languages = tuple(ctx.config.languages)
    LanguageDetector(languages=languages).fit()  # fail early on unknown languages
    rows = ctx.stream("abstracts", report, rejects)
    stats = Counter()

    def records():
        work = ((chunk, languages) for chunk in _chunks(rows, 2000))
        if ctx.config.jobs > 1:
            with ProcessPoolExecutor(max_workers=ctx.config.jobs) as pool:
                for batch in pool.map(_process_chunk, work):
                    yield from batch
        else:
            for item in work:
                yield from _process_chunk(item)

    def objects():
        for r in records():
            stats[f"language_{r.language}"] += 1
            yield {"paper_id": r.paper_id, "language": r.language, "text": r.text,
                   "tokens": r.tokens, "types": r.types}

    report.outputs[out.ABSTRACTS] = out.write_jsonl(ctx.output(out.ABSTRACTS), objects())
    ctx.write_rejects("abstracts", rejects)
    report.count(stats)


def _score_rows(scores_by_id):
    for key in sorted(scores_by_id, key=id_key):
        scores = scores_by_id[key]
        if not scores:
            yield [key, "", ""]
        for area in sorted(scores, key=id_key):
            yield [key, area, scores[area]]


def stage_fos(ctx: Context, report: RunReport):
    ctx.require("fields_of_study", "fos_children")
    fos_rejects, edge_rejects = [], []
    rows = ((r["fos_id"], r.get("name", ""), r["level"])
            for r in ctx.stream("fields_of_study", report, fos_rejects))
    edges = ((r["parent_id"], r["child_id"]) for r in ctx.stream("fos_children", report, edge_rejects))
    stats = Counter()
    nodes = build_dag(rows, edges, stats)
    labels = propagate_labels(nodes, stats)
    ctx.write_rejects("fields_of_study", fos_rejects)
    ctx.write_rejects("fos_children", edge_rejects)
    report.outputs[out.FOS_LABELED] = out.write_csv(
        ctx.output(out.FOS_LABELED), ("fos_id", "area", "score"), _score_rows(labels))
    report.count(stats)
    report.counters["fos_nodes"] = len(nodes)


def stage_paper_areas(ctx: Context, report: RunReport):
    ctx.require("paper_fos")
    labels = {}
    for row in out.read_csv(ctx.prior(out.FOS_LABELED, "fos-propagate")):
        scores = labels.setdefault(row["fos_id"], {})
        if row["area"]:
            scores[row["area"]] = float(row["score"])
    rejects = []
    stats = Counter()
    links = ctx.stream("paper_fos", report, rejects)
    scores = score_papers(links, labels, stats=stats,
                          on_reject=lambda r: rejects.append(f"link\tunknown fos\t{r[0]}\t{r[1]}"))
    ctx.write_rejects("paper_fos", rejects)
    report.stream("paper_fos_links", stats["links_in"], stats["links_in"] - stats["links_rejected"],
                  stats["links_rejected"])
    report.outputs[out.PAPER_FOS_LABELED] = out.write_csv(
        ctx.output(out.PAPER_FOS_LABELED), ("paper_id", "area", "score"), _score_rows(scores))
    report.count(stats)


STAGE_FUNCS = {
    "geocode-affiliations": stage_geocode,
    "build-careers": stage_careers,
    "annual-locations": stage_locations,
    "stocks": stage_stocks,
    "flows": stage_flows,
    "egonets": stage_egonets,
    "hindex": stage_hindex,
    "abstracts": stage_abstracts,
    "fos-propagate": stage_fos,
    "paper-areas": stage_paper_areas,
}


def run_stage(stage, ctx: Context) -> RunReport:
    report = RunReport(stage)
    started = time.perf_counter()
    STAGE_FUNCS[stage](ctx, report)
    report.runtime_s = round(time.perf_counter() - started, 6)
    report.write(ctx.config.out_dir)
    logger.info("%s: %s", stage, ", ".join(f"{k}={v}" for k, v in report.outputs.items()))
    return report


def run(subcommand: str, config: PipelineConfig) -> list:
    """Run one stage, or every stage whose manifest inputs are present for ``all``."""
    ctx = Context(config)
    if subcommand != "all":
        return [run_stage(subcommand, ctx)]
    reports = []
    for stage in STAGES:
        missing = [n for n in STAGE_INPUTS[stage] if n not in ctx.manifest]
        if missing:
            logger.warning("all: skipping %s (manifest lacks %s)", stage, missing)
            continue
        if stage == "build-careers" and not ctx.output(out.AFFILIATIONS_GEO).is_file():
            logger.warning("all: skipping build-careers and dependants (no affiliations geocoded)")
            continue
        if stage in ("annual-locations", "stocks", "flows") and not ctx.output(out.AUTHOR_CAREER).is_file():
            continue
        if stage == "paper-areas" and not ctx.output(out.FOS_LABELED).is_file():
            continue
        reports.append(run_stage(stage, ctx))
    return reports


def _options(suppress: bool) -> argparse.ArgumentParser:
    # Options are accepted before and after the subcommand; the subcommand
    # copy suppresses defaults so it cannot overwrite values given earlier.
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS if suppress else None)
    g = common.add_argument_group("pipeline options (each also settable as SCHOLAR_ENRICH_<NAME>)")
    g.add_argument("--manifest", help="manifest file listing dump subsets [MANIFEST]")
    g.add_argument("--out", dest="out_dir", help="output directory [OUT]")
    g.add_argument("--memory-budget", help="paper-index memory budget, e.g. 2G; spill to disk above it [MEMORY_BUDGET]")
    g.add_argument("--jobs", type=int, help="worker processes within a stage (default 1) [JOBS]")
    g.add_argument("--skip-malformed", action="store_const", const=True,
                   help="drop malformed input lines silently (still counted) [SKIP_MALFORMED]")
    g.add_argument("--max-distance-km", type=float,
                   help="leave affiliations farther than this from any gazetteer place unlocated [MAX_DISTANCE_KM]")
    g.add_argument("--languages", help="comma-separated language codes for detection [LANGUAGES]")
    g.add_argument("--max-authors", help="skip papers with more authors in ego networks; 'none' disables [MAX_AUTHORS]")
    g.add_argument("--fuzzy-threshold", type=float, help="country name similarity threshold [FUZZY_THRESHOLD]")
    g.add_argument("-v", "--verbose", action="store_const", const=True)
    return common


def build_parser() -> argparse.ArgumentParser:

    parser = argparse.ArgumentParser(
        prog="scholar-enrich",
        description="Enrich scholarly-graph dumps into geolocated, mobility, network and text subsets.",
        parents=[_options(False)],
    )
    sub = parser.add_subparsers(dest="subcommand", required=True, metavar="SUBCOMMAND")
    helps = {
        "geocode-affiliations": "reverse geocode + infobox merge -> AffiliationsGeo.csv",
        "build-careers": "join authorships with years and affiliation countries -> AuthorCareer.jsonl",
        "annual-locations": "annual locations and career nationality -> AuthorYearLocation.jsonl",
        "stocks": "migrant stocks per country-year -> StocksAnnual.csv",
        "flows": "country-to-country flows -> FlowsAnnual.csv, CountryAnnualFlowsAggregated.csv",
        "egonets": "annual co-authorship ego networks -> AuthorEgoNetworks.jsonl",
        "hindex": "cross-checked h-index per author -> Authors_Hindex.csv",
        "abstracts": "language, tokens and types of abstracts -> AbstractsProcessed.jsonl",
        "fos-propagate": "research-area labels over the FOS hierarchy -> FieldOfStudyLabeled.csv",
        "paper-areas": "research-area scores per paper -> PaperFieldsOfStudyLabeled.csv",
        "all": "every stage whose inputs are listed in the manifest, in dependency order",
    }
    sub_options = _options(True)
    for name in (*STAGES, "all"):
        sub.add_parser(name, parents=[sub_options], help=helps[name], description=helps[name])
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = PipelineConfig.resolve(args)
        run(args.subcommand, config)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ConsistencyError as exc:
        print(f"internal consistency error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
