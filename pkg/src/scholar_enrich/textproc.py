"""Abstract cleaning, language identification and tokenisation."""
from __future__ import annotations

import html
import json
import re
import unicodedata
from collections import Counter, defaultdict
from functools import lru_cache
from importlib import resources

import numpy as np
import regex
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_text
from .exceptions import InputError
from .records import AbstractRecord

DEFAULT_LANGUAGES = ("en", "fr", "de", "es", "it", "pt", "nl")
UNDETERMINED = "und"

_TAG = re.compile(r"<(/?)([A-Za-z][A-Za-z0-9]*|!--.*?--|[!?][^<>]*)[^<>]*>?", re.DOTALL)
_BLOCK_TAGS = {
    "p", "br", "div", "li", "ul", "ol", "tr", "td", "th", "table", "h1", "h2", "h3", "h4", "h5", "h6",
    "section", "article", "blockquote", "hr", "title", "abstract", "sec",
}
_LETTER_RUN = re.compile(r"[^\W\d_]+")
_TOKEN = regex.compile(r"[\p{L}\p{M}\p{N}]+(?:[-'’][\p{L}\p{M}\p{N}]+)*")


def _strip_tag(match):
    return " " if match.group(2).lower() in _BLOCK_TAGS else ""


def clean_markup(text) -> str:
    """Drop HTML tags, decode entities and collapse whitespace to single spaces.

    Inline tags vanish without a trace (``x<i>y`` -> ``xy``); block-level
    tags such as ``<p>`` or ``<br>`` separate words. Unclosed tags are dropped.
    """
    text = _TAG.sub(_strip_tag, check_text(text))
    text = html.unescape(text)
    return " ".join(text.split())


def tokenize(text):
    """Casefolded word tokens with counts, and the sorted list of distinct types.

    Words are runs of letters, marks and digits; hyphens and apostrophes
    inside a word are kept (``covid-19``). Punctuation is dropped.
    """
    text = unicodedata.normalize("NFC", check_text(text)).casefold()
    tokens = Counter(_TOKEN.findall(text))
    return dict(sorted(tokens.items())), sorted(tokens)


def trigram_counts(text) -> Counter:
    """Within-word character trigrams with one pad space each side (`` th``, ``he ``)."""
    text = unicodedata.normalize("NFC", text).casefold()
    counts = Counter()
    for word in _LETTER_RUN.findall(text):
        padded = f" {word} "
        for i in range(len(padded) - 2):
            counts[padded[i:i + 3]] += 1
    return counts


def rank_profile(counts: Counter, size: int) -> list:
    return [g for g, _ in sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[:size]]


@lru_cache(maxsize=1)
def bundled_profiles() -> dict:
    path = resources.files("scholar_enrich") / "data" / "trigram_profiles.json"
    return json.loads(path.read_text(encoding="utf-8"))


class LanguageDetector(ClassifierMixin, BaseEstimator):
    """Rank-order character trigram language identifier (out-of-place distance).

    ``fit()`` without data loads the bundled profiles for ``languages``;
    ``fit(texts, labels)`` builds profiles from a labelled corpus instead.
    Texts shorter than ``min_length`` characters, or farther than
    ``max_distance`` (normalised to [0, 1]) from every profile, are ``"und"``.
    """

    def __init__(self, languages=DEFAULT_LANGUAGES, profile_size=300, min_length=20, max_distance=0.95):
        self.languages = languages
        self.profile_size = profile_size
        self.min_length = min_length
        self.max_distance = max_distance

    def fit(self, X=None, y=None):
        if X is None:
            available = bundled_profiles()
            missing = [lang for lang in self.languages if lang not in available]
            if missing:
                raise InputError(f"no bundled trigram profile for {missing}")
            profiles = {lang: available[lang][: self.profile_size] for lang in self.languages}
        else:
            if y is None:
                raise InputError("fit(X, y) needs labels when texts are given")
            pooled = defaultdict(Counter)
            for text, label in zip(X, y):
                pooled[label].update(trigram_counts(check_text(text)))
            profiles = {lang: rank_profile(c, self.profile_size) for lang, c in sorted(pooled.items())}
        self.classes_ = np.array(sorted(profiles), dtype=object)
        self.profiles_ = {lang: {g: i for i, g in enumerate(profiles[lang])} for lang in self.classes_}
        return self

    def distances(self, text) -> dict:
        """Normalised out-of-place distance from ``text`` to each profile."""
        check_is_fitted(self, "profiles_")
        doc = rank_profile(trigram_counts(text), self.profile_size)
        if not doc:
            return {lang: 1.0 for lang in self.classes_}
        worst = self.profile_size
        scale = len(doc) * worst
        out = {}
        for lang, ranks in self.profiles_.items():
            total = 0
            for i, gram in enumerate(doc):
                r = ranks.get(gram)
                total += worst if r is None else abs(i - r)
            out[lang] = total / scale
        return out

    def detect(self, text) -> str:
        text = check_text(text).strip()
        if len(text) < self.min_length:
            return UNDETERMINED
        dist = self.distances(text)
        lang = min(dist, key=lambda k: (dist[k], k))
        return lang if dist[lang] <= self.max_distance else UNDETERMINED

    def predict(self, X):
        return np.array([self.detect(t) for t in X], dtype=object)


@lru_cache(maxsize=1)
def default_detector() -> LanguageDetector:
    return LanguageDetector().fit()


def detect_language(text, detector: LanguageDetector = None) -> str:
    """ISO 639-1 code of ``text`` among the default languages, or ``"und"``."""
    return (detector or default_detector()).detect(text)


def process_abstract(paper_id, text, detector: LanguageDetector = None) -> AbstractRecord:
    cleaned = clean_markup(text)
    tokens, types = tokenize(cleaned)
    return AbstractRecord(paper_id, cleaned, detect_language(cleaned, detector), tokens, types)
