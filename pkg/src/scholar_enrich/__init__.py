"""Batch enrichment of scholarly-graph dumps.

Turns raw paper/author/affiliation tables into geolocated affiliations,
author careers, migrant stocks and flows, co-authorship ego networks,
h-indexes, processed abstracts and discipline-labelled fields of study.
"""
from .exceptions import ConsistencyError, DependencyError, InputError, ValidationError
from .fos import FosLabelPropagator
from .geocode import CountryNormalizer, CountryTable, Gazetteer, ReverseGeocoder
from .hindex import HIndexTransformer, h_index_checked
from .textproc import LanguageDetector

__version__ = "0.1.0"

__all__ = [
    "ConsistencyError",
    "CountryNormalizer",
    "CountryTable",
    "DependencyError",
    "FosLabelPropagator",
    "Gazetteer",
    "HIndexTransformer",
    "InputError",
    "LanguageDetector",
    "ReverseGeocoder",
    "ValidationError",
    "h_index_checked",
]
