"""Input checks shared by the estimators and pipeline functions."""
import math

import numpy as np

from .exceptions import InputError


def check_latlon(latitude, longitude):
    try:
        lat = float(latitude)
        lon = float(longitude)
    except (TypeError, ValueError):
        raise InputError(f"coordinates must be numeric, got ({latitude!r}, {longitude!r})") from None
    if math.isnan(lat) or math.isnan(lon) or not -90.0 <= lat <= 90.0 or not -180.0 <= lon <= 180.0:
        raise InputError(f"coordinates out of range: ({lat}, {lon})")
    return lat, lon


def check_coordinate_array(X):
    """Return X as a float (n, 2) array of (lat, lon) rows, raising on bad values."""
    arr = np.asarray(X, dtype=float)
    if arr.ndim == 1 and arr.shape[0] == 2:
        arr = arr.reshape(1, 2)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise InputError(f"expected an (n, 2) array of (lat, lon), got shape {arr.shape}")
    lat, lon = arr[:, 0], arr[:, 1]
    bad = ~((lat >= -90) & (lat <= 90) & (lon >= -180) & (lon <= 180))
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise InputError(f"coordinates out of range at row {i}: ({lat[i]}, {lon[i]})")
    return arr


def check_citations(citations):
    values = list(citations)
    for v in values:
        if isinstance(v, bool) or not isinstance(v, (int, np.integer)) or v < 0:
            raise InputError(f"citation counts must be non-negative integers, got {v!r}")
    return values


def check_text(value, what="text"):
    if value is None:
        return ""
    if not isinstance(value, str):
        raise InputError(f"{what} must be a string, got {type(value).__name__}")
    return value


def check_positive_int(value, name):
    if isinstance(value, bool) or not isinstance(value, int) or value < 1:
        raise InputError(f"{name} must be a positive integer, got {value!r}")
    return value
