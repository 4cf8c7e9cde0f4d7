"""Ground-truth generators and item data ingestion."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import DistanceMatrix, InvalidInputError, hemimetric_closure

EARTH_RADIUS_KM = 6371.0
POPULAR_THRESHOLD = 25
HIGH, LOW = "High", "Low"

RESTAURANT_CUISINES = {
    "Mexican": 50,
    "Thai": 26,
    "Chinese": 53,
    "Mediterranean": 75,
    "Italian": 86,
}
N_HIGH = 166
LAT_RANGE = (40.36, 40.50)
LON_RANGE = (-80.10, -79.85)

ITEM_HEADER = ["id", "cuisine", "review_count", "lat", "lon"]


def _check_coords(lat: float, lon: float) -> None:
    if not -90 <= lat <= 90:
        raise InvalidInputError(f"latitude {lat} outside [-90, 90]")
    if not -180 <= lon <= 180:
        raise InvalidInputError(f"longitude {lon} outside [-180, 180]")


@dataclass(frozen=True)
class ItemRecord:
    id: str
    cuisine: str
    review_count: int
    lat: float
    lon: float

    def __post_init__(self):
        _check_coords(self.lat, self.lon)
        if self.review_count < 0:
            raise InvalidInputError("review_count must be nonnegative")

    @property
    def popularity(self) -> str:
        return HIGH if self.review_count > POPULAR_THRESHOLD else LOW


@dataclass(frozen=True)
class AttributeWeights:
    w1: float
    w2: float
    w3: float
    w4: float

    def __post_init__(self):
        w = self.as_tuple()
        if any(x < 0 for x in w):
            raise InvalidInputError("attribute weights must be nonnegative")
        if abs(sum(w) - 1.0) > 1e-9:
            raise InvalidInputError(f"attribute weights sum to {sum(w)}, not 1")

    def as_tuple(self):
        return (self.w1, self.w2, self.w3, self.w4)


YELP_M1 = AttributeWeights(0.9, 0.0, 0.0, 0.1)
YELP_M2 = AttributeWeights(0.5, 0.2, 0.2, 0.1)


def _check_clusters(n: int, K: int) -> None:
    if n < 1:
        raise InvalidInputError("n must be positive")
    if not 1 <= K <= n:
        raise InvalidInputError(f"need 1 <= K <= n, got K={K}, n={n}")


def balanced_assignment(n: int, K: int, rng: np.random.Generator) -> np.ndarray:
    labels = np.arange(n) % K
    rng.shuffle(labels)
    return labels


def gen_clustered(n: int, K: int, r: float = 1.0, r_in: float = 0.1, seed=None):
    """Random (r_in, K)-clustered hemimetric and its cluster labels.

    Intra-cluster raw values are uniform on ``[0, r_in]``, inter-cluster on
    ``[r_in, r]``; the closure keeps both properties.
    """
    _check_clusters(n, K)
    if r <= 0 or not 0 <= r_in <= r:
        raise InvalidInputError("need r > 0 and 0 <= r_in <= r")
    rng = np.random.default_rng(seed)
    labels = balanced_assignment(n, K, rng)
    same = labels[:, None] == labels[None, :]
    W = np.where(same, rng.uniform(0, r_in, (n, n)), rng.uniform(r_in, r, (n, n)))
    np.fill_diagonal(W, 0.0)
    return hemimetric_closure(W, r), labels


def gen_quantized_clustered(n: int, K: int, r: float = 1.0, delta: float = 1 / 64, seed=None):
    """(0, K)-clustered hemimetric with every entry a multiple of ``delta``."""
    _check_clusters(n, K)
    if delta <= 0:
        raise InvalidInputError("delta must be positive")
    steps = r / delta
    if abs(steps - round(steps)) > 1e-9:
        raise InvalidInputError(f"r={r} is not a multiple of delta={delta}")
    steps = int(round(steps))
    rng = np.random.default_rng(seed)
    grid = rng.integers(1, steps + 1, (K, K)).astype(float)
    np.fill_diagonal(grid, 0.0)
    # closure on integer steps stays integral, so the scaled result is on-grid
    C = hemimetric_closure(grid, steps).entries * delta
    labels = balanced_assignment(n, K, rng)
    return DistanceMatrix(C[np.ix_(labels, labels)], r, validated=True), labels


def uniform_instance(n: int, value: float, r: float = 1.0) -> DistanceMatrix:
    """Every off-diagonal entry equal to ``value``; with ``value = r/2`` no triangle ever binds."""
    M = np.full((n, n), float(value))
    return DistanceMatrix(M, r, validated=True)


def great_circle_km(lat1, lon1, lat2, lon2) -> float:
    for lat, lon in ((lat1, lon1), (lat2, lon2)):
        _check_coords(lat, lon)
    p1, p2 = math.radians(lat1), math.radians(lat2)
    dp, dl = p2 - p1, math.radians(lon2 - lon1)
    h = math.sin(dp / 2) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dl / 2) ** 2
    return 2 * EARTH_RADIUS_KM * math.asin(min(1.0, math.sqrt(h)))


def _geo_matrix(items: Sequence[ItemRecord]) -> np.ndarray:
    lat = np.radians([it.lat for it in items])
    lon = np.radians([it.lon for it in items])
    dp = lat[None, :] - lat[:, None]
    dl = lon[None, :] - lon[:, None]
    h = np.sin(dp / 2) ** 2 + np.cos(lat)[:, None] * np.cos(lat)[None, :] * np.sin(dl / 2) ** 2
    return 2 * EARTH_RADIUS_KM * np.arcsin(np.minimum(1.0, np.sqrt(h)))


def gen_attribute_instance(items: Sequence[ItemRecord], weights: AttributeWeights,
                           r: float = 1.0, seed=None) -> DistanceMatrix:
    """Weighted attribute mix of cuisine, popularity, geography and noise, closed to a hemimetric.

    The popularity term is asymmetric: moving from a High item to a Low one costs r.
    """
    n = len(items)
    if n < 2:
        raise InvalidInputError("need at least two items")
    if not isinstance(weights, AttributeWeights):
        weights = AttributeWeights(*weights)
    rng = np.random.default_rng(seed)
    cuisine = np.array([it.cuisine for it in items])
    high = np.array([it.popularity == HIGH for it in items])
    w_cuisine = r * (cuisine[:, None] != cuisine[None, :])
    w_review = r * (high[:, None] & ~high[None, :])
    geo = _geo_matrix(items)
    off = ~np.eye(n, dtype=bool)
    lo, hi = geo[off].min(), geo[off].max()
    w_geo = r * (geo - lo) / (hi - lo) if hi > lo else np.zeros_like(geo)
    w_random = rng.uniform(0, r, (n, n))
    w1, w2, w3, w4 = weights.as_tuple()
    W = w1 * w_cuisine + w2 * w_review + w3 * w_geo + w4 * w_random
    np.fill_diagonal(W, 0.0)
    return hemimetric_closure(W, r)


def gen_synthetic_restaurants(seed=None) -> list[ItemRecord]:
    """290 synthetic restaurants matching the published cuisine and popularity counts."""
    rng = np.random.default_rng(seed)
    cuisines = np.array([c for c, k in RESTAURANT_CUISINES.items() for _ in range(k)])
    rng.shuffle(cuisines)
    n = len(cuisines)
    high = np.zeros(n, dtype=bool)
    high[rng.choice(n, N_HIGH, replace=False)] = True
    reviews = np.where(high, rng.integers(POPULAR_THRESHOLD + 1, 500, n),
                       rng.integers(0, POPULAR_THRESHOLD + 1, n))
    lat = rng.uniform(*LAT_RANGE, n)
    lon = rng.uniform(*LON_RANGE, n)
    return [ItemRecord(f"r{i:03d}", str(cuisines[i]), int(reviews[i]),
                       round(float(lat[i]), 6), round(float(lon[i]), 6)) for i in range(n)]


def subsample(items: Sequence, n: int, seed=None) -> list:
    """Deterministic prefix of a seeded shuffle."""
    if not 1 <= n <= len(items):
        raise InvalidInputError(f"cannot take {n} of {len(items)} items")
    order = np.random.default_rng(seed).permutation(len(items))
    return [items[i] for i in order[:n]]


def write_items_csv(path, items: Sequence[ItemRecord]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(ITEM_HEADER)
        for it in items:
            w.writerow([it.id, it.cuisine, it.review_count, repr(it.lat), repr(it.lon)])


def load_items_csv(path) -> list[ItemRecord]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"{path}: no such file")
    out = []
    with open(path, newline="") as fh:
        rows = csv.reader(fh)
        header = next(rows, None)
        if header != ITEM_HEADER:
            raise InvalidInputError(f"{path}:1: expected header {','.join(ITEM_HEADER)}")
        for lineno, row in enumerate(rows, start=2):
            if not row:
                continue
            if len(row) != len(ITEM_HEADER):
                raise InvalidInputError(f"{path}:{lineno}: expected 5 fields, got {len(row)}")
            try:
                out.append(ItemRecord(row[0], row[1], int(row[2]), float(row[3]), float(row[4])))
            except (ValueError, InvalidInputError) as exc:
                raise InvalidInputError(f"{path}:{lineno}: {exc}") from exc
    return out
