"""
Synthetic stand-ins for the WS-DREAM and MovieLens matrices.

Used by tests, demos and the ``dataset=synthetic`` CLI mode. Both generators
plant cluster structure (services that behave alike for the same user
groups) so the LSH graph has something to find.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .data import RatingMatrix
from .rng import make_rng


def make_response_times(
    n_users: int = 339,
    n_services: int = 5825,
    n_clusters: int = 12,
    n_groups: int = 6,
    missing_rate: float = 0.05,
    seed: int = 0,
) -> RatingMatrix:
    """Dense response-time matrix (seconds) shaped like WS-DREAM.

    log(rt) = base + user effect + service effect + group/cluster interaction
    + noise, clipped to [0.001, 20] seconds; ``missing_rate`` of entries are NaN.
    """
    rng = make_rng(seed)
    group = rng.integers(0, n_groups, n_users)
    cluster = rng.integers(0, n_clusters, n_services)
    interaction = rng.normal(0.0, 1.0, (n_groups, n_clusters))
    log_rt = (
        -0.7
        + rng.normal(0.0, 0.4, n_users)[:, None]
        + rng.normal(0.0, 0.6, n_services)[None, :]
        + interaction[group][:, cluster]
        + rng.normal(0.0, 0.3, (n_users, n_services))
    )
    rt = np.clip(np.exp(log_rt), 0.001, 20.0)
    rt[rng.random(rt.shape) < missing_rate] = np.nan
    return RatingMatrix(np.round(rt, 3), source="synthetic-response-times")


def make_ratings(
    n_users: int = 600,
    n_items: int = 400,
    n_factors: int = 4,
    mean_records: float = 60.0,
    min_records: int = 25,
    seed: int = 0,
) -> RatingMatrix:
    """Sparse 1..5 star ratings shaped like MovieLens.

    Every user rates at least ``min_records`` items; popular items are rated
    more often.
    """
    rng = make_rng(seed)
    u = rng.normal(0.0, 1.0, (n_users, n_factors))
    v = rng.normal(0.0, 1.0, (n_items, n_factors))
    popularity = rng.pareto(1.5, n_items) + 1.0
    popularity /= popularity.sum()
    values = np.full((n_users, n_items), np.nan)
    for user in range(n_users):
        count = int(np.clip(rng.poisson(mean_records), min_records, n_items))
        items = rng.choice(n_items, size=count, replace=False, p=popularity)
        score = 3.5 + 0.8 * (v[items] @ u[user]) / np.sqrt(n_factors) + rng.normal(0.0, 0.5, count)
        values[user, items] = np.clip(np.rint(score), 1, 5)
    return RatingMatrix(values, source="synthetic-ratings")


def pair_with_angle(theta: float, dim: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Two non-negative vectors in R^dim at angle ``theta`` (0 <= theta <= pi/2).

    The pair spans two random coordinates, so it is non-negative like QoS data.
    """
    if not 0.0 <= theta <= np.pi / 2:
        raise ValueError("non-negative vectors need 0 <= theta <= pi/2")
    if dim < 2:
        raise ValueError("dim must be at least 2")
    a, b = rng.choice(dim, size=2, replace=False)
    scale = rng.uniform(0.5, 2.0, 2)
    u = np.zeros(dim)
    v = np.zeros(dim)
    u[a] = scale[0]
    v[a] = scale[1] * np.cos(theta)
    v[b] = scale[1] * np.sin(theta)
    return u, v


def write_wsdream(path, raw: RatingMatrix) -> Path:
    path = Path(path)
    values = np.where(np.isnan(raw.values), -1.0, raw.values)
    np.savetxt(path, values, fmt="%.3f", delimiter="\t")
    return path


def write_movielens(path, raw: RatingMatrix) -> Path:
    path = Path(path)
    users, items = np.nonzero(~np.isnan(raw.values))
    with path.open("w") as fh:
        for t, (u, i) in enumerate(zip(users, items)):
            fh.write(f"{u + 1}::{i + 1}::{int(raw.values[u, i])}::{978300000 + t}\n")
    return path
