"""
Dataset ingestion, normalisation and platform partitioning.

Raw matrices are (users x items) float arrays with NaN marking entries that
were never observed. Normalised matrices replace NaN by 0 and map observed
values into (0, 1], so "observed" always stays distinguishable from "missing".
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .exceptions import DatasetError
from .federation import PlatformDataset
from .rng import make_rng

log = logging.getLogger(__name__)

WSDREAM_SHAPE = (339, 5825)
MOVIELENS_SHAPE = (6040, 3952)
EPSILON = 1e-6
NORMALIZE_MODES = ("minmax", "inverted-minmax", "none")


@dataclass(eq=False)
class RatingMatrix:
    values: np.ndarray  # users x items, NaN = missing
    source: str = ""

    @property
    def n_users(self) -> int:
        return self.values.shape[0]

    @property
    def n_items(self) -> int:
        return self.values.shape[1]

    @property
    def observed(self) -> np.ndarray:
        return ~np.isnan(self.values)


def load_wsdream(path) -> RatingMatrix:
    """Read a WS-DREAM QoS matrix (one whitespace-separated row per user, -1 = invalid).

    Raises:
        DatasetError: if the file is missing, empty, ragged or non-numeric.
    """
    path = Path(path)
    if not path.is_file():
        raise DatasetError(f"{path}: no such file")
    rows = []
    width = None
    with path.open() as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                row = np.array(line.split(), dtype=np.float64)
            except ValueError as exc:
                raise DatasetError(f"{path}:{lineno}: {exc}") from None
            if width is None:
                width = row.size
            elif row.size != width:
                raise DatasetError(f"{path}:{lineno}: expected {width} values, found {row.size}")
            rows.append(row)
    if not rows:
        raise DatasetError(f"{path}: file contains no data")
    values = np.vstack(rows)
    values[values < 0] = np.nan
    if values.shape != WSDREAM_SHAPE:
        warnings.warn(f"{path}: WS-DREAM matrix is {values.shape}, expected {WSDREAM_SHAPE}", stacklevel=2)
    return RatingMatrix(values, source=str(path))


def load_movielens(path) -> RatingMatrix:
    """Read ``UserID::MovieID::Rating::Timestamp`` lines into a dense user x movie matrix.

    Ids are 1-based; the matrix spans 1..max id on each axis.
    """
    path = Path(path)
    if not path.is_file():
        raise DatasetError(f"{path}: no such file")
    users, items, ratings = [], [], []
    with path.open(encoding="latin-1") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split("::")
            if len(parts) != 4:
                raise DatasetError(f"{path}:{lineno}: expected 4 '::'-separated fields, found {len(parts)}")
            try:
                u, i, r = int(parts[0]), int(parts[1]), float(parts[2])
                int(parts[3])
            except ValueError as exc:
                raise DatasetError(f"{path}:{lineno}: {exc}") from None
            if u < 1 or i < 1:
                raise DatasetError(f"{path}:{lineno}: ids must be positive")
            users.append(u)
            items.append(i)
            ratings.append(r)
    if not users:
        raise DatasetError(f"{path}: file contains no data")
    users = np.asarray(users) - 1
    items = np.asarray(items) - 1
    values = np.full((users.max() + 1, items.max() + 1), np.nan)
    values[users, items] = ratings
    if values.shape != MOVIELENS_SHAPE:
        warnings.warn(f"{path}: MovieLens matrix is {values.shape}, expected {MOVIELENS_SHAPE}", stacklevel=2)
    return RatingMatrix(values, source=str(path))


def normalize(raw: RatingMatrix | np.ndarray, mode: str = "inverted-minmax") -> np.ndarray:
    """Map observed entries into [EPSILON, 1] and missing entries to 0.

    ``minmax`` scales (x - min) / (max - min); ``inverted-minmax`` uses
    1 - that, so the smallest raw value (e.g. fastest response) scores 1.
    ``none`` keeps raw values and only requires them to be positive. When
    every observed value is equal, all observed entries become 1.
    """
    values = raw.values if isinstance(raw, RatingMatrix) else np.asarray(raw, dtype=np.float64)
    if mode not in NORMALIZE_MODES:
        raise ValueError(f"unknown normalization mode {mode!r}; expected one of {NORMALIZE_MODES}")
    observed = ~np.isnan(values)
    out = np.zeros(values.shape)
    if not observed.any():
        return out
    x = values[observed]
    if mode == "none":
        if np.any(x <= 0):
            raise ValueError("mode 'none' requires strictly positive observed values")
        out[observed] = x
        return out
    lo, hi = x.min(), x.max()
    if hi == lo:
        out[observed] = 1.0
        return out
    scaled = (x - lo) / (hi - lo)
    if mode == "inverted-minmax":
        scaled = 1.0 - scaled
    out[observed] = np.maximum(scaled, EPSILON)
    return out


@dataclass
class SplitSpec:
    """How to carve a normalised matrix into platforms and holdout sets.

    Attributes:
        holdout_per_user: Observed entries withheld from each target user.
        platform_user_counts: Users per platform, in platform order (ids 1, 2, ...).
        min_records: Users with fewer observed entries are dropped first.
        targets_per_platform: Target users drawn on each platform.
        seed: Seed for user partition, target choice and holdout choice.
    """

    holdout_per_user: int = 15
    platform_user_counts: Sequence[int] = (135, 204)
    min_records: int = 25
    targets_per_platform: int = 15
    seed: int = 0

    def __post_init__(self):
        if self.holdout_per_user < 1:
            raise ValueError("holdout_per_user must be at least 1")
        if not self.platform_user_counts or any(c < 1 for c in self.platform_user_counts):
            raise ValueError("platform_user_counts must be positive")
        if self.min_records < self.holdout_per_user + 1:
            raise ValueError("min_records must exceed holdout_per_user so training data stays non-empty")
        if self.targets_per_platform < 0:
            raise ValueError("targets_per_platform must be non-negative")


@dataclass
class TargetHoldout:
    user: int  # global user id
    services: np.ndarray
    truths: np.ndarray


@dataclass
class Split:
    """Training platforms plus the withheld ground truth.

    ``truth_platforms`` carry the full normalised data (holdout included) and
    are only used for scoring.
    """

    platforms: list[PlatformDataset]
    truth_platforms: list[PlatformDataset]
    targets: dict[int, list[TargetHoldout]] = field(default_factory=dict)
    retained_users: np.ndarray | None = None

    def platform(self, platform_id: int) -> PlatformDataset:
        for p in self.platforms:
            if p.platform_id == platform_id:
                return p
        raise KeyError(platform_id)

    def truth(self, platform_id: int) -> PlatformDataset:
        for p in self.truth_platforms:
            if p.platform_id == platform_id:
                return p
        raise KeyError(platform_id)

    def locate(self, user: int) -> int:
        """Platform id of a global user id."""
        for p in self.platforms:
            if np.any(p.user_ids == user):
                return p.platform_id
        raise KeyError(user)


def split_platforms(matrix: np.ndarray, spec: SplitSpec) -> Split:
    """Partition users across platforms and withhold holdout entries for target users.

    ``matrix`` is a normalised (users x items) array. The training platforms
    have every holdout entry zeroed before they are returned, so nothing
    downstream can see them.

    Raises:
        DatasetError: if the retained user count does not match the requested
            platform sizes or a platform has too few eligible target users.
    """
    matrix = np.asarray(matrix, dtype=np.float64)
    counts = (matrix != 0).sum(axis=1)
    retained = np.flatnonzero(counts >= spec.min_records)
    if int(sum(spec.platform_user_counts)) != retained.size:
        raise DatasetError(
            f"platform sizes {list(spec.platform_user_counts)} sum to {sum(spec.platform_user_counts)} "
            f"but {retained.size} users have at least {spec.min_records} records"
        )
    rng = make_rng(spec.seed)
    shuffled = rng.permutation(retained)
    train = matrix.copy()
    platforms, truths, targets = [], [], {}
    start = 0
    for pid, size in enumerate(spec.platform_user_counts, start=1):
        users = np.sort(shuffled[start:start + size])
        start += size
        if spec.targets_per_platform > users.size:
            raise DatasetError(
                f"platform {pid} has {users.size} users, cannot pick {spec.targets_per_platform} targets"
            )
        chosen = np.sort(rng.choice(users, size=spec.targets_per_platform, replace=False))
        holdouts = []
        for u in chosen:
            observed = np.flatnonzero(matrix[u] != 0)
            services = np.sort(rng.choice(observed, size=spec.holdout_per_user, replace=False))
            holdouts.append(TargetHoldout(int(u), services, matrix[u, services].copy()))
            train[u, services] = 0.0
        targets[pid] = holdouts
        platforms.append(PlatformDataset(pid, users, train[users].T.copy()))
        truths.append(PlatformDataset(pid, users, matrix[users].T.copy()))
    return Split(platforms, truths, targets, retained)
