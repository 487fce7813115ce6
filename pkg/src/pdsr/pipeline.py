"""
End-to-end evaluation: split -> index -> graph -> recommend -> metrics.

A run repeats the whole pipeline ``repetitions`` times with seeds derived
from the master seed and reports per-platform averages. Sweeps re-run the
pipeline for every cell of a parameter grid.
"""

from __future__ import annotations

import dataclasses
import itertools
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from .data import (
    NORMALIZE_MODES,
    SplitSpec,
    load_movielens,
    load_wsdream,
    normalize,
    split_platforms,
)
from .exceptions import ConfigError
from .graph import build_graph
from .metrics import aqos, coverage, list_diversity, mae, rmse
from .recommend import RecommendationQuery, build_pool, greedy_topk
from .rng import derive_seed
from .synthetic import make_ratings, make_response_times

log = logging.getLogger(__name__)

DATASETS = ("wsdream", "movielens", "synthetic-wsdream", "synthetic-movielens")
CANDIDATE_SCOPES = ("unrated", "holdout")
METRICS_HEADER = "platform,H,T,lambda,xi,K,mae,rmse,aqos,ild,coverage,seconds"
_SPLIT_LABEL, _GRAPH_LABEL = 1, 2


@dataclass
class PipelineConfig:
    dataset: str = "wsdream"
    data_path: str | None = None
    normalize: str | None = None
    platform_users: tuple[int, ...] = (135, 204)
    holdout: int = 15
    min_records: int = 25
    targets: int = 15
    H: int = 3
    T: int = 9
    lam: float = 0.1
    xi: float = 0.3
    K: int = 5
    candidates: str = "unrated"
    seed: int = 0
    repetitions: int = 50
    report_platforms: tuple[int, ...] | None = None
    record_seconds: bool = True
    threads: int = 1
    synthetic_users: int = 339
    synthetic_services: int = 5825
    synthetic_seed: int = 0
    oracle_instances: int = 200
    oracle_max_candidates: int = 10
    oracle_cap: int = 10**6
    h_by_platform: dict[int, int] = field(default_factory=dict)
    lam_by_platform: dict[int, float] = field(default_factory=dict)
    xi_by_platform: dict[int, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.dataset not in DATASETS:
            raise ConfigError(f"dataset must be one of {DATASETS}, got {self.dataset!r}")
        if self.dataset in ("wsdream", "movielens") and not self.data_path:
            raise ConfigError(f"dataset={self.dataset} requires data_path")
        if self.normalize is None:
            self.normalize = "none" if self.dataset.endswith("movielens") else "inverted-minmax"
        if self.normalize not in NORMALIZE_MODES:
            raise ConfigError(f"normalize must be one of {NORMALIZE_MODES}, got {self.normalize!r}")
        if self.candidates not in CANDIDATE_SCOPES:
            raise ConfigError(f"candidates must be one of {CANDIDATE_SCOPES}, got {self.candidates!r}")
        for name in ("H", "K", "repetitions", "holdout", "threads"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        if self.T < 0:
            raise ConfigError("T must be non-negative")
        if self.lam < 0 or self.xi < 0:
            raise ConfigError("lambda and xi must be non-negative")
        if self.min_records < self.holdout + self.K:
            raise ConfigError("min_records must be at least holdout + K")

    @property
    def platform_ids(self) -> list[int]:
        return list(range(1, len(self.platform_users) + 1))

    def h_counts(self) -> list[int]:
        return [self.h_by_platform.get(p, self.H) for p in self.platform_ids]

    def lam_for(self, pid: int) -> float:
        return self.lam_by_platform.get(pid, self.lam)

    def xi_for(self, pid: int) -> float:
        return self.xi_by_platform.get(pid, self.xi)

    def reported(self) -> list[int]:
        if self.report_platforms is None:
            return self.platform_ids
        unknown = set(self.report_platforms) - set(self.platform_ids)
        if unknown:
            raise ConfigError(f"report_platforms names unknown platforms {sorted(unknown)}")
        return list(self.report_platforms)

    def split_spec(self, seed: int) -> SplitSpec:
        return SplitSpec(
            holdout_per_user=self.holdout,
            platform_user_counts=tuple(self.platform_users),
            min_records=self.min_records,
            targets_per_platform=self.targets,
            seed=seed,
        )


# ----------------------------------------------------------------------------
# key=value configuration files

def _int_list(v: str) -> tuple[int, ...]:
    return tuple(int(x) for x in v.split(",") if x.strip())


def _bool(v: str) -> bool:
    low = v.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


def _platforms(v: str):
    return None if v.strip().lower() == "all" else _int_list(v)


_SCALAR_KEYS: dict[str, tuple[str, Callable]] = {
    "dataset": ("dataset", str),
    "data_path": ("data_path", str),
    "normalize": ("normalize", str),
    "platform_users": ("platform_users", _int_list),
    "holdout": ("holdout", int),
    "min_records": ("min_records", int),
    "targets": ("targets", int),
    "H": ("H", int),
    "T": ("T", int),
    "lambda": ("lam", float),
    "xi": ("xi", float),
    "K": ("K", int),
    "candidates": ("candidates", str),
    "seed": ("seed", int),
    "repetitions": ("repetitions", int),
    "report_platforms": ("report_platforms", _platforms),
    "record_seconds": ("record_seconds", _bool),
    "threads": ("threads", int),
    "synthetic_users": ("synthetic_users", int),
    "synthetic_services": ("synthetic_services", int),
    "synthetic_seed": ("synthetic_seed", int),
    "oracle_instances": ("oracle_instances", int),
    "oracle_max_candidates": ("oracle_max_candidates", int),
    "oracle_cap": ("oracle_cap", int),
}
_PER_PLATFORM_KEYS = {"H": ("h_by_platform", int), "lambda": ("lam_by_platform", float), "xi": ("xi_by_platform", float)}


def parse_config_text(text: str) -> dict[str, str]:
    """Parse ``key=value`` lines; blank lines and ``#`` comments are ignored."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        out[key] = value
    return out


def config_from_mapping(values: Mapping[str, str]) -> PipelineConfig:
    kwargs: dict = {"h_by_platform": {}, "lam_by_platform": {}, "xi_by_platform": {}}
    for key, value in values.items():
        try:
            if key in _SCALAR_KEYS:
                name, conv = _SCALAR_KEYS[key]
                kwargs[name] = conv(value)
            elif "." in key and key.split(".", 1)[0] in _PER_PLATFORM_KEYS:
                base, pid = key.split(".", 1)
                name, conv = _PER_PLATFORM_KEYS[base]
                kwargs[name][int(pid)] = conv(value)
            else:
                raise ConfigError(f"unknown configuration key {key!r}")
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"bad value for {key!r}: {exc}") from None
    return PipelineConfig(**kwargs)


def load_config(path=None, overrides: Mapping[str, str] | None = None) -> PipelineConfig:
    values = {}
    if path is not None:
        try:
            values.update(parse_config_text(Path(path).read_text()))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
    values.update(overrides or {})
    return config_from_mapping(values)


# ----------------------------------------------------------------------------
# data

@lru_cache(maxsize=4)
def _cached_matrix(dataset, data_path, mode, n_users, n_services, synth_seed) -> np.ndarray:
    if dataset == "wsdream":
        raw = load_wsdream(data_path)
    elif dataset == "movielens":
        raw = load_movielens(data_path)
    elif dataset == "synthetic-wsdream":
        raw = make_response_times(n_users=n_users, n_services=n_services, seed=synth_seed)
    else:
        raw = make_ratings(n_users=n_users, n_items=n_services, seed=synth_seed)
    matrix = normalize(raw, mode)
    matrix.setflags(write=False)
    return matrix


def load_matrix(config: PipelineConfig) -> np.ndarray:
    """Normalised (users x items) matrix for ``config``; cached across calls."""
    return _cached_matrix(
        config.dataset,
        config.data_path,
        config.normalize,
        config.synthetic_users,
        config.synthetic_services,
        config.synthetic_seed,
    )


# ----------------------------------------------------------------------------
# runs

@dataclass
class PlatformMetrics:
    mae: float
    rmse: float
    aqos: float
    ild: float
    coverage: float
    seconds: float
    target_users: list[int]
    recommendations: dict[int, list[int]] = field(default_factory=dict)


@dataclass
class EvalReport:
    """Per-platform metrics averaged over repetitions, plus the parameters used."""

    platform: int
    mae: float
    rmse: float
    aqos: float
    ild: float
    coverage: float
    seconds: float
    params: dict
    repetitions: list[PlatformMetrics] = field(default_factory=list)
    error: str | None = None

    @property
    def target_users(self) -> list[list[int]]:
        return [r.target_users for r in self.repetitions]

    def csv_row(self, record_seconds: bool = True) -> str:
        p = self.params

        def num(x):
            return "nan" if x is None or (isinstance(x, float) and math.isnan(x)) else f"{x:.10g}"

        seconds = f"{self.seconds:.3f}" if record_seconds else ""
        return ",".join(
            [
                str(self.platform),
                p["H"],
                str(p["T"]),
                num(p["lambda"]),
                num(p["xi"]),
                str(p["K"]),
                num(self.mae),
                num(self.rmse),
                num(self.aqos),
                num(self.ild),
                num(self.coverage),
                seconds,
            ]
        )


def _params(config: PipelineConfig, pid: int) -> dict:
    hs = config.h_counts()
    return {
        "H": str(hs[0]) if len(set(hs)) == 1 else ";".join(map(str, hs)),
        "H_by_platform": hs,
        "T": config.T,
        "lambda": config.lam_for(pid),
        "xi": config.xi_for(pid),
        "K": config.K,
        "candidates": config.candidates,
        "seed": config.seed,
        "repetitions": config.repetitions,
        "normalize": config.normalize,
        "dataset": config.dataset,
    }


def run_repetition(
    matrix: np.ndarray,
    config: PipelineConfig,
    rep: int,
    transcript: list | None = None,
) -> dict[int, PlatformMetrics]:
    """One pass of split -> graph -> recommend -> score for every reported platform."""
    start = time.perf_counter()
    split = split_platforms(matrix, config.split_spec(derive_seed(config.seed, rep, _SPLIT_LABEL)))
    graph = build_graph(
        split.platforms,
        config.h_counts(),
        config.T,
        derive_seed(config.seed, rep, _GRAPH_LABEL),
        transcript=transcript,
    )
    reported = config.reported()
    shared = (time.perf_counter() - start) / max(len(reported), 1)

    out = {}
    for pid in reported:
        t0 = time.perf_counter()
        train, truth = split.platform(pid), split.truth(pid)
        preds, truths, rec_truths, known, lists = [], [], [], [], {}
        ild_values = []
        for holdout in split.targets[pid]:
            pool = build_pool(graph, train, holdout.user)
            preds.extend(pool.predicted[pool.positions(holdout.services)])
            if config.candidates == "holdout":
                pool = pool.restrict(holdout.services)
            truths.extend(holdout.truths)
            query = RecommendationQuery(holdout.user, pid, config.K, config.lam_for(pid), config.xi_for(pid))
            rec = greedy_topk(graph, train, query, pool=pool)
            col = truth.qos[:, truth.local_index(holdout.user)]
            rec_truths.append(col[rec.services])
            known.append(col[rec.services] != 0)
            lists[holdout.user] = rec.services
            if len(rec.services) > 1:
                ild_values.append(list_diversity(rec.services, truth.qos))
        has_targets = bool(split.targets[pid])
        out[pid] = PlatformMetrics(
            mae=mae(preds, truths) if has_targets else math.nan,
            rmse=rmse(preds, truths) if has_targets else math.nan,
            aqos=aqos(rec_truths) if has_targets else math.nan,
            ild=float(np.mean(ild_values)) if ild_values else math.nan,
            coverage=coverage(known) if has_targets else math.nan,
            seconds=shared + time.perf_counter() - t0,
            target_users=[h.user for h in split.targets[pid]],
            recommendations=lists,
        )
    return out


def _average(pid: int, config: PipelineConfig, reps: list[PlatformMetrics]) -> EvalReport:
    def mean(name):
        return float(np.mean([getattr(r, name) for r in reps]))

    return EvalReport(
        platform=pid,
        mae=mean("mae"),
        rmse=mean("rmse"),
        aqos=mean("aqos"),
        ild=mean("ild"),
        coverage=mean("coverage"),
        seconds=float(sum(r.seconds for r in reps)),
        params=_params(config, pid),
        repetitions=reps,
    )


def run_pipeline(
    config: PipelineConfig,
    matrix: np.ndarray | None = None,
    transcript: list | None = None,
) -> list[EvalReport]:
    """Run all repetitions and average per platform.

    ``seconds`` in each report is the summed wall-clock of the repetitions.
    Shared stages (split, indexing, graph) are split evenly across the
    reported platforms, so the per-platform figures add up to the total.
    """
    if matrix is None:
        matrix = load_matrix(config)

    def job(rep):
        rep_transcript = [] if transcript is not None else None
        return run_repetition(matrix, config, rep, rep_transcript), rep_transcript

    if config.threads > 1 and config.repetitions > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            results = list(pool.map(job, range(config.repetitions)))
    else:
        results = [job(rep) for rep in range(config.repetitions)]
    if transcript is not None:
        for _, rep_transcript in results:
            transcript.extend(rep_transcript)
    return [_average(pid, config, [r[pid] for r, _ in results]) for pid in config.reported()]


GRID_KEYS = ("H", "T", "lambda", "xi")


def parse_grid_values(key: str, text: str) -> list:
    """Parse ``"3,4,5"`` or an integer range ``"6..10"`` into a list of values."""
    conv = int if key in ("H", "T") else float
    values = []
    for part in str(text).split(","):
        part = part.strip()
        if not part:
            continue
        if ".." in part and key in ("H", "T"):
            lo, hi = (int(x) for x in part.split(".."))
            values.extend(range(lo, hi + 1))
        else:
            values.append(conv(part))
    if not values:
        raise ConfigError(f"empty grid for {key}")
    return values


def _cell_config(config: PipelineConfig, cell: Mapping[str, object]) -> PipelineConfig:
    changes = {}
    for key, value in cell.items():
        if key == "H":
            changes.update(H=value, h_by_platform={})
        elif key == "T":
            changes["T"] = value
        elif key == "lambda":
            changes.update(lam=value, lam_by_platform={})
        elif key == "xi":
            changes.update(xi=value, xi_by_platform={})
        else:
            raise ConfigError(f"cannot sweep over {key!r}; choose from {GRID_KEYS}")
    return dataclasses.replace(config, **changes)


def sweep(config: PipelineConfig, grid: Mapping[str, Sequence]) -> list[EvalReport]:
    """Run the pipeline on every grid cell; failing cells produce NaN rows with ``error`` set."""
    keys = [k for k in GRID_KEYS if k in grid]
    unknown = set(grid) - set(GRID_KEYS)
    if unknown:
        raise ConfigError(f"cannot sweep over {sorted(unknown)}; choose from {GRID_KEYS}")
    matrix = load_matrix(config)
    rows: list[EvalReport] = []
    for combo in itertools.product(*(grid[k] for k in keys)):
        cell = dict(zip(keys, combo))
        try:
            cfg = _cell_config(config, cell)
            rows.extend(run_pipeline(cfg, matrix))
        except Exception as exc:  # noqa: BLE001 - a failing cell must not abort the sweep
            log.error("sweep cell %s failed: %s", cell, exc)
            try:
                cfg = _cell_config(config, cell)
            except Exception:  # noqa: BLE001
                cfg = config
            for pid in config.reported():
                nan = math.nan
                rows.append(EvalReport(pid, nan, nan, nan, nan, nan, nan, _params(cfg, pid), error=str(exc)))
    return rows


def metrics_csv(reports: Sequence[EvalReport], record_seconds: bool = True) -> str:
    lines = [METRICS_HEADER] + [r.csv_row(record_seconds) for r in reports]
    return "\n".join(lines) + "\n"
