"""Prediction error and recommendation quality metrics."""

from __future__ import annotations

import itertools
from typing import Sequence

import numpy as np

from .recommend import jaccard_dissimilarity


def _pair(preds, truths):
    preds = np.asarray(preds, dtype=np.float64).ravel()
    truths = np.asarray(truths, dtype=np.float64).ravel()
    if preds.shape != truths.shape:
        raise ValueError(f"length mismatch: {preds.size} predictions vs {truths.size} truths")
    if preds.size == 0:
        raise ValueError("no predictions to score")
    return preds, truths


def mae(preds, truths) -> float:
    preds, truths = _pair(preds, truths)
    return float(np.mean(np.abs(preds - truths)))


def rmse(preds, truths) -> float:
    preds, truths = _pair(preds, truths)
    return float(np.sqrt(np.mean((preds - truths) ** 2)))


def aqos(truths_per_list: Sequence[Sequence[float]]) -> float:
    """Mean ground-truth QoS over every recommended (user, service) pair.

    ``truths_per_list[u]`` holds the true values of user u's recommended
    services; services the user never invoked should be passed as 0.
    """
    flat = [float(v) for row in truths_per_list for v in row]
    if not flat:
        raise ValueError("no recommendations to score")
    return float(np.mean(flat))


def coverage(known_per_list: Sequence[Sequence[bool]]) -> float:
    """Fraction of recommended entries whose ground truth is known."""
    flat = [bool(v) for row in known_per_list for v in row]
    if not flat:
        raise ValueError("no recommendations to score")
    return float(np.mean(flat))


def list_diversity(services: Sequence[int], truth_qos: np.ndarray) -> float:
    """Ordered-pair Jaccard sum over one list divided by K(K-1).

    ``truth_qos`` is the (M x N_r) ground-truth matrix of the platform.
    """
    k = len(services)
    if k <= 1:
        raise ValueError("list diversity needs at least two services")
    total = 0.0
    for a, b in itertools.permutations(services, 2):
        total += jaccard_dissimilarity(truth_qos[a], truth_qos[b])
    return total / (k * (k - 1))


def ild(lists: Sequence[Sequence[int]], truth_qos: np.ndarray) -> float:
    if not lists:
        raise ValueError("no recommendation lists to score")
    return float(np.mean([list_diversity(services, truth_qos) for services in lists]))
