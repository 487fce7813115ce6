"""
Random-hyperplane LSH for cosine similarity.

A family is a stack of Gaussian normal vectors. Each normal contributes one
bit: 1 when the hashed vector lies in the closed positive half-space of the
normal, 0 otherwise. Two vectors at angle theta agree on a single bit with
probability 1 - |theta|/pi, which is what makes the family locality-sensitive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .rng import make_rng


@dataclass(frozen=True, eq=False)
class LshFamily:
    """Hyperplane normals sampled for one platform.

    Attributes:
        platform_id: Platform that owns (and never shares) the normals.
        normals: Array of shape (H, dim); row k defines hash function k.
        seed: 64-bit seed the normals were drawn from.
    """

    platform_id: int
    normals: np.ndarray
    seed: int

    def __post_init__(self):
        normals = np.asarray(self.normals, dtype=np.float64)
        if normals.ndim != 2 or normals.shape[0] < 1 or normals.shape[1] < 1:
            raise ValueError(f"normals must have shape (H>=1, dim>=1), got {normals.shape}")
        normals.setflags(write=False)
        object.__setattr__(self, "normals", normals)

    @property
    def n_bits(self) -> int:
        return self.normals.shape[0]

    @property
    def dim(self) -> int:
        return self.normals.shape[1]

    def __eq__(self, other):
        if not isinstance(other, LshFamily):
            return NotImplemented
        return (
            self.platform_id == other.platform_id
            and self.seed == other.seed
            and np.array_equal(self.normals, other.normals)
        )

    def __hash__(self):
        return hash((self.platform_id, self.seed, self.normals.tobytes()))


@dataclass(frozen=True)
class ServiceSignature:
    service_id: int
    bits: tuple[int, ...]


def sample_family(dim: int, h: int, seed: int, platform_id: int = 0) -> LshFamily:
    """Draw ``h`` normals of dimension ``dim`` with i.i.d. N(0, 1) components."""
    if dim < 1 or h < 1:
        raise ValueError(f"dim and h must be positive, got dim={dim}, h={h}")
    normals = make_rng(seed).standard_normal((h, dim))
    return LshFamily(platform_id=platform_id, normals=normals, seed=int(seed))


def hash_bit(normal, qos) -> int:
    normal = np.asarray(normal, dtype=np.float64)
    qos = np.asarray(qos, dtype=np.float64)
    if normal.shape != qos.shape:
        raise ValueError(f"dimension mismatch: normal {normal.shape} vs qos {qos.shape}")
    # sign test on the inner product; the zero vector hashes to 1
    return int(float(normal @ qos) >= 0.0)


def hash_vector(family: LshFamily, qos, service_id: int = 0) -> ServiceSignature:
    qos = np.asarray(qos, dtype=np.float64)
    if qos.shape != (family.dim,):
        raise ValueError(f"qos vector has shape {qos.shape}, family expects ({family.dim},)")
    bits = tuple(hash_bit(normal, qos) for normal in family.normals)
    return ServiceSignature(service_id=int(service_id), bits=bits)


def hash_matrix(family: LshFamily, qos: np.ndarray) -> np.ndarray:
    """Hash every row of ``qos`` (shape (M, dim)) at once.

    Returns:
        uint8 array of shape (M, H); row i equals ``hash_vector(family, qos[i]).bits``.
    """
    qos = np.asarray(qos, dtype=np.float64)
    if qos.ndim != 2 or qos.shape[1] != family.dim:
        raise ValueError(f"qos matrix has shape {qos.shape}, family expects (M, {family.dim})")
    return (qos @ family.normals.T >= 0.0).astype(np.uint8)


def angle_between(u, v) -> float:
    """Angle in [0, pi]; pairs involving a zero vector get 0 (they always collide)."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return float(np.arccos(np.clip((u @ v) / (nu * nv), -1.0, 1.0)))


def collision_probability(theta: float) -> float:
    if not abs(theta) <= math.pi:
        raise ValueError(f"|theta| must be <= pi, got {theta}")
    return 1.0 - abs(theta) / math.pi


def edge_probability(angles: Sequence[float], h_counts: Sequence[int], t: int) -> float:
    """Probability that two services end up adjacent after ``t`` indexing rounds.

    A round links the pair when all sum(h_counts) bits agree (AND within and
    across platforms); the graph keeps the edge if any round links it (OR
    over rounds).
    """
    if len(angles) != len(h_counts) or len(angles) == 0:
        raise ValueError("angles and h_counts must be non-empty and of equal length")
    if t < 0:
        raise ValueError(f"t must be non-negative, got {t}")
    if any(h < 0 for h in h_counts):
        raise ValueError("h_counts must be non-negative")
    per_round = 1.0
    for theta, h in zip(angles, h_counts):
        per_round *= collision_probability(theta) ** h
    return 1.0 - (1.0 - per_round) ** t
