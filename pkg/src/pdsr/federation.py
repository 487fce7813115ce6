"""
Cross-platform service indexing with a signature-only message boundary.

Each platform hashes its own QoS columns with a privately sampled LSH family
and publishes a :class:`SignatureMessage` holding nothing but service ids and
packed bits. Indices are assembled exclusively from decoded messages, so raw
QoS values never leave the platform that owns them.

Wire layout (all integers little-endian)::

    magic "PDSR" | version u8 = 1 | platform_id u32 | round u32 | H u16 | count u32
    | count x (service_id u64, ceil(H / 8) packed signature bytes)

Signature bits are packed eight per byte, least significant bit first, with
zero padding in the unused high bits of the last byte.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .exceptions import DecodeError
from .lsh import hash_matrix, sample_family
from .rng import derive_seed

MAGIC = b"PDSR"
VERSION = 1
_HEADER = struct.Struct("<4sBIIHI")
HEADER_SIZE = _HEADER.size  # 19 bytes


@dataclass(eq=False)
class PlatformDataset:
    """QoS observations held by one platform.

    Attributes:
        platform_id: Identifier of the platform.
        user_ids: Global ids of the platform's users, one per column of ``qos``.
        qos: Array of shape (M, N_r). Entry (i, j) is the QoS of service i for
            local user j; 0 means the user never invoked the service.
    """

    platform_id: int
    user_ids: np.ndarray
    qos: np.ndarray

    def __post_init__(self):
        self.user_ids = np.asarray(self.user_ids, dtype=np.int64)
        self.qos = np.asarray(self.qos, dtype=np.float64)
        if self.qos.ndim != 2:
            raise ValueError(f"qos must be a 2-d (services x users) array, got {self.qos.shape}")
        if self.qos.shape[1] != self.user_ids.shape[0]:
            raise ValueError(
                f"qos has {self.qos.shape[1]} user columns but {self.user_ids.shape[0]} user ids were given"
            )
        if len(np.unique(self.user_ids)) != len(self.user_ids):
            raise ValueError("user ids must be unique within a platform")
        if not np.all(np.isfinite(self.qos)) or np.any(self.qos < 0):
            raise ValueError("QoS values must be finite and non-negative")

    @property
    def n_services(self) -> int:
        return self.qos.shape[0]

    @property
    def n_users(self) -> int:
        return self.qos.shape[1]

    def local_index(self, user_id: int) -> int:
        hits = np.flatnonzero(self.user_ids == user_id)
        if hits.size == 0:
            raise KeyError(f"user {user_id} is not on platform {self.platform_id}")
        return int(hits[0])


def check_platforms(platforms: Sequence[PlatformDataset]) -> int:
    """Validate a federation and return its common service count M."""
    if not platforms:
        raise ValueError("at least one platform is required")
    m = platforms[0].n_services
    for p in platforms:
        if p.n_services != m:
            raise ValueError(
                f"platform {p.platform_id} covers {p.n_services} services, expected {m}"
            )
    ids = [p.platform_id for p in platforms]
    if len(set(ids)) != len(ids):
        raise ValueError(f"duplicate platform ids: {ids}")
    users = np.concatenate([p.user_ids for p in platforms])
    if len(np.unique(users)) != len(users):
        raise ValueError("user populations of different platforms must be disjoint")
    return m


@dataclass(frozen=True)
class ServiceIndex:
    service_id: int
    index_bits: tuple[int, ...]


@dataclass(eq=False)
class SignatureMessage:
    """Signatures one platform publishes for one indexing round.

    ``bits`` has shape (count, h) with entries in {0, 1}; row k belongs to
    ``service_ids[k]``.
    """

    platform_id: int
    round: int
    h: int
    service_ids: np.ndarray
    bits: np.ndarray

    def __post_init__(self):
        self.service_ids = np.asarray(self.service_ids, dtype=np.uint64).reshape(-1)
        bits = np.asarray(self.bits)
        if bits.size == 0:
            bits = bits.reshape(len(self.service_ids), self.h)
        if bits.ndim != 2 or bits.shape != (len(self.service_ids), self.h):
            raise ValueError(
                f"bits must have shape ({len(self.service_ids)}, {self.h}), got {bits.shape}"
            )
        if bits.dtype.kind == "f" or not np.isin(bits, (0, 1)).all():
            raise ValueError("signature payload may only contain binary values")
        self.bits = bits.astype(np.uint8)
        if not 1 <= self.h <= 0xFFFF:
            raise ValueError(f"h must fit in u16 and be positive, got {self.h}")

    @property
    def payload(self) -> list[tuple[int, tuple[int, ...]]]:
        return [(int(s), tuple(int(b) for b in row)) for s, row in zip(self.service_ids, self.bits)]

    def __eq__(self, other):
        if not isinstance(other, SignatureMessage):
            return NotImplemented
        return (
            (self.platform_id, self.round, self.h) == (other.platform_id, other.round, other.h)
            and np.array_equal(self.service_ids, other.service_ids)
            and np.array_equal(self.bits, other.bits)
        )


def _entry_dtype(h: int) -> np.dtype:
    return np.dtype([("sid", "<u8"), ("sig", "u1", ((h + 7) // 8,))])


def serialize_message(message: SignatureMessage) -> bytes:
    header = _HEADER.pack(
        MAGIC, VERSION, message.platform_id, message.round, message.h, len(message.service_ids)
    )
    entries = np.zeros(len(message.service_ids), dtype=_entry_dtype(message.h))
    entries["sid"] = message.service_ids
    if len(message.service_ids):
        entries["sig"] = np.packbits(message.bits, axis=1, bitorder="little")
    return header + entries.tobytes()


def _parse(data: bytes):
    """Parse header and entries without enforcing the exact-length rule."""
    if not isinstance(data, (bytes, bytearray, memoryview)):
        raise DecodeError(f"expected bytes, got {type(data).__name__}")
    data = bytes(data)
    if len(data) < HEADER_SIZE:
        raise DecodeError(f"message is {len(data)} bytes, shorter than the {HEADER_SIZE}-byte header")
    magic, version, platform_id, rnd, h, count = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise DecodeError(f"bad magic {magic!r}")
    if version != VERSION:
        raise DecodeError(f"unsupported version {version}")
    if h == 0:
        raise DecodeError("signature length H must be positive")
    dtype = _entry_dtype(h)
    body = len(data) - HEADER_SIZE
    if body < count * dtype.itemsize:
        raise DecodeError(
            f"truncated payload: {count} entries need {count * dtype.itemsize} bytes, got {body}"
        )
    entries = np.frombuffer(data, dtype=dtype, count=count, offset=HEADER_SIZE)
    trailing = body - count * dtype.itemsize
    return platform_id, rnd, h, entries, trailing


def deserialize_message(data: bytes) -> SignatureMessage:
    """Strictly decode message bytes.

    Raises:
        DecodeError: on bad magic/version, truncation, trailing bytes or
            non-zero padding bits.
    """
    platform_id, rnd, h, entries, trailing = _parse(data)
    if trailing:
        raise DecodeError(f"{trailing} unexpected trailing bytes")
    bits = np.unpackbits(entries["sig"], axis=1, bitorder="little")
    if bits.shape[0] and bits[:, h:].any():
        raise DecodeError("non-zero padding bits in signature")
    return SignatureMessage(
        platform_id=platform_id,
        round=rnd,
        h=h,
        service_ids=entries["sid"].copy(),
        bits=bits[:, :h].reshape(len(entries), h),
    )


@dataclass
class AuditResult:
    passed: bool
    violations: list[str] = field(default_factory=list)

    def __bool__(self):
        return self.passed


def audit_privacy(data: bytes) -> AuditResult:
    """Check that a wire message carries only service ids and signature bits.

    Any byte that is not accounted for by the declared id/bit layout (trailing
    data, set padding bits, repeated service ids) is reported as a violation,
    since that is where a real-valued field would have to hide.

    Raises:
        DecodeError: if the bytes are not a message at all.
    """
    platform_id, rnd, h, entries, trailing = _parse(data)
    violations = []
    if trailing:
        violations.append(f"{trailing} bytes beyond the declared {len(entries)} entries")
    if len(entries):
        bits = np.unpackbits(entries["sig"], axis=1, bitorder="little")
        bad = np.flatnonzero(bits[:, h:].any(axis=1))
        if bad.size:
            violations.append(f"padding bits set in {bad.size} signatures (first entry {int(bad[0])})")
        if len(np.unique(entries["sid"])) != len(entries):
            violations.append("repeated service ids in payload")
    return AuditResult(passed=not violations, violations=violations)


def platform_signatures(
    platform: PlatformDataset, h: int, seed: int, round_: int = 1
) -> np.ndarray:
    """Hash all services of one platform for one round; returns (M, h) uint8 bits."""
    family = sample_family(
        platform.n_users, h, derive_seed(seed, platform.platform_id, round_), platform.platform_id
    )
    return hash_matrix(family, platform.qos)


def publish(platform: PlatformDataset, h: int, seed: int, round_: int = 1) -> bytes:
    bits = platform_signatures(platform, h, seed, round_)
    message = SignatureMessage(
        platform_id=platform.platform_id,
        round=round_,
        h=h,
        service_ids=np.arange(platform.n_services, dtype=np.uint64),
        bits=bits,
    )
    return serialize_message(message)


def assemble_indices(messages: Iterable[bytes], n_services: int) -> np.ndarray:
    """Concatenate decoded signatures in ascending platform-id order.

    Returns:
        uint8 array of shape (n_services, sum of H over platforms).
    """
    decoded = sorted((deserialize_message(m) for m in messages), key=lambda m: m.platform_id)
    if not decoded:
        raise ValueError("no messages to assemble")
    blocks = []
    for msg in decoded:
        block = np.zeros((n_services, msg.h), dtype=np.uint8)
        seen = np.zeros(n_services, dtype=bool)
        ids = msg.service_ids.astype(np.int64)
        if ids.size and (ids.min() < 0 or ids.max() >= n_services):
            raise ValueError(f"platform {msg.platform_id} sent a service id outside [0, {n_services})")
        block[ids] = msg.bits
        seen[ids] = True
        if not seen.all():
            raise ValueError(f"platform {msg.platform_id} did not cover all {n_services} services")
        blocks.append(block)
    return np.concatenate(blocks, axis=1)


def index_matrix(
    platforms: Sequence[PlatformDataset],
    h_counts: Sequence[int],
    seed: int,
    round_: int = 1,
    transcript: list | None = None,
) -> np.ndarray:
    """Run one indexing round and return the (M, sum H) index bit matrix.

    Every message that crosses a platform boundary is appended to
    ``transcript`` when one is given.
    """
    m = check_platforms(platforms)
    if len(h_counts) != len(platforms):
        raise ValueError(f"got {len(h_counts)} H values for {len(platforms)} platforms")
    messages = [publish(p, int(h), seed, round_) for p, h in zip(platforms, h_counts)]
    if transcript is not None:
        transcript.extend(messages)
    return assemble_indices(messages, m)


def build_indices(
    platforms: Sequence[PlatformDataset],
    h_counts: Sequence[int],
    seed: int,
    round_: int = 1,
    transcript: list | None = None,
) -> dict[int, ServiceIndex]:
    """Index every service by concatenating its per-platform signatures."""
    bits = index_matrix(platforms, h_counts, seed, round_, transcript)
    return {i: ServiceIndex(i, tuple(int(b) for b in row)) for i, row in enumerate(bits)}
