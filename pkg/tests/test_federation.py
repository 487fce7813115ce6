import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_platforms
from pdsr.exceptions import DecodeError
from pdsr.federation import (
    HEADER_SIZE,
    PlatformDataset,
    SignatureMessage,
    assemble_indices,
    audit_privacy,
    build_indices,
    check_platforms,
    deserialize_message,
    index_matrix,
    platform_signatures,
    publish,
    serialize_message,
)
from pdsr.lsh import hash_vector, sample_family
from pdsr.rng import derive_seed


def message(h=3, count=5, pid=1, rnd=2, seed=0):
    rng = np.random.default_rng(seed)
    return SignatureMessage(pid, rnd, h, np.arange(count), rng.integers(0, 2, (count, h)))


@st.composite
def messages(draw):
    h = draw(st.integers(1, 20))
    count = draw(st.integers(0, 12))
    ids = draw(st.lists(st.integers(0, 2**64 - 1), min_size=count, max_size=count, unique=True))
    bits = draw(st.lists(st.lists(st.integers(0, 1), min_size=h, max_size=h), min_size=count, max_size=count))
    return SignatureMessage(
        draw(st.integers(0, 2**32 - 1)),
        draw(st.integers(0, 2**32 - 1)),
        h,
        np.array(ids, dtype=np.uint64),
        np.array(bits, dtype=np.uint8).reshape(count, h),
    )


class TestPlatformDataset:
    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            PlatformDataset(1, [0, 1], [[0.5, -0.1]])

    def test_rejects_nan(self):
        with pytest.raises(ValueError):
            PlatformDataset(1, [0], [[np.nan]])

    def test_rejects_column_mismatch(self):
        with pytest.raises(ValueError):
            PlatformDataset(1, [0, 1, 2], np.zeros((4, 2)))

    def test_rejects_duplicate_users(self):
        with pytest.raises(ValueError):
            PlatformDataset(1, [3, 3], np.zeros((4, 2)))

    def test_local_index(self):
        p = PlatformDataset(1, [7, 3, 9], np.zeros((2, 3)))
        assert p.local_index(9) == 2
        with pytest.raises(KeyError):
            p.local_index(4)

    def test_check_platforms(self, platforms):
        assert check_platforms(platforms) == 40

    def test_check_platforms_mismatched_services(self):
        a = PlatformDataset(1, [0], np.zeros((3, 1)))
        b = PlatformDataset(2, [1], np.zeros((4, 1)))
        with pytest.raises(ValueError):
            check_platforms([a, b])

    def test_check_platforms_overlapping_users(self):
        a = PlatformDataset(1, [0, 1], np.zeros((3, 2)))
        b = PlatformDataset(2, [1, 2], np.zeros((3, 2)))
        with pytest.raises(ValueError):
            check_platforms([a, b])


class TestCodec:
    def test_known_bytes(self):
        # hand-assembled with struct, independent of the codec
        msg = SignatureMessage(3, 7, 10, [5, 2**40], [[1, 0, 1, 1, 0, 0, 0, 0, 1, 1], [0] * 9 + [1]])
        expected = (
            b"PDSR" + bytes([1]) + struct.pack("<IIHI", 3, 7, 10, 2)
            + struct.pack("<Q", 5) + bytes([0b00001101, 0b00000011])
            + struct.pack("<Q", 2**40) + bytes([0b00000000, 0b00000010])
        )
        assert serialize_message(msg) == expected

    def test_layout_length(self):
        assert len(serialize_message(message(h=3, count=5))) == HEADER_SIZE + 5 * (8 + 1)
        assert HEADER_SIZE == 19

    def test_empty_payload(self):
        msg = SignatureMessage(1, 1, 4, [], np.zeros((0, 4), dtype=np.uint8))
        data = serialize_message(msg)
        assert len(data) == HEADER_SIZE
        back = deserialize_message(data)
        assert back == msg and back.payload == []

    @given(messages())
    def test_round_trip(self, msg):
        assert deserialize_message(serialize_message(msg)) == msg

    def test_rejects_float_payload(self):
        with pytest.raises(ValueError):
            SignatureMessage(1, 1, 2, [0], np.array([[0.25, 1.0]]))

    def test_rejects_non_binary(self):
        with pytest.raises(ValueError):
            SignatureMessage(1, 1, 2, [0], [[2, 1]])

    @pytest.mark.parametrize(
        "mutate",
        [
            lambda d: d[:-1],
            lambda d: d + b"\x00",
            lambda d: b"XDSR" + d[4:],
            lambda d: d[:4] + bytes([2]) + d[5:],
            lambda d: d[:HEADER_SIZE - 1],
            lambda d: d[:13] + struct.pack("<H", 0) + d[15:],
        ],
        ids=["truncated", "trailing", "magic", "version", "short-header", "zero-h"],
    )
    def test_malformed(self, mutate):
        with pytest.raises(DecodeError):
            deserialize_message(mutate(serialize_message(message())))

    def test_padding_bits_rejected(self):
        data = bytearray(serialize_message(message(h=3, count=1)))
        data[-1] |= 0b1000_0000
        with pytest.raises(DecodeError):
            deserialize_message(bytes(data))

    def test_not_bytes(self):
        with pytest.raises(DecodeError):
            deserialize_message("PDSR")


class TestAudit:
    def test_legal_message_passes(self):
        assert audit_privacy(serialize_message(message()))

    def test_published_message_passes(self, platforms):
        assert audit_privacy(publish(platforms[0], 4, seed=1))

    def test_embedded_qos_value_fails(self):
        data = serialize_message(message()) + struct.pack("<d", 0.734)
        result = audit_privacy(data)
        assert not result.passed
        assert any("bytes beyond" in v for v in result.violations)

    def test_value_smuggled_in_padding_fails(self):
        data = bytearray(serialize_message(message(h=2, count=3)))
        data[HEADER_SIZE + 8] |= 0b0111_0000
        assert not audit_privacy(bytes(data))

    def test_repeated_ids_fail(self):
        msg = SignatureMessage(1, 1, 2, [4, 4], [[0, 1], [1, 1]])
        assert not audit_privacy(serialize_message(msg))

    def test_fuzz_random_bytes(self):
        rng = np.random.default_rng(99)
        for _ in range(10**4):
            data = rng.integers(0, 256, int(rng.integers(0, 80)), dtype=np.uint8).tobytes()
            with pytest.raises(DecodeError):
                audit_privacy(data)
            with pytest.raises(DecodeError):
                deserialize_message(data)

    @settings(max_examples=300)
    @given(st.binary(max_size=64), st.integers(0, 60))
    def test_fuzz_mutated_messages(self, junk, cut):
        data = serialize_message(message(h=5, count=4))
        mutated = data[:cut] + junk
        try:
            result = audit_privacy(mutated)
        except DecodeError:
            return
        # a passing message has no unaccounted byte: it re-encodes to itself
        if result.passed:
            assert serialize_message(deserialize_message(mutated)) == mutated


class TestIndices:
    def test_single_platform_index_is_signature(self, platforms):
        p = platforms[0]
        idx = build_indices([p], [3], seed=5)
        fam = sample_family(p.n_users, 3, derive_seed(5, p.platform_id, 1), p.platform_id)
        for i in (0, 7, 39):
            assert idx[i].index_bits == hash_vector(fam, p.qos[i]).bits

    def test_index_length(self, platforms):
        idx = build_indices(platforms, [2, 3], seed=0)
        assert {len(v.index_bits) for v in idx.values()} == {5}

    def test_identical_services_identical_indices(self, rng):
        ps = random_platforms(rng, m=10)
        for p in ps:
            p.qos[4] = p.qos[7]
        idx = build_indices(ps, [4, 4], seed=3)
        assert idx[4].index_bits == idx[7].index_bits

    def test_platform_order_irrelevant(self, platforms):
        a = index_matrix(platforms, [2, 3], seed=8)
        b = index_matrix(platforms[::-1], [3, 2], seed=8)
        np.testing.assert_array_equal(a, b)

    def test_segments_in_platform_order(self, platforms):
        bits = index_matrix(platforms, [2, 3], seed=8)
        np.testing.assert_array_equal(bits[:, :2], platform_signatures(platforms[0], 2, 8))
        np.testing.assert_array_equal(bits[:, 2:], platform_signatures(platforms[1], 3, 8))

    def test_equality_is_per_platform_equality(self, platforms):
        bits = index_matrix(platforms, [2, 2], seed=4)
        s1, s2 = bits[:, :2], bits[:, 2:]
        for i in range(10):
            for j in range(10):
                same = np.array_equal(bits[i], bits[j])
                assert same == (np.array_equal(s1[i], s1[j]) and np.array_equal(s2[i], s2[j]))

    def test_new_rounds_do_not_disturb_old(self, platforms):
        r1 = index_matrix(platforms, [3, 3], seed=2, round_=1)
        index_matrix(platforms, [3, 3], seed=2, round_=2)
        np.testing.assert_array_equal(r1, index_matrix(platforms, [3, 3], seed=2, round_=1))

    def test_transcript_collects_messages(self, platforms):
        transcript = []
        index_matrix(platforms, [2, 3], seed=0, transcript=transcript)
        assert len(transcript) == 2
        assert all(audit_privacy(m) for m in transcript)

    def test_mismatched_h_count(self, platforms):
        with pytest.raises(ValueError):
            index_matrix(platforms, [2], seed=0)

    def test_incomplete_coverage_rejected(self, platforms):
        msg = SignatureMessage(1, 1, 2, np.arange(39), np.zeros((39, 2), dtype=np.uint8))
        with pytest.raises(ValueError):
            assemble_indices([serialize_message(msg)], 40)
