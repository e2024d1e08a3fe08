import random

import pytest
from scipy.stats import chi2_contingency

from keyforge import group, sig
from keyforge.errors import KeyForgeError


def test_keygen_golden_vector(golden):
    kp = sig.sig_keygen(b"\x00" * 32)
    assert group.encode_scalar(kp.sk).hex() == golden["sig_zero_seed_sk"]
    assert group.encode_element(kp.pk).hex() == golden["sig_zero_seed_pk"]


def test_keygen_distinct_seeds_distinct_keys():
    assert sig.sig_keygen(b"\x01" * 32).pk != sig.sig_keygen(b"\x02" * 32).pk


def test_keygen_fresh_randomness():
    kp1, kp2 = sig.sig_keygen(), sig.sig_keygen()
    assert kp1.pk != kp2.pk
    assert kp1.pk != 1  # never the identity element


def test_sign_golden_and_deterministic(golden):
    kp = sig.sig_keygen(b"\x00" * 32)
    s1 = sig.sig_sign(kp, b"abc")
    s2 = sig.sig_sign(kp, b"abc")
    assert s1.encode() == s2.encode()
    assert s1.encode().hex() == golden["sig_abc"]


def test_sign_verify_roundtrip():
    kp = sig.sig_keygen(b"\x03" * 32)
    s = sig.sig_sign(kp, b"hello")
    assert sig.sig_verify(kp.pk, b"hello", s)
    assert not sig.sig_verify(kp.pk, b"hello\x00", s)
    other = sig.sig_keygen(b"\x04" * 32)
    assert not sig.sig_verify(other.pk, b"hello", s)


def test_verify_rejects_malformed_bytes():
    kp = sig.sig_keygen(b"\x05" * 32)
    s = sig.sig_sign(kp, b"m")
    raw = s.encode()
    assert sig.sig_verify_bytes(kp.pk, b"m", raw)
    assert not sig.sig_verify_bytes(kp.pk, b"m", raw[:-1])     # truncated
    assert not sig.sig_verify_bytes(kp.pk, b"m", raw + b"\x00")
    assert not sig.sig_verify_bytes(kp.pk, b"m", b"")


def test_verify_never_crashes_on_fuzz():
    rng = random.Random(1)
    kp = sig.sig_keygen(b"\x06" * 32)
    raw = bytearray(sig.sig_sign(kp, b"m").encode())
    for _ in range(2000):
        mutated = bytearray(raw)
        for _ in range(rng.randint(1, 4)):
            mutated[rng.randrange(len(mutated))] = rng.randrange(256)
        sig.sig_verify_bytes(kp.pk, b"m", bytes(mutated))
        sig.sig_verify_bytes(kp.pk, b"m", bytes(mutated[: rng.randrange(len(mutated))]))


# --- ring signature ---------------------------------------------------------


def _ring_of(n):
    kps = [sig.sig_keygen(bytes([40 + i]) * 32) for i in range(n)]
    return kps, [k.pk for k in kps]


def test_ring_of_one_is_ordinary_proof():
    kps, ring = _ring_of(1)
    rs = sig.ring_sign(ring, 0, kps[0].sk, b"solo")
    assert sig.ring_verify(ring, b"solo", rs)


def test_ring_sign_verify_and_tamper():
    kps, ring = _ring_of(3)
    rs = sig.ring_sign(ring, 2, kps[2].sk, b"msg")
    assert sig.ring_verify(ring, b"msg", rs)
    assert not sig.ring_verify(ring, b"msg!", rs)
    # swapped ring order is a different statement
    assert not sig.ring_verify(list(reversed(ring)), b"msg", rs)


def test_ring_sign_input_validation():
    kps, ring = _ring_of(2)
    with pytest.raises(KeyForgeError):
        sig.ring_sign(ring, 2, kps[0].sk, b"m")       # index out of range
    with pytest.raises(KeyForgeError):
        sig.ring_sign(ring, 0, kps[1].sk, b"m")       # key mismatch
    with pytest.raises(KeyForgeError):
        sig.ring_sign([], 0, kps[0].sk, b"m")


def test_ring_verify_size_mismatch_false():
    kps, ring = _ring_of(2)
    rs = sig.ring_sign(ring, 0, kps[0].sk, b"m")
    bad = sig.RingSignature(rs.ring, rs.challenges[:1], rs.responses)
    assert not sig.ring_verify(ring, b"m", bad)
    assert not sig.ring_verify(ring[:1], b"m", rs)


def test_ring_roundtrip_encoding():
    kps, ring = _ring_of(2)
    rs = sig.ring_sign(ring, 1, kps[1].sk, b"wire")
    assert sig.RingSignature.decode(rs.encode()) == rs


def test_ring_witness_indistinguishability_chi_square():
    """Transcript statistics must not depend on which slot signed.

    Same per-call tape, both slots, 1000 messages; the low nibble of each
    first challenge should be indistinguishable between the two signers.
    """
    kps, ring = _ring_of(2)
    rng = random.Random(7)
    buckets = [[0] * 16, [0] * 16]
    for i in range(1000):
        msg = rng.randbytes(24)
        tape = rng.randbytes(64)  # same tape for both signers
        for signer in (0, 1):
            rs = sig.ring_sign(ring, signer, kps[signer].sk, msg, tape=tape)
            assert sig.ring_verify(ring, msg, rs)
            assert len(rs.challenges) == len(rs.responses) == 2
            buckets[signer][rs.challenges[0] & 0xF] += 1
    _, p_value, _, _ = chi2_contingency(buckets)
    assert p_value > 0.01, f"challenge distributions distinguishable: p={p_value}"


def test_prf_vectors_and_properties(golden):
    key = b"\x00" * 32
    out = sig.prf(key, b"tag:2019/01/01/0")
    assert out.hex() == golden["prf_zero_key_tag_label"]
    assert sig.prf(key, b"tag:2019/01/01/0") == out
    flipped = sig.prf(key, b"tag:2019/01/01/1")
    assert flipped != out
    with pytest.raises(KeyForgeError):
        sig.prf(b"short", b"x")
