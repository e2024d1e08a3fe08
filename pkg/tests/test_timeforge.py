import random

import pytest
from scipy.stats import chi2_contingency

from keyforge import group, sig, timeforge
from keyforge.errors import EncodingError, EpochError, KeyForgeError


@pytest.fixture(scope="module")
def tk():
    return timeforge.tk_setup(32, b"\x41" * 32, epoch_duration=900, start_time=0)


@pytest.fixture(scope="module")
def sender(tk):
    params, _ = tk
    return timeforge.tf_keygen(params, b"\x42" * 32)


def test_setup_golden(golden):
    params, secret = timeforge.tk_setup(8, b"\x00" * 32)
    assert params.commitment.hex() == golden["pvtk_zero_seed_commitment"]
    assert group.encode_element(params.points[0]).hex().startswith(
        golden["pvtk_zero_seed_point0"])
    assert group.encode_element(params.master_pk).hex().startswith(
        golden["pvtk_zero_seed_master_pk"])


def test_setup_properties(tk):
    params, secret = tk
    assert params.epoch_count == 32
    for s in (0, 7, 31):
        proof = timeforge.tk_prove(secret, s)
        assert group.pow_g(proof.k) == params.points[s]
    single, _ = timeforge.tk_setup(1, b"\x43" * 32)
    assert single.epoch_count == 1


def test_setup_unseeded_distinct():
    p1, _ = timeforge.tk_setup(2)
    p2, _ = timeforge.tk_setup(2)
    assert p1.points != p2.points


def test_prove_verify_matrix(tk):
    params, secret = tk
    proof = timeforge.tk_prove(secret, 5)
    assert timeforge.tk_verify(params, 5, proof)
    assert not timeforge.tk_verify(params, 6, proof)              # wrong epoch index
    tampered = timeforge.PvtkProof(epoch=5, k=(proof.k + 1) % group.Q)
    assert not timeforge.tk_verify(params, 5, tampered)
    assert not timeforge.tk_verify(params, 99, timeforge.PvtkProof(99, proof.k))
    with pytest.raises(EpochError):
        timeforge.tk_prove(secret, 32)


def test_params_serialization_roundtrip(tk):
    params, _ = tk
    again = timeforge.PvtkParams.deserialize(params.serialize())
    assert again == params
    corrupted = bytearray(params.serialize())
    corrupted[30] ^= 1
    with pytest.raises(EncodingError):
        timeforge.PvtkParams.deserialize(bytes(corrupted))


def test_merkle_inclusion(tk):
    params, _ = tk
    for s in (0, 1, 13, 31):
        path = timeforge.inclusion_path(params.points, s)
        assert timeforge.verify_inclusion(params.commitment, s, params.points[s],
                                          path, params.epoch_count)
        assert not timeforge.verify_inclusion(params.commitment, s,
                                              params.points[(s + 1) % 32],
                                              path, params.epoch_count)
    odd = tuple(params.points[:5])
    root = timeforge.merkle_root(odd)
    for s in range(5):
        path = timeforge.inclusion_path(odd, s)
        assert timeforge.verify_inclusion(root, s, odd[s], path, 5)


def test_timekeeper_log(tk):
    params, secret = tk
    log = timeforge.TimekeeperLog()
    assert log.proof_for(0) is None
    log.release_through(secret, 4)
    assert len(log) == 5
    for s in range(5):
        proof = log.proof_for(s)
        assert timeforge.tk_verify(params, s, proof)
    assert log.proof_for(5) is None
    log.release_through(secret, 6)
    assert len(log) == 7
    again = timeforge.TimekeeperLog.deserialize(log.serialize())
    assert again.proof_for(6) == log.proof_for(6)


def test_sign_verify_roundtrip(tk, sender):
    params, _ = tk
    pko, sk = sender
    signature = timeforge.tf_sign(pko, sk, b"M", t=9000, delta=900)
    assert timeforge.tf_verify(pko, b"M", signature)
    assert not timeforge.tf_verify(pko, b"N", signature)


def test_delta_is_bound_into_statement(tk, sender):
    pko, sk = sender
    signature = timeforge.tf_sign(pko, sk, b"M", t=9000, delta=900)
    altered = timeforge.TimeForgeSignature(proof=signature.proof, t=signature.t,
                                           delta=1800)
    assert not timeforge.tf_verify(pko, b"M", altered)
    shifted = timeforge.TimeForgeSignature(proof=signature.proof, t=8100,
                                           delta=signature.delta)
    assert not timeforge.tf_verify(pko, b"M", shifted)


def test_sign_beyond_horizon(tk, sender):
    pko, sk = sender
    with pytest.raises(EpochError):
        timeforge.tf_sign(pko, sk, b"M", t=32 * 900, delta=900)


def test_forge_with_released_epoch(tk, sender):
    params, secret = tk
    pko, sk = sender
    t, delta = 9000, 900
    target = params.epoch_of(t + delta)
    proof = timeforge.tk_prove(secret, target)
    forged = timeforge.tf_forge(pko, b"M", t, target, delta, proof=proof)
    assert timeforge.tf_verify(pko, b"M", forged)
    honest = timeforge.tf_sign(pko, sk, b"M", t, delta)
    assert timeforge.tf_verify(pko, b"M", honest)
    assert forged.proof.ring == honest.proof.ring


def test_forge_early_epoch_rejected(tk, sender):
    params, secret = tk
    pko, _ = sender
    t, delta = 9000, 900
    early = timeforge.tk_prove(secret, params.epoch_of(t + delta) - 1)
    with pytest.raises(EpochError):
        timeforge.tf_forge(pko, b"M", t, early.epoch, delta, proof=early)


def test_forge_mismatched_or_bogus_proof_rejected(tk, sender):
    params, secret = tk
    pko, _ = sender
    t, delta = 9000, 900
    target = params.epoch_of(t + delta)
    later = timeforge.tk_prove(secret, target + 3)
    with pytest.raises(EpochError):
        timeforge.tf_forge(pko, b"M", t, later.epoch, delta, proof=later)
    bogus = timeforge.PvtkProof(epoch=target, k=12345)
    with pytest.raises(EpochError):
        timeforge.tf_forge(pko, b"M", t, target, delta, proof=bogus)
    with pytest.raises(KeyForgeError):
        timeforge.tf_forge(pko, b"M", t, target, delta)


def test_epoch_scalar_independence(tk, sender):
    """k for epoch s must not stand in for any other epoch's slot."""
    params, secret = tk
    pko, _ = sender
    t, delta = 9000, 900
    target = params.epoch_of(t + delta)
    foreign = timeforge.tk_prove(secret, target + 2)
    ring = timeforge._build_ring(pko, t, delta, None)
    with pytest.raises(KeyForgeError):
        sig.ring_sign(ring, len(ring) - 1, foreign.k,
                      timeforge._statement(b"M", t, delta))


def test_three_branch_variant(tk, sender):
    params, secret = tk
    pko, sk = sender
    recipient = sig.sig_keygen(b"\x44" * 32)
    t, delta = 9000, 900
    honest = timeforge.tf_sign(pko, sk, b"M", t, delta, recipient_pk=recipient.pk)
    assert timeforge.tf_verify(pko, b"M", honest, recipient_pk=recipient.pk)
    assert len(honest.proof.ring) == 3
    # two-branch verification is a different statement
    assert not timeforge.tf_verify(pko, b"M", honest)

    by_recipient = timeforge.tf_forge(pko, b"M", t, 0, delta,
                                      recipient_pk=recipient.pk,
                                      recipient_sk=recipient.sk)
    assert timeforge.tf_verify(pko, b"M", by_recipient, recipient_pk=recipient.pk)

    target = params.epoch_of(t + delta)
    by_epoch = timeforge.tf_forge(pko, b"M", t, target, delta,
                                  proof=timeforge.tk_prove(secret, target),
                                  recipient_pk=recipient.pk)
    assert timeforge.tf_verify(pko, b"M", by_epoch, recipient_pk=recipient.pk)


def test_signature_encoding_roundtrip(tk, sender):
    pko, sk = sender
    signature = timeforge.tf_sign(pko, sk, b"M", 9000, 900)
    assert timeforge.TimeForgeSignature.decode(signature.encode()) == signature


def test_forged_and_honest_transcripts_indistinguishable(tk, sender):
    """Chi-square over first-challenge nibbles, honest vs forged."""
    params, secret = tk
    pko, sk = sender
    t, delta = 9000, 900
    target = params.epoch_of(t + delta)
    proof = timeforge.tk_prove(secret, target)
    rng = random.Random(17)
    buckets = [[0] * 16, [0] * 16]
    for _ in range(400):
        msg = rng.randbytes(20)
        honest = timeforge.tf_sign(pko, sk, msg, t, delta)
        forged = timeforge.tf_forge(pko, msg, t, target, delta, proof=proof)
        assert timeforge.tf_verify(pko, msg, honest)
        assert timeforge.tf_verify(pko, msg, forged)
        assert len(honest.encode()) == len(forged.encode())
        buckets[0][honest.proof.challenges[0] & 0xF] += 1
        buckets[1][forged.proof.challenges[0] & 0xF] += 1
    _, p_value, _, _ = chi2_contingency(buckets)
    assert p_value > 0.01


def test_fuzzed_forgeries_all_fail(tk, sender):
    """Mutations of a valid signature and random frames never verify."""
    pko, sk = sender
    signature = timeforge.tf_sign(pko, sk, b"M", 9000, 900)
    raw = bytearray(signature.encode())
    rng = random.Random(19)
    for _ in range(3000):
        mutated = bytearray(raw)
        for _ in range(rng.randint(1, 6)):
            mutated[rng.randrange(len(mutated))] = rng.randrange(256)
        try:
            candidate = timeforge.TimeForgeSignature.decode(bytes(mutated))
        except EncodingError:
            continue
        assert not timeforge.tf_verify(pko, b"M", candidate)
