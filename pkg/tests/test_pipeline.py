import random

import pytest

from keyforge import ffs, pipeline, protocol, sig, tagtree
from keyforge.errors import ForgeRequestError
from keyforge.mailproto import MailMessage, parse_message, render_message
from keyforge.pipeline import (
    REASON_BAD_SIGNATURE,
    REASON_DIGEST_MISMATCH,
    REASON_MISSING_HEADER,
    REASON_TAG_EXPIRED,
    REASON_UNKNOWN_DOMAIN,
)

from .conftest import StepClock

MU = (("From", "alice@sender.example"), ("To", "bob@recv.example"),
      ("Subject", "hello"), ("Date", "Mon, 1 Jan 2024 00:00:00 +0000"),
      ("Message-ID", "<42@sender.example>"))


def _msg(body=b"body\r\n"):
    return MailMessage(headers=list(MU), body=body)


def _resolver(keypair):
    return lambda domain: keypair.vk if domain == "sender.example" else None


def test_sign_then_verify_passes(keypair, cfg):
    signed = pipeline.sign_message(_msg(), keypair.sk, cfg)
    outcome = pipeline.verify_message(signed, _resolver(keypair), cfg)
    assert outcome.ok and outcome.reason is None


def test_signed_message_survives_serialization(keypair, cfg):
    signed = pipeline.sign_message(_msg(), keypair.sk, cfg)
    wire = render_message(signed)
    outcome = pipeline.verify_message(parse_message(wire), _resolver(keypair), cfg)
    assert outcome.ok
    assert render_message(parse_message(wire)) == wire


def test_double_sign_replaces_header(keypair, cfg):
    signed_once = pipeline.sign_message(_msg(), keypair.sk, cfg)
    signed_twice = pipeline.sign_message(signed_once, keypair.sk, cfg)
    assert render_message(signed_once) == render_message(signed_twice)


def test_missing_header(keypair, cfg):
    outcome = pipeline.verify_message(_msg(), _resolver(keypair), cfg)
    assert (outcome.ok, outcome.reason) == (False, REASON_MISSING_HEADER)


def test_unknown_domain(keypair, cfg):
    signed = pipeline.sign_message(_msg(), keypair.sk, cfg)
    outcome = pipeline.verify_message(signed, lambda d: None, cfg)
    assert (outcome.ok, outcome.reason) == (False, REASON_UNKNOWN_DOMAIN)


def test_body_flip_is_digest_mismatch(keypair, cfg):
    signed = pipeline.sign_message(_msg(), keypair.sk, cfg)
    tampered = parse_message(render_message(signed))
    tampered.body = b"Body\r\n"
    outcome = pipeline.verify_message(tampered, _resolver(keypair), cfg)
    assert (outcome.ok, outcome.reason) == (False, REASON_DIGEST_MISMATCH)


def test_header_tamper_is_digest_mismatch(keypair, cfg):
    signed = pipeline.sign_message(_msg(), keypair.sk, cfg)
    tampered = parse_message(render_message(signed))
    tampered.headers[2] = ("Subject", "hello!")
    outcome = pipeline.verify_message(tampered, _resolver(keypair), cfg)
    assert (outcome.ok, outcome.reason) == (False, REASON_DIGEST_MISMATCH)


def test_clock_past_chunk_is_expired(keypair, cfg, clock):
    signed = pipeline.sign_message(_msg(), keypair.sk, cfg)
    tag = tagtree.parse_tag_text(
        __import__("keyforge.mailproto", fromlist=["extract_header"])
        .extract_header(signed).tag_text, cfg.space)
    outcome = pipeline.verify_message(signed, _resolver(keypair), cfg,
                                      now=cfg.space.live_until(tag))
    assert (outcome.ok, outcome.reason) == (False, REASON_TAG_EXPIRED)


def test_signature_corruption_is_bad_signature(keypair, cfg):
    signed = pipeline.sign_message(_msg(), keypair.sk, cfg)
    name, value = signed.headers[-1]
    corrupted = value[:-8] + ("AAAAAAA=" if not value.endswith("AAAAAAA=") else "BBBBBBB=")
    signed.headers[-1] = (name, corrupted)
    outcome = pipeline.verify_message(signed, _resolver(keypair), cfg)
    assert (outcome.ok, outcome.reason) == (False, REASON_BAD_SIGNATURE)


def test_wrong_key_is_bad_signature(keypair, cfg):
    other = ffs.ffs_keygen(b"\x55" * 32)
    signed = pipeline.sign_message(_msg(), keypair.sk, cfg)
    outcome = pipeline.verify_message(signed, lambda d: other.vk, cfg)
    assert (outcome.ok, outcome.reason) == (False, REASON_BAD_SIGNATURE)


# --- forge request wire format -----------------------------------------------


def test_forge_request_roundtrip():
    kp = sig.sig_keygen(b"\x61" * 32)
    req = pipeline.make_forge_request("bob@recv.example", MU, b"B", kp)
    decoded = pipeline.ForgeRequest.decode(req.encode())
    assert decoded == req


def test_forge_request_decode_fuzz():
    kp = sig.sig_keygen(b"\x61" * 32)
    raw = bytearray(pipeline.make_forge_request("bob@recv.example", MU, b"B", kp).encode())
    rng = random.Random(13)
    for _ in range(3000):
        mutated = bytearray(raw)
        for _ in range(rng.randint(1, 5)):
            mutated[rng.randrange(len(mutated))] = rng.randrange(256)
        try:
            pipeline.ForgeRequest.decode(bytes(mutated))
        except Exception as exc:  # must be a structured error, nothing else
            assert type(exc).__name__ in ("EncodingError", "UnicodeDecodeError"), exc


# --- forge-on-request ---------------------------------------------------------


@pytest.fixture()
def requester_key():
    return sig.sig_keygen(b"\x62" * 32)


def _resolve_req_pk(requester_key):
    return lambda domain: requester_key.pk if domain == "recv.example" else None


def _request_mu(to="bob@recv.example"):
    return (("From", "alice@sender.example"), ("To", to), ("Subject", "s"),
            ("Date", "D"), ("Message-ID", "<9@x>"))


def test_forge_on_request_returns_two_emails(keypair, cfg, clock, requester_key):
    req = pipeline.make_forge_request("bob@recv.example", _request_mu(), b"B", requester_key)
    response = pipeline.forge_on_request(keypair.sk, req, cfg,
                                         _resolve_req_pk(requester_key))
    assert len(response.emails) == 2
    assert response.tags == (cfg.space.tag_of_time(clock.now - cfg.delta_hat),
                             cfg.space.tag_of_time(clock.now))
    # each email verifies at any instant its own tag is live
    for email, tag in zip(response.emails, response.tags):
        start, _ = cfg.space.prefix_bounds(tag)
        outcome = pipeline.verify_message(email, lambda d: keypair.vk, cfg, now=start)
        assert outcome.ok
    # the t* email verifies right now; the earlier one has expired by t*
    # whenever a chunk boundary sits between t*-delta and t*
    assert pipeline.verify_message(response.emails[1], lambda d: keypair.vk, cfg).ok


def test_forge_on_request_shortened_delta_keeps_both_live(keypair, small_space,
                                                          requester_key):
    # when no boundary is crossed both response emails carry the live tag
    start, end = small_space.span()
    t_star = (start + end) // 2 + 600            # chunk offset 600 > delta_hat
    clock = StepClock(t_star)
    cfg = protocol.KeyForgeConfig(space=small_space, domain="sender.example",
                                  delta_hat=300, clock=clock)
    req = pipeline.make_forge_request("bob@recv.example", _request_mu(), b"B",
                                      requester_key)
    response = pipeline.forge_on_request(keypair.sk, req, cfg,
                                         _resolve_req_pk(requester_key))
    for email in response.emails:
        assert pipeline.verify_message(email, lambda d: keypair.vk, cfg).ok


def test_forge_on_request_rejects_unsigned(keypair, cfg, requester_key):
    req = pipeline.make_forge_request("bob@recv.example", _request_mu(), b"B", requester_key)
    bad = pipeline.ForgeRequest(req.requester, req.mu, req.body,
                                sig.Signature(1, 1))
    with pytest.raises(ForgeRequestError):
        pipeline.forge_on_request(keypair.sk, bad, cfg, _resolve_req_pk(requester_key))


def test_forge_on_request_rejects_recipient_mismatch(keypair, cfg, requester_key):
    req = pipeline.make_forge_request(
        "bob@recv.example", _request_mu(to="victim@other.example"), b"B", requester_key)
    with pytest.raises(ForgeRequestError):
        pipeline.forge_on_request(keypair.sk, req, cfg, _resolve_req_pk(requester_key))


def test_forge_on_request_rejects_unknown_requester_domain(keypair, cfg, requester_key):
    req = pipeline.make_forge_request("bob@recv.example", _request_mu(), b"B", requester_key)
    with pytest.raises(ForgeRequestError):
        pipeline.forge_on_request(keypair.sk, req, cfg, lambda d: None)


# --- simulators ------------------------------------------------------------------


def test_simulate_recipient_matches_honest_bytes(keypair, small_space, requester_key):
    start, end = small_space.span()
    t = (start + end) // 2
    mu = _request_mu()
    for response_delay in (0, 300, 899):
        sim_clock = StepClock(t)
        cfg_sim = protocol.KeyForgeConfig(space=small_space, domain="sender.example",
                                          clock=sim_clock)

        def handler(req):
            # server answers at t + delay
            return pipeline.forge_on_request(
                keypair.sk, req, cfg_sim, _resolve_req_pk(requester_key),
                now=t + response_delay)

        simulated = pipeline.simulate_recipient(
            handler, "bob@recv.example", requester_key, mu, b"B", cfg_sim)

        honest_cfg = protocol.KeyForgeConfig(space=small_space, domain="sender.example",
                                             clock=StepClock(t - 900))
        honest = pipeline.sign_message(MailMessage(headers=list(mu), body=b"B"),
                                       keypair.sk, honest_cfg)
        assert render_message(simulated) == render_message(honest)


def test_simulate_universal_matches_honest_bytes(keypair, small_space):
    start, end = small_space.span()
    t = (start + end) // 2
    cfg = protocol.KeyForgeConfig(space=small_space, domain="sender.example",
                                  clock=StepClock(t + 5000))
    eta = protocol.publish_expiry_info(keypair.sk, cfg)
    mu = _request_mu()
    forged = pipeline.simulate_universal(eta, mu, b"B", t, cfg)
    assert forged is not None
    honest_cfg = protocol.KeyForgeConfig(space=small_space, domain="sender.example",
                                         clock=StepClock(t - 900))
    honest = pipeline.sign_message(MailMessage(headers=list(mu), body=b"B"),
                                   keypair.sk, honest_cfg)
    assert render_message(forged) == render_message(honest)


def test_simulate_universal_refuses_live_tag(keypair, small_space):
    start, end = small_space.span()
    t = (start + end) // 2
    cfg = protocol.KeyForgeConfig(space=small_space, domain="sender.example",
                                  clock=StepClock(t))
    eta = protocol.publish_expiry_info(keypair.sk, cfg)   # up to the live chunk
    assert pipeline.simulate_universal(eta, _request_mu(), b"B", t, cfg) is None


def test_simulate_universal_wrong_master_fails_verification(keypair, small_space):
    other = ffs.ffs_keygen(b"\x66" * 32)
    start, end = small_space.span()
    t = (start + end) // 2
    cfg = protocol.KeyForgeConfig(space=small_space, domain="sender.example",
                                  clock=StepClock(t + 5000))
    eta_other = protocol.publish_expiry_info(other.sk, cfg)
    forged = pipeline.simulate_universal(eta_other, _request_mu(), b"B", t, cfg)
    assert forged is not None
    outcome = pipeline.verify_message(forged, lambda d: keypair.vk, cfg, now=t)
    assert not outcome.ok and outcome.reason == REASON_BAD_SIGNATURE
