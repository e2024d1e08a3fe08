import pytest

from keyforge import ffs, protocol, tagtree
from keyforge.errors import KeyForgeError, SpanError
from keyforge.tagtree import uniform_layout

from .conftest import StepClock
from .oracles import leaf_cover


def test_config_validation(small_space, clock):
    with pytest.raises(KeyForgeError):
        protocol.KeyForgeConfig(space=small_space, delta_hat=901, clock=clock)
    with pytest.raises(KeyForgeError):
        protocol.KeyForgeConfig(space=small_space, expiry_interval=100, clock=clock)
    cfg = protocol.KeyForgeConfig(space=small_space, clock=clock)
    assert cfg.expiry_interval == small_space.chunk_duration


def test_sign_tag_is_next_chunk_at_boundary(keypair, small_space):
    start, _ = small_space.span()
    boundary = start + 10 * 900
    clock = StepClock(boundary - 1)   # one second before a chunk boundary
    cfg = protocol.KeyForgeConfig(space=small_space, domain="d", clock=clock)
    ksig = protocol.kf_sign(keypair.sk, b"m", cfg)
    assert ksig.tag == small_space.tag_of_index(10)   # the *next* chunk
    # verify immediately: true even though now is before the tag's chunk
    assert protocol.kf_verify(keypair.vk, ksig, b"m", cfg)


def test_verify_fails_after_chunk_end(keypair, cfg, clock):
    ksig = protocol.kf_sign(keypair.sk, b"m", cfg)
    end = cfg.space.live_until(ksig.tag)
    assert protocol.kf_verify(keypair.vk, ksig, b"m", cfg, now=end - 1)
    assert not protocol.kf_verify(keypair.vk, ksig, b"m", cfg, now=end)
    assert not protocol.kf_verify(keypair.vk, ksig, b"m", cfg, now=end + 1)


def test_verify_rejects_wrong_message_and_bad_tag(keypair, cfg):
    ksig = protocol.kf_sign(keypair.sk, b"m", cfg)
    assert not protocol.kf_verify(keypair.vk, ksig, b"other", cfg)
    mangled = protocol.KeyForgeSignature(tag=(9, 9, 9, 9), signature=ksig.signature,
                                         domain=ksig.domain)
    assert not protocol.kf_verify(keypair.vk, mangled, b"m", cfg)


def test_sign_rejects_span_overflow(keypair, small_space):
    _, end = small_space.span()
    clock = StepClock(end - 100)     # now + delta_hat is past the end
    cfg = protocol.KeyForgeConfig(space=small_space, clock=clock)
    with pytest.raises(SpanError):
        protocol.kf_sign(keypair.sk, b"m", cfg)


def test_expiry_due_examples(small_space):
    start, _ = small_space.span()
    cfg = protocol.KeyForgeConfig(space=small_space, clock=StepClock(start))
    assert protocol.expiry_due(cfg, start) == []
    assert protocol.expiry_due(cfg, start + 900) == [small_space.tag_of_index(0)]
    # mid-chunk k: leaves 0..k-1 only, never the live chunk
    now = start + 5 * 900 + 450
    due = protocol.expiry_due(cfg, now)
    assert due == small_space.lex_range(0, 4)
    assert small_space.tag_of_time(now) not in due


def test_expiry_never_covers_live_chunk(keypair, small_space):
    start, end = small_space.span()
    cfg = protocol.KeyForgeConfig(space=small_space, clock=StepClock(start))
    for now in (start + 900, start + 12345, (start + end) // 2, end - 1):
        k = protocol.expired_leaf_count(cfg, now)
        live = small_space.index_of_tag(small_space.tag_of_time(now))
        assert k <= live


def test_publish_expiry_info_covers_exactly(keypair):
    space = uniform_layout(27, 3, epoch_start=0, chunk_duration=900)
    cfg = protocol.KeyForgeConfig(space=space, clock=StepClock(0))
    now = 7 * 900  # chunks 0..6 have ended
    eta = protocol.publish_expiry_info(keypair.sk, cfg, now=now)
    tags = [tagtree.identity_to_tag(e[0], space) for e in eta.entries]
    assert leaf_cover(space, tags) == set(range(7))
    assert len(eta.entries) == ffs.range_cover_size(space, 0, 6)
    # day prefix appears once a full day has passed
    eta2 = protocol.publish_expiry_info(keypair.sk, cfg, now=9 * 900)
    tags2 = [tagtree.identity_to_tag(e[0], space) for e in eta2.entries]
    assert (1,) in tags2 or (1, 1) in tags2  # compressed prefix, not 9 leaves
    assert len(eta2.entries) < 9


def test_publish_expiry_info_empty_before_first_chunk(keypair, small_space):
    start, _ = small_space.span()
    cfg = protocol.KeyForgeConfig(space=small_space, clock=StepClock(start))
    eta = protocol.publish_expiry_info(keypair.sk, cfg, now=start + 1)
    assert eta.entries == ()


def test_expired_count_saturates_at_span_end(keypair, small_space):
    cfg = protocol.KeyForgeConfig(space=small_space, clock=StepClock(0))
    _, end = small_space.span()
    assert protocol.expired_leaf_count(cfg, end) == small_space.leaf_count()
    assert protocol.expired_leaf_count(cfg, end + 10_000) == small_space.leaf_count()
    start, _ = small_space.span()
    assert protocol.expired_leaf_count(cfg, start - 5) == 0
