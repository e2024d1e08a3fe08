"""The tag-based signing protocol: sign under the chunk that covers
send-time plus the delivery bound, verify only while that chunk is live.

``delta_hat`` is the assumed upper bound on mail delivery latency (15
minutes by default).  A signature made now is bound to the tag containing
``now + delta_hat``; any verifier whose clock is at or before the end of
that chunk accepts, and the moment the chunk ends the tag is due for expiry
publication, after which the signature is forgeable by anyone and
verification refuses it.  The "still live" check is one-sided on purpose:
honest mail signed just before a chunk boundary carries the next chunk's
tag and must verify immediately on fast delivery.

Clocks are injected everywhere (``cfg.clock`` returning Unix seconds) so
boundary behavior and the simulator equality checks are deterministic under
test.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

from . import ffs, group, tagtree
from .errors import KeyForgeError
from .ffs import KeyCache
from .hibs import CertCache, HibsMasterKeys, HibsSignature
from .tagtree import Tag, TagSpace

DEFAULT_DELTA_HAT = 900


def _system_clock() -> int:
    return int(time.time())


@dataclass
class KeyForgeConfig:
    """Per-domain protocol parameters with an injectable time source."""

    space: TagSpace
    domain: str = ""
    delta_hat: int = DEFAULT_DELTA_HAT
    expiry_interval: int = 0          # 0 -> once per chunk
    clock: object = field(default=_system_clock)

    def __post_init__(self):
        if self.delta_hat > self.space.chunk_duration:
            raise KeyForgeError(
                f"delta_hat {self.delta_hat}s exceeds chunk duration "
                f"{self.space.chunk_duration}s"
            )
        if self.expiry_interval == 0:
            self.expiry_interval = self.space.chunk_duration
        if self.expiry_interval < self.space.chunk_duration:
            raise KeyForgeError("expiry interval shorter than a chunk is pointless")

    def now(self) -> int:
        return int(self.clock())


@dataclass(frozen=True)
class KeyForgeSignature:
    """What travels in the mail header: the tag, the signature, the domain."""

    tag: Tag
    signature: HibsSignature
    domain: str


def kf_sign(
    sk: HibsMasterKeys,
    msg: bytes,
    cfg: KeyForgeConfig,
    cache: KeyCache | None = None,
    tag: Tag | None = None,
) -> KeyForgeSignature:
    """Sign msg under the tag covering now + delta_hat.

    ``tag`` overrides the clock-derived tag; the forge-on-request responder
    uses that to sign for the two tags the protocol prescribes.  Raises
    SpanError once the space is exhausted (key rotation due).
    """
    if tag is None:
        tag = cfg.space.tag_of_time(cfg.now() + cfg.delta_hat)
    else:
        cfg.space.validate_tag(tag)
    identity = tagtree.tag_to_identity(tag)
    return KeyForgeSignature(
        tag=tag,
        signature=ffs.ffs_sign(sk, identity, msg, cache),
        domain=cfg.domain,
    )


def tag_is_live(space: TagSpace, tag: Tag, now: int) -> bool:
    """True while the verifier's clock has not passed the tag's chunk end."""
    return int(now) < space.live_until(tag)


def kf_verify(
    vk: int,
    ksig: KeyForgeSignature,
    msg: bytes,
    cfg: KeyForgeConfig,
    now: int | None = None,
    cert_cache: CertCache | None = None,
) -> bool:
    """Accept iff the tag is still live at ``now`` and the signature checks."""
    if now is None:
        now = cfg.now()
    try:
        cfg.space.validate_tag(ksig.tag)
    except KeyForgeError:
        return False
    if not tag_is_live(cfg.space, ksig.tag, now):
        return False
    identity = tagtree.tag_to_identity(ksig.tag)
    return ffs.ffs_verify(vk, identity, msg, ksig.signature, cert_cache)


def expired_leaf_count(cfg: KeyForgeConfig, now: int) -> int:
    """Number of leading leaves whose chunk has fully ended by ``now``."""
    start, end = cfg.space.span()
    if now < start:
        return 0
    if now >= end:
        return cfg.space.leaf_count()
    return cfg.space.index_of_tag(cfg.space.tag_of_time(now))


def expiry_due(cfg: KeyForgeConfig, now: int | None = None) -> list[Tag]:
    """Leaf tags due for release: every chunk that ended at or before now.

    Cumulative and in lexicographic order; the live chunk is never included.
    """
    if now is None:
        now = cfg.now()
    k = expired_leaf_count(cfg, now)
    if k == 0:
        return []
    return cfg.space.lex_range(0, k - 1)


def publish_expiry_info(
    sk: HibsMasterKeys,
    cfg: KeyForgeConfig,
    now: int | None = None,
    cache: KeyCache | None = None,
) -> ffs.ExpiryInfo:
    """Expiry info covering everything due at ``now`` (compressed cover)."""
    if now is None:
        now = cfg.now()
    k = expired_leaf_count(cfg, now)
    if k == 0:
        return ffs.ExpiryInfo(vk=group.pow_g(sk.msk_scalar), entries=())
    return ffs.expire_prefix(sk, cfg.space, k - 1, cache)
