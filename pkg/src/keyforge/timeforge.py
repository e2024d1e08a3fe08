"""Timekeeper-based signing: signatures that expire without the signer
publishing anything.

A timekeeper commits to one group point per epoch (``K_s``), all derived
from a master secret and a PRF, and "proves" that epoch ``s`` has passed by
releasing the scalar ``k_s`` behind ``K_s``.  Released scalars for different
epochs are PRF-independent: knowing ``k_s`` says nothing about ``k_s'``.

A signature on message M with timestamp t and latency bound delta is a
1-of-n ring signature over::

    [ sender key,  (optional recipient key,)  K_epoch(t+delta) ]

bound to M || t || delta.  The honest sender closes the ring with its own
key; once the timekeeper releases ``k_epoch(t+delta)``, anyone can close
the same ring, and witness indistinguishability makes the two transcripts
identically distributed.  With the recipient slot included, the recipient
can forge at any time.

Epoch parameters can be distributed in full or as a Merkle commitment, in
which case verifiers receive (point, inclusion path) pairs.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

from . import group, sig
from .errors import EncodingError, EpochError, KeyForgeError

DEFAULT_EPOCH_SECONDS = 900

PARAMS_MAGIC = b"KFTK"
PARAMS_VERSION = 1
STREAM_MAGIC = b"KFTS"
STREAM_VERSION = 1


# --- merkle commitment over the epoch points --------------------------------


def _leaf_hash(index: int, point: int) -> bytes:
    return hashlib.sha256(
        b"KF/pvtk-leaf\x00" + index.to_bytes(8, "big") + group.encode_element(point)
    ).digest()


def _node_hash(left: bytes, right: bytes) -> bytes:
    return hashlib.sha256(b"KF/pvtk-node\x00" + left + right).digest()


def _merkle_levels(leaves: list[bytes]) -> list[list[bytes]]:
    levels = [leaves]
    while len(levels[-1]) > 1:
        prev = levels[-1]
        nxt = []
        for i in range(0, len(prev), 2):
            if i + 1 < len(prev):
                nxt.append(_node_hash(prev[i], prev[i + 1]))
            else:
                nxt.append(prev[i])  # odd node promotes
        levels.append(nxt)
    return levels


def merkle_root(points: tuple[int, ...]) -> bytes:
    leaves = [_leaf_hash(i, pt) for i, pt in enumerate(points)]
    return _merkle_levels(leaves)[-1][0]


def inclusion_path(points: tuple[int, ...], index: int) -> list[bytes]:
    levels = _merkle_levels([_leaf_hash(i, pt) for i, pt in enumerate(points)])
    path = []
    for level in levels[:-1]:
        sibling = index ^ 1
        if sibling < len(level):
            path.append(level[sibling])
        index //= 2
    return path


def verify_inclusion(root: bytes, index: int, point: int, path: list[bytes],
                     count: int) -> bool:
    if not 0 <= index < count:
        return False
    node = _leaf_hash(index, point)
    width = count
    for sibling in path:
        node = _node_hash(node, sibling) if index % 2 == 0 else _node_hash(sibling, node)
        index //= 2
        width = (width + 1) // 2
    # levels where the node promoted contribute no path entry
    return node == root


# --- timekeeper ---------------------------------------------------------------


@dataclass(frozen=True)
class PvtkParams:
    points: tuple[int, ...]
    master_pk: int
    commitment: bytes
    epoch_duration: int = DEFAULT_EPOCH_SECONDS
    start_time: int = 0

    @property
    def epoch_count(self) -> int:
        return len(self.points)

    def epoch_of(self, ts: int) -> int:
        e = (int(ts) - self.start_time) // self.epoch_duration
        if not 0 <= e < self.epoch_count:
            raise EpochError(f"time {ts} maps to epoch {e}, outside 0..{self.epoch_count - 1}")
        return e

    def serialize(self) -> bytes:
        out = [PARAMS_MAGIC, PARAMS_VERSION.to_bytes(2, "big"),
               self.epoch_count.to_bytes(4, "big"),
               self.epoch_duration.to_bytes(4, "big"),
               self.start_time.to_bytes(8, "big"),
               group.encode_element(self.master_pk),
               self.commitment]
        out += [group.encode_element(pt) for pt in self.points]
        return b"".join(out)

    @classmethod
    def deserialize(cls, raw: bytes) -> "PvtkParams":
        if raw[:4] != PARAMS_MAGIC:
            raise EncodingError("not a timekeeper params file")
        if int.from_bytes(raw[4:6], "big") != PARAMS_VERSION:
            raise EncodingError("unsupported params version")
        count = int.from_bytes(raw[6:10], "big")
        duration = int.from_bytes(raw[10:14], "big")
        start = int.from_bytes(raw[14:22], "big")
        off = 22
        master_pk = group.decode_element(raw[off:off + group.ELEMENT_LEN])
        off += group.ELEMENT_LEN
        commitment = raw[off:off + 32]
        off += 32
        points = []
        for _ in range(count):
            points.append(group.decode_element(raw[off:off + group.ELEMENT_LEN]))
            off += group.ELEMENT_LEN
        if off != len(raw):
            raise EncodingError("params file has trailing bytes")
        params = cls(points=tuple(points), master_pk=master_pk, commitment=commitment,
                     epoch_duration=duration, start_time=start)
        if merkle_root(params.points) != commitment:
            raise EncodingError("params commitment mismatch")
        return params


@dataclass(frozen=True)
class PvtkSecret:
    master_sk: int
    prf_key: bytes
    epoch_count: int


@dataclass(frozen=True)
class PvtkProof:
    """Release of one epoch's scalar; valid iff k*G equals that epoch's point."""

    epoch: int
    k: int


def _epoch_scalar(prf_key: bytes, epoch: int) -> int:
    return group.nonzero_hash_to_scalar(
        "pvtk/epoch", sig.prf(prf_key, b"KF/pvtk\x00" + epoch.to_bytes(8, "big"))
    )


def tk_setup(
    epoch_count: int,
    seed: bytes | None = None,
    epoch_duration: int = DEFAULT_EPOCH_SECONDS,
    start_time: int = 0,
) -> tuple[PvtkParams, PvtkSecret]:
    """Commit to epoch_count epochs; deterministic under a seed."""
    if epoch_count < 1:
        raise EpochError("epoch_count must be >= 1")
    if seed is not None:
        master = group.nonzero_hash_to_scalar("pvtk/setup", seed)
        prf_key = sig.new_prf_key(b"pvtk\x00" + seed)
    else:
        master = group.random_scalar()
        prf_key = sig.new_prf_key()
    secret = PvtkSecret(master_sk=master, prf_key=prf_key, epoch_count=epoch_count)
    points = tuple(group.pow_g(_epoch_scalar(prf_key, s)) for s in range(epoch_count))
    params = PvtkParams(
        points=points,
        master_pk=group.pow_g(master),
        commitment=merkle_root(points),
        epoch_duration=epoch_duration,
        start_time=start_time,
    )
    return params, secret


def tk_prove(secret: PvtkSecret, epoch: int) -> PvtkProof:
    if not 0 <= epoch < secret.epoch_count:
        raise EpochError(f"epoch {epoch} outside 0..{secret.epoch_count - 1}")
    return PvtkProof(epoch=epoch, k=_epoch_scalar(secret.prf_key, epoch))


def tk_verify(params: PvtkParams, epoch: int, proof: PvtkProof) -> bool:
    try:
        if not 0 <= epoch < params.epoch_count or proof.epoch != epoch:
            return False
        if not 0 < proof.k < group.Q:
            return False
        return group.pow_g(proof.k) == params.points[epoch]
    except (TypeError, ValueError):
        return False


class TimekeeperLog:
    """Append-only stream of released (epoch, scalar) records."""

    def __init__(self):
        self._records: list[tuple[int, int]] = []

    def __len__(self) -> int:
        return len(self._records)

    def release_through(self, secret: PvtkSecret, epoch: int) -> None:
        if not 0 <= epoch < secret.epoch_count:
            raise EpochError(f"epoch {epoch} outside 0..{secret.epoch_count - 1}")
        start = self._records[-1][0] + 1 if self._records else 0
        for s in range(start, epoch + 1):
            self._records.append((s, _epoch_scalar(secret.prf_key, s)))

    def proof_for(self, epoch: int) -> PvtkProof | None:
        if 0 <= epoch < len(self._records):
            s, k = self._records[epoch]
            return PvtkProof(epoch=s, k=k)
        return None

    def serialize(self) -> bytes:
        out = [STREAM_MAGIC, STREAM_VERSION.to_bytes(2, "big"),
               len(self._records).to_bytes(4, "big")]
        for s, k in self._records:
            out.append(s.to_bytes(8, "big"))
            out.append(group.encode_scalar(k))
        return b"".join(out)

    @classmethod
    def deserialize(cls, raw: bytes) -> "TimekeeperLog":
        if raw[:4] != STREAM_MAGIC:
            raise EncodingError("not a timekeeper stream")
        if int.from_bytes(raw[4:6], "big") != STREAM_VERSION:
            raise EncodingError("unsupported stream version")
        n = int.from_bytes(raw[6:10], "big")
        off = 10
        log = cls()
        for i in range(n):
            s = int.from_bytes(raw[off:off + 8], "big")
            off += 8
            k = group.decode_scalar(raw[off:off + group.SCALAR_LEN])
            off += group.SCALAR_LEN
            if s != i:
                raise EncodingError("stream records out of order")
            log._records.append((s, k))
        if off != len(raw):
            raise EncodingError("stream has trailing bytes")
        return log


# --- the signature scheme ------------------------------------------------------


@dataclass(frozen=True)
class TfPublicKey:
    pk: int
    params: PvtkParams


@dataclass(frozen=True)
class TimeForgeSignature:
    """(ring proof, t, delta); the ring is recomputed from public values."""

    proof: sig.RingSignature
    t: int
    delta: int

    def encode(self) -> bytes:
        return (self.t.to_bytes(8, "big") + self.delta.to_bytes(8, "big")
                + self.proof.encode())

    @classmethod
    def decode(cls, raw: bytes) -> "TimeForgeSignature":
        if len(raw) < 16:
            raise EncodingError("timeforge signature truncated")
        t = int.from_bytes(raw[:8], "big")
        delta = int.from_bytes(raw[8:16], "big")
        return cls(proof=sig.RingSignature.decode(raw[16:]), t=t, delta=delta)


def tf_keygen(params: PvtkParams, seed: bytes | None = None) -> tuple[TfPublicKey, int]:
    kp = sig.sig_keygen(seed)
    return TfPublicKey(pk=kp.pk, params=params), kp.sk


def _statement(msg: bytes, t: int, delta: int) -> bytes:
    return (b"KF/timeforge\x00" + len(msg).to_bytes(8, "big") + msg
            + t.to_bytes(8, "big") + delta.to_bytes(8, "big"))


def _build_ring(pk_obj: TfPublicKey, t: int, delta: int,
                recipient_pk: int | None) -> tuple[int, ...]:
    target = pk_obj.params.epoch_of(t + delta)
    ring = [pk_obj.pk]
    if recipient_pk is not None:
        ring.append(recipient_pk)
    ring.append(pk_obj.params.points[target])
    return tuple(ring)


def tf_sign(
    pk_obj: TfPublicKey,
    sk: int,
    msg: bytes,
    t: int,
    delta: int,
    recipient_pk: int | None = None,
) -> TimeForgeSignature:
    """Honest signature: close the ring with the sender slot."""
    ring = _build_ring(pk_obj, t, delta, recipient_pk)
    proof = sig.ring_sign(ring, 0, sk, _statement(msg, t, delta))
    return TimeForgeSignature(proof=proof, t=t, delta=delta)


def tf_verify(
    pk_obj: TfPublicKey,
    msg: bytes,
    signature: TimeForgeSignature,
    recipient_pk: int | None = None,
) -> bool:
    """Rebuild the ring from public values and check the proof."""
    try:
        ring = _build_ring(pk_obj, signature.t, signature.delta, recipient_pk)
    except (EpochError, TypeError, ValueError):
        return False
    return sig.ring_verify(ring, _statement(msg, signature.t, signature.delta),
                           signature.proof)


def tf_forge(
    pk_obj: TfPublicKey,
    msg: bytes,
    t: int,
    s: int,
    delta: int,
    proof: PvtkProof | None = None,
    recipient_pk: int | None = None,
    recipient_sk: int | None = None,
) -> TimeForgeSignature:
    """Forge without the sender key.

    Either hand in the released timekeeper scalar for the statement's epoch
    (universal forgery, available once that epoch has passed), or the
    recipient's secret key (recipient forgery, available immediately when
    the ring carries a recipient slot).
    """
    if recipient_sk is not None:
        if recipient_pk is None:
            recipient_pk = group.pow_g(recipient_sk)
        ring = _build_ring(pk_obj, t, delta, recipient_pk)
        ring_proof = sig.ring_sign(ring, 1, recipient_sk, _statement(msg, t, delta))
        return TimeForgeSignature(proof=ring_proof, t=t, delta=delta)

    if proof is None:
        raise KeyForgeError("need a timekeeper proof or a recipient key to forge")
    target = pk_obj.params.epoch_of(t + delta)
    if s < target:
        raise EpochError(f"cannot forge early: epoch {s} precedes statement epoch {target}")
    if not tk_verify(pk_obj.params, s, proof):
        raise EpochError("timekeeper proof does not verify")
    if s != target:
        # Scalars for distinct epochs are independent; the ring slot is the
        # statement epoch's point, so only that epoch's release closes it.
        # The release stream is cumulative, so the exact proof always exists
        # by the time any later one does.
        raise EpochError(
            f"proof is for epoch {s}; fetch the released scalar for epoch {target}"
        )
    ring = _build_ring(pk_obj, t, delta, recipient_pk)
    ring_proof = sig.ring_sign(ring, len(ring) - 1, proof.k, _statement(msg, t, delta))
    return TimeForgeSignature(proof=ring_proof, t=t, delta=delta)
