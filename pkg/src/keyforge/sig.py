"""Discrete-log signatures: a deterministic Schnorr scheme, a 1-of-n ring
signature, and the keyed PRF used to derive every nonce and subkey.

All signing here is derandomized: nonces come from a PRF of the secret key
and the message, so a given (key, message) pair always produces identical
bytes.  The equality-based tests higher in the stack (forged output must
equal honest output) depend on this.

The ring signature chains Schnorr challenges around the ring: the challenge
for slot i+1 is a hash of the ring, the message, and slot i's recovered
commitment.  A signer who knows the secret for any one slot can close the
ring; verifiers learn nothing about which slot that was.
"""

from __future__ import annotations

import hashlib
import hmac
from dataclasses import dataclass

from . import group
from .errors import EncodingError, KeyForgeError

PRF_KEY_LEN = 32

SIG_LEN = 2 * group.SCALAR_LEN


def prf(key: bytes, label: bytes) -> bytes:
    """HMAC-SHA256 of label under a 32-byte key."""
    if len(key) != PRF_KEY_LEN:
        raise KeyForgeError(f"PRF key must be {PRF_KEY_LEN} bytes")
    return hmac.new(key, label, hashlib.sha256).digest()


def new_prf_key(seed: bytes | None = None) -> bytes:
    if seed is None:
        import secrets

        return secrets.token_bytes(PRF_KEY_LEN)
    return hashlib.sha256(b"KF/prf-key\x00" + seed).digest()


@dataclass(frozen=True)
class SigKeyPair:
    sk: int
    pk: int


@dataclass(frozen=True)
class Signature:
    """Challenge-form Schnorr pair (c, s); 64 bytes on the wire."""

    challenge: int
    response: int

    def encode(self) -> bytes:
        return group.encode_scalar(self.challenge) + group.encode_scalar(self.response)

    @classmethod
    def decode(cls, raw: bytes) -> "Signature":
        if len(raw) != SIG_LEN:
            raise EncodingError(f"signature must be {SIG_LEN} bytes, got {len(raw)}")
        return cls(
            group.decode_scalar(raw[: group.SCALAR_LEN]),
            group.decode_scalar(raw[group.SCALAR_LEN:]),
        )


def sig_keygen(seed: bytes | None = None) -> SigKeyPair:
    """Fresh key pair; deterministic when a 32-byte seed is supplied."""
    if seed is not None:
        sk = group.nonzero_hash_to_scalar("sig/keygen", seed)
    else:
        sk = group.random_scalar()
    return SigKeyPair(sk=sk, pk=group.pow_g(sk))


def _challenge(pk: int, commitment: int, msg: bytes) -> int:
    return group.hash_to_scalar(
        "sig/challenge", group.encode_element(pk), group.encode_element(commitment), msg
    )


def sig_sign(kp: SigKeyPair, msg: bytes) -> Signature:
    """Sign msg; nonce is PRF-derived so output bytes are a pure function of inputs."""
    k = group.nonzero_hash_to_scalar("sig/nonce", group.encode_scalar(kp.sk), msg)
    commitment = group.pow_g(k)
    c = _challenge(kp.pk, commitment, msg)
    s = (k + c * kp.sk) % group.Q
    return Signature(challenge=c, response=s)


def sig_verify(pk: int, msg: bytes, sig: Signature) -> bool:
    """True iff the verification equation closes; malformed input is just False."""
    try:
        if not 1 <= pk < group.P:
            return False
        if not (0 <= sig.challenge < group.Q and 0 <= sig.response < group.Q):
            return False
        # R = g^s * pk^(-c); then the challenge must recompute.
        r = group.mul(
            group.pow_g(sig.response),
            group.pow_base(pk, (group.Q - sig.challenge) % group.Q),
        )
        return _challenge(pk, r, msg) == sig.challenge
    except (EncodingError, ValueError, TypeError):
        return False


def sig_verify_bytes(pk: int, msg: bytes, raw: bytes) -> bool:
    try:
        sig = Signature.decode(raw)
    except EncodingError:
        return False
    return sig_verify(pk, msg, sig)


# --- 1-of-n ring signature -------------------------------------------------


@dataclass(frozen=True)
class RingSignature:
    ring: tuple[int, ...]
    challenges: tuple[int, ...]
    responses: tuple[int, ...]

    def encode(self) -> bytes:
        n = len(self.ring)
        out = [n.to_bytes(4, "big")]
        out += [group.encode_element(y) for y in self.ring]
        out += [group.encode_scalar(c) for c in self.challenges]
        out += [group.encode_scalar(s) for s in self.responses]
        return b"".join(out)

    @classmethod
    def decode(cls, raw: bytes) -> "RingSignature":
        if len(raw) < 4:
            raise EncodingError("ring signature truncated")
        n = int.from_bytes(raw[:4], "big")
        if n < 1 or n > 4096:
            raise EncodingError("implausible ring size")
        need = 4 + n * (group.ELEMENT_LEN + 2 * group.SCALAR_LEN)
        if len(raw) != need:
            raise EncodingError(f"ring signature must be {need} bytes, got {len(raw)}")
        off = 4
        ring = []
        for _ in range(n):
            ring.append(group.decode_element(raw[off:off + group.ELEMENT_LEN]))
            off += group.ELEMENT_LEN
        challenges = []
        for _ in range(n):
            challenges.append(group.decode_scalar(raw[off:off + group.SCALAR_LEN]))
            off += group.SCALAR_LEN
        responses = []
        for _ in range(n):
            responses.append(group.decode_scalar(raw[off:off + group.SCALAR_LEN]))
            off += group.SCALAR_LEN
        return cls(tuple(ring), tuple(challenges), tuple(responses))


def _ring_bytes(ring: tuple[int, ...]) -> bytes:
    return len(ring).to_bytes(4, "big") + b"".join(group.encode_element(y) for y in ring)


def _ring_challenge(ring_enc: bytes, msg: bytes, slot: int, commitment: int) -> int:
    return group.hash_to_scalar(
        "ring/challenge",
        ring_enc,
        msg,
        slot.to_bytes(4, "big"),
        group.encode_element(commitment),
    )


def _tape_scalar(tape: bytes, counter: int) -> int:
    return group.nonzero_hash_to_scalar("ring/tape", tape, counter.to_bytes(4, "big"))


def ring_sign(
    ring: list[int] | tuple[int, ...],
    index: int,
    sk: int,
    msg: bytes,
    tape: bytes | None = None,
) -> RingSignature:
    """Sign msg knowing the secret for ring[index].

    The random tape defaults to a hash of (sk, ring, msg), keeping the output
    deterministic per call site while remaining uniform across messages, so
    transcripts reveal nothing about which slot signed.
    """
    ring = tuple(ring)
    n = len(ring)
    if n < 1:
        raise KeyForgeError("ring must not be empty")
    if not 0 <= index < n:
        raise KeyForgeError(f"signer index {index} out of range for ring of {n}")
    if group.pow_g(sk) != ring[index]:
        raise KeyForgeError("secret key does not match the ring slot")

    ring_enc = _ring_bytes(ring)
    if tape is None:
        tape = hashlib.sha512(
            b"KF/ring/seed\x00" + group.encode_scalar(sk) + ring_enc + msg
        ).digest()

    challenges = [0] * n
    responses = [0] * n
    nonce = _tape_scalar(tape, 0)
    commitment = group.pow_g(nonce)
    challenges[(index + 1) % n] = _ring_challenge(ring_enc, msg, (index + 1) % n, commitment)
    for step in range(1, n):
        i = (index + step) % n
        responses[i] = _tape_scalar(tape, step)
        r_i = group.mul(
            group.pow_g(responses[i]),
            group.pow_base(ring[i], (group.Q - challenges[i]) % group.Q),
        )
        challenges[(i + 1) % n] = _ring_challenge(ring_enc, msg, (i + 1) % n, r_i)
    responses[index] = (nonce + challenges[index] * sk) % group.Q
    return RingSignature(ring, tuple(challenges), tuple(responses))


def ring_verify(ring: list[int] | tuple[int, ...], msg: bytes, sig: RingSignature) -> bool:
    """True iff every challenge in the chain recomputes from the previous slot."""
    try:
        ring = tuple(ring)
        n = len(ring)
        if n < 1 or sig.ring != ring:
            return False
        if len(sig.challenges) != n or len(sig.responses) != n:
            return False
        for v in sig.challenges + sig.responses:
            if not 0 <= v < group.Q:
                return False
        if any(not 1 <= y < group.P for y in ring):
            return False
        ring_enc = _ring_bytes(ring)
        for i in range(n):
            r_i = group.mul(
                group.pow_g(sig.responses[i]),
                group.pow_base(ring[i], (group.Q - sig.challenges[i]) % group.Q),
            )
            if _ring_challenge(ring_enc, msg, (i + 1) % n, r_i) != sig.challenges[(i + 1) % n]:
                return False
        return True
    except (EncodingError, ValueError, TypeError):
        return False
