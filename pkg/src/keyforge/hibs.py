"""Hierarchical identity-based signatures built from certificate chains.

Identities are tuples of byte strings.  Each level of a key is a fresh
Schnorr key pair whose public key is certified by the level above (level 0
being the master key), and the certified payload binds the **entire**
identity prefix so a certificate can never be replayed under a different
path.  A signature therefore carries the public half of the chain plus a
leaf signature over the message, and verifies against nothing but the
master verification key and the claimed identity tuple.

Key derivation is fully deterministic given the parent key, the child
component, and an explicit 32-byte randomness value rho.  Callers derive
rho values with the PRF travelling inside the secret key, which makes
derivation path-independent: extending a prefix key gives byte-identical
results to deriving from the master key directly.  Everything above (expiry,
forging, the simulators) leans on that invariant.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import group, sig
from .errors import DepthError, EncodingError, KeyForgeError, PrefixMismatchError

IdentityTuple = tuple[bytes, ...]

DEFAULT_MAX_DEPTH = 16

_RHO_LEN = 32


def encode_identity(identity: IdentityTuple) -> bytes:
    out = [len(identity).to_bytes(2, "big")]
    for comp in identity:
        out.append(len(comp).to_bytes(2, "big"))
        out.append(comp)
    return b"".join(out)


def decode_identity(raw: bytes, off: int = 0) -> tuple[IdentityTuple, int]:
    if len(raw) < off + 2:
        raise EncodingError("identity truncated")
    n = int.from_bytes(raw[off:off + 2], "big")
    off += 2
    comps = []
    for _ in range(n):
        if len(raw) < off + 2:
            raise EncodingError("identity component truncated")
        clen = int.from_bytes(raw[off:off + 2], "big")
        off += 2
        if len(raw) < off + clen:
            raise EncodingError("identity component truncated")
        comps.append(raw[off:off + clen])
        off += clen
    return tuple(comps), off


def is_prefix(prefix: IdentityTuple, identity: IdentityTuple) -> bool:
    return len(prefix) <= len(identity) and identity[: len(prefix)] == prefix


def validate_identity(identity: IdentityTuple, max_depth: int) -> None:
    if not 1 <= len(identity) <= max_depth:
        raise DepthError(f"identity depth {len(identity)} outside 1..{max_depth}")
    if any(len(c) == 0 for c in identity):
        raise KeyForgeError("identity components must be non-empty")


@dataclass(frozen=True)
class ChainLink:
    """Public half of one delegation step: the level key and its certificate."""

    level_pk: int
    cert: sig.Signature

    def encode(self) -> bytes:
        return group.encode_element(self.level_pk) + self.cert.encode()


_LINK_LEN = group.ELEMENT_LEN + sig.SIG_LEN


def _decode_link(raw: bytes, off: int) -> tuple[ChainLink, int]:
    if len(raw) < off + _LINK_LEN:
        raise EncodingError("chain link truncated")
    pk = group.decode_element(raw[off:off + group.ELEMENT_LEN])
    cert = sig.Signature.decode(raw[off + group.ELEMENT_LEN:off + _LINK_LEN])
    return ChainLink(pk, cert), off + _LINK_LEN


@dataclass(frozen=True)
class HibsMasterKeys:
    mvk: int
    msk_scalar: int
    prf_key: bytes
    max_depth: int = DEFAULT_MAX_DEPTH


@dataclass(frozen=True)
class HibsSecretKey:
    """Signing key for one identity tuple.

    Carries the PRF key from setup so that whoever holds this key (including
    anyone it is released to) derives sub-identity keys with exactly the same
    randomness the master would use.
    """

    identity: IdentityTuple
    chain: tuple[ChainLink, ...]
    leaf_sk: int
    prf_key: bytes
    max_depth: int = DEFAULT_MAX_DEPTH

    def encode(self) -> bytes:
        out = [
            encode_identity(self.identity),
            len(self.chain).to_bytes(2, "big"),
        ]
        out += [link.encode() for link in self.chain]
        out.append(group.encode_scalar(self.leaf_sk))
        out.append(self.prf_key)
        out.append(self.max_depth.to_bytes(2, "big"))
        return b"".join(out)

    @classmethod
    def decode(cls, raw: bytes, off: int = 0) -> tuple["HibsSecretKey", int]:
        identity, off = decode_identity(raw, off)
        if len(raw) < off + 2:
            raise EncodingError("chain length truncated")
        n = int.from_bytes(raw[off:off + 2], "big")
        off += 2
        links = []
        for _ in range(n):
            link, off = _decode_link(raw, off)
            links.append(link)
        if len(raw) < off + group.SCALAR_LEN + sig.PRF_KEY_LEN + 2:
            raise EncodingError("secret key truncated")
        leaf_sk = group.decode_scalar(raw[off:off + group.SCALAR_LEN])
        off += group.SCALAR_LEN
        prf_key = raw[off:off + sig.PRF_KEY_LEN]
        off += sig.PRF_KEY_LEN
        max_depth = int.from_bytes(raw[off:off + 2], "big")
        off += 2
        if len(identity) != n:
            raise EncodingError("identity/chain length mismatch")
        return cls(identity, tuple(links), leaf_sk, prf_key, max_depth), off


@dataclass(frozen=True)
class HibsSignature:
    chain: tuple[ChainLink, ...]
    leaf_sig: sig.Signature

    def encode(self) -> bytes:
        out = [len(self.chain).to_bytes(2, "big")]
        out += [link.encode() for link in self.chain]
        out.append(self.leaf_sig.encode())
        return b"".join(out)

    @classmethod
    def decode(cls, raw: bytes) -> "HibsSignature":
        if len(raw) < 2:
            raise EncodingError("signature truncated")
        n = int.from_bytes(raw[:2], "big")
        off = 2
        links = []
        for _ in range(n):
            link, off = _decode_link(raw, off)
            links.append(link)
        if len(raw) != off + sig.SIG_LEN:
            raise EncodingError("signature length mismatch")
        leaf = sig.Signature.decode(raw[off:])
        return cls(tuple(links), leaf)


def setup(seed: bytes | None = None, max_depth: int = DEFAULT_MAX_DEPTH) -> HibsMasterKeys:
    """Master key pair; deterministic under a seed."""
    if max_depth < 1:
        raise DepthError("max_depth must be >= 1")
    if seed is not None:
        msk = group.nonzero_hash_to_scalar("hibs/setup", seed)
        prf_key = sig.new_prf_key(seed)
    else:
        msk = group.random_scalar()
        prf_key = sig.new_prf_key()
    return HibsMasterKeys(mvk=group.pow_g(msk), msk_scalar=msk, prf_key=prf_key,
                          max_depth=max_depth)


def _cert_payload(level_pk: int, identity_prefix: IdentityTuple) -> bytes:
    # Binding the full prefix (not just the local component) kills cross-path
    # certificate splicing.
    return b"KF/hibs/cert\x00" + group.encode_element(level_pk) + encode_identity(identity_prefix)


def _leaf_payload(identity: IdentityTuple, msg: bytes) -> bytes:
    return b"KF/hibs/leaf\x00" + encode_identity(identity) + len(msg).to_bytes(8, "big") + msg


def _parent_parts(parent: HibsMasterKeys | HibsSecretKey) -> tuple[IdentityTuple, tuple, int, int]:
    if isinstance(parent, HibsMasterKeys):
        return (), (), parent.msk_scalar, parent.max_depth
    return parent.identity, parent.chain, parent.leaf_sk, parent.max_depth


def keygen(parent: HibsMasterKeys | HibsSecretKey, id_component: bytes,
           randomness: bytes) -> HibsSecretKey:
    """Derive the child key for parent identity extended by one component.

    The child is a pure function of (parent, id_component, randomness); the
    caller owns the choice of randomness.
    """
    if len(id_component) == 0:
        raise KeyForgeError("identity components must be non-empty")
    if len(randomness) != _RHO_LEN:
        raise KeyForgeError(f"randomness must be {_RHO_LEN} bytes")
    identity, chain, parent_scalar, max_depth = _parent_parts(parent)
    if len(identity) >= max_depth:
        raise DepthError(f"cannot extend identity beyond depth {max_depth}")
    child_identity = identity + (id_component,)
    child_sk = group.nonzero_hash_to_scalar(
        "hibs/child-sk",
        group.encode_scalar(parent_scalar),
        encode_identity(child_identity),
        randomness,
    )
    child_pk = group.pow_g(child_sk)
    cert = sig.sig_sign(
        sig.SigKeyPair(sk=parent_scalar, pk=group.pow_g(parent_scalar)),
        _cert_payload(child_pk, child_identity),
    )
    return HibsSecretKey(
        identity=child_identity,
        chain=chain + (ChainLink(child_pk, cert),),
        leaf_sk=child_sk,
        prf_key=parent.prf_key,
        max_depth=max_depth,
    )


def keygen_star(
    parent: HibsMasterKeys | HibsSecretKey,
    level: int,
    identity: IdentityTuple,
    randomness: list[bytes] | tuple[bytes, ...],
) -> HibsMasterKeys | HibsSecretKey:
    """Walk keygen from a level-``level`` prefix key down to ``identity``.

    ``randomness`` supplies rho for levels level+1..len(identity).  The result
    depends only on (master scalar, identity, rho values), never on which
    prefix the walk started from.
    """
    prefix, _, _, max_depth = _parent_parts(parent)
    if len(prefix) != level:
        raise PrefixMismatchError(f"parent key is level {len(prefix)}, not {level}")
    if identity[:level] != prefix:
        raise PrefixMismatchError("parent key does not match identity prefix")
    if len(identity) > max_depth:
        raise DepthError(f"identity depth {len(identity)} exceeds {max_depth}")
    if len(randomness) != len(identity) - level:
        raise KeyForgeError("need one randomness value per derived level")
    key: HibsMasterKeys | HibsSecretKey = parent
    for j in range(level, len(identity)):
        key = keygen(key, identity[j], randomness[j - level])
    return key


def hibs_sign(key: HibsSecretKey, msg: bytes) -> HibsSignature:
    leaf = sig.sig_sign(
        sig.SigKeyPair(sk=key.leaf_sk, pk=key.chain[-1].level_pk),
        _leaf_payload(key.identity, msg),
    )
    return HibsSignature(chain=key.chain, leaf_sig=leaf)


class CertCache:
    """Bounded memo of certificate checks that already passed.

    Chain prefixes repeat heavily across signatures from one domain, and the
    checks are pure, so caching positive results is sound.  Only successful
    verifications are stored.
    """

    def __init__(self, max_entries: int = 65536):
        self.max_entries = max_entries
        self._seen: dict[tuple[int, bytes, int, int], bool] = {}

    def check(self, parent_pk: int, payload: bytes, cert: sig.Signature) -> bool:
        key = (parent_pk, payload, cert.challenge, cert.response)
        hit = self._seen.get(key)
        if hit is not None:
            return hit
        ok = sig.sig_verify(parent_pk, payload, cert)
        if ok:
            if len(self._seen) >= self.max_entries:
                self._seen.clear()
            self._seen[key] = True
        return ok


def hibs_verify(
    mvk: int,
    identity: IdentityTuple,
    msg: bytes,
    signature: HibsSignature,
    cache: CertCache | None = None,
) -> bool:
    """Walk the chain from mvk, then check the leaf signature.

    Malformed or mismatched input returns False, never raises.
    """
    try:
        if len(identity) < 1 or len(signature.chain) != len(identity):
            return False
        if any(len(c) == 0 for c in identity):
            return False
        parent_pk = mvk
        for k, link in enumerate(signature.chain):
            payload = _cert_payload(link.level_pk, identity[: k + 1])
            if cache is not None:
                ok = cache.check(parent_pk, payload, link.cert)
            else:
                ok = sig.sig_verify(parent_pk, payload, link.cert)
            if not ok:
                return False
            parent_pk = link.level_pk
        return sig.sig_verify(parent_pk, _leaf_payload(identity, msg), signature.leaf_sig)
    except (EncodingError, ValueError, TypeError):
        return False
