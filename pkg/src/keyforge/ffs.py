"""Forward-forgeable signatures over the hierarchical scheme.

Signing happens under a *tag* (an identity tuple addressing a node of a tag
space); expiring a set of tags releases the secret keys for the smallest set
of tree nodes that covers exactly those tags, after which anyone holding the
release can re-derive the per-tag keys and produce signatures
indistinguishable from honest ones -- byte-identical, in fact, because all
derivation randomness comes from the PRF carried inside the released keys.

The cover computation (:func:`compress`) returns the unique minimal
antichain with the same leaf cover as its input: descendants of other input
tags are dropped, then complete sibling sets are merged upward level by
level (never into the root; level-1 nodes are the shallowest release).

:func:`range_cover` / :func:`range_cover_size` compute the same cover for a
contiguous leaf range arithmetically, without materializing the leaves,
which is what the expiry publisher and the size accounting use on
production-sized spaces.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass

from . import group, hibs, sig, tagtree
from .errors import EncodingError, InvalidTagError, KeyForgeError
from .hibs import HibsMasterKeys, HibsSecretKey, HibsSignature, IdentityTuple
from .tagtree import Tag, TagSpace

EXPIRY_MAGIC = b"KFE1"
EXPIRY_VERSION = 1

# Byte accounting model for expiry sizes: one released key is tallied at the
# size of a bare secret scalar plus its tag, the conventional 64-byte figure.
MODEL_KEY_BYTES = 64


@dataclass(frozen=True)
class FfsKeyPair:
    vk: int
    sk: HibsMasterKeys


def ffs_keygen(seed: bytes | None = None, max_depth: int = hibs.DEFAULT_MAX_DEPTH) -> FfsKeyPair:
    master = hibs.setup(seed, max_depth=max_depth)
    return FfsKeyPair(vk=master.mvk, sk=master)


def rho_for(prf_key: bytes, identity_prefix: IdentityTuple) -> bytes:
    """Derivation randomness for one node: PRF of the full identity prefix."""
    return sig.prf(prf_key, b"KF/rho\x00" + hibs.encode_identity(identity_prefix))


def rho_vec(prf_key: bytes, identity: IdentityTuple, from_level: int = 0) -> list[bytes]:
    return [rho_for(prf_key, identity[: j + 1]) for j in range(from_level, len(identity))]


class KeyCache:
    """LRU of derived identity keys; sound because derivation is deterministic."""

    def __init__(self, max_entries: int = 4096):
        self.max_entries = max_entries
        self._keys: OrderedDict[IdentityTuple, HibsSecretKey] = OrderedDict()

    def get(self, identity: IdentityTuple) -> HibsSecretKey | None:
        key = self._keys.get(identity)
        if key is not None:
            self._keys.move_to_end(identity)
        return key

    def put(self, key: HibsSecretKey) -> None:
        self._keys[key.identity] = key
        if len(self._keys) > self.max_entries:
            self._keys.popitem(last=False)


def derive_key(
    master: HibsMasterKeys,
    identity: IdentityTuple,
    cache: KeyCache | None = None,
) -> HibsSecretKey:
    """Derive the key for an identity from the master key, deepest-cached-first."""
    hibs.validate_identity(identity, master.max_depth)
    if cache is not None:
        hit = cache.get(identity)
        if hit is not None:
            return hit
        # extend from the deepest cached ancestor, caching every level walked
        start = 0
        parent: HibsMasterKeys | HibsSecretKey = master
        for level in range(len(identity) - 1, 0, -1):
            anc = cache.get(identity[:level])
            if anc is not None:
                parent, start = anc, level
                break
        key = parent
        for j in range(start, len(identity)):
            key = hibs.keygen(key, identity[j], rho_for(master.prf_key, identity[: j + 1]))
            cache.put(key)
        return key
    key = hibs.keygen_star(master, 0, identity, rho_vec(master.prf_key, identity))
    assert isinstance(key, HibsSecretKey)
    return key


def ffs_sign(
    sk: HibsMasterKeys,
    tag_identity: IdentityTuple,
    msg: bytes,
    cache: KeyCache | None = None,
) -> HibsSignature:
    return hibs.hibs_sign(derive_key(sk, tag_identity, cache), msg)


def ffs_verify(
    vk: int,
    tag_identity: IdentityTuple,
    msg: bytes,
    signature: HibsSignature,
    cache: hibs.CertCache | None = None,
) -> bool:
    return hibs.hibs_verify(vk, tag_identity, msg, signature, cache)


# --- covers ----------------------------------------------------------------


def compress(space: TagSpace, tags) -> list[Tag]:
    """Minimal antichain with exactly the leaf cover of ``tags``.

    Input tags may be leaves or internal nodes (an internal tag stands for
    its whole subtree).  Output is sorted lexicographically.
    """
    by_level: dict[int, set[tuple[int, ...]]] = {}
    deepest = 0
    for tag in tags:
        prefix = space.validate_tag(tag)
        if len(tag) > space.time_levels:
            raise InvalidTagError("policy components are not expirable nodes")
        by_level.setdefault(len(prefix), set()).add(prefix)
        deepest = max(deepest, len(prefix))

    # Drop nodes that already sit under another input node.
    all_nodes = set().union(*by_level.values()) if by_level else set()
    for level in sorted(by_level, reverse=True):
        kept = set()
        for node in by_level[level]:
            if not any(node[:k] in all_nodes for k in range(1, level)):
                kept.add(node)
        by_level[level] = kept

    # Merge complete sibling sets upward; level-1 nodes never merge further.
    for level in range(deepest, 1, -1):
        nodes = by_level.get(level, set())
        if not nodes:
            continue
        children: dict[tuple[int, ...], set[int]] = {}
        for node in nodes:
            children.setdefault(node[:-1], set()).add(node[-1])
        for parent, comps in children.items():
            if len(comps) == space.child_count(parent):
                nodes.difference_update(parent + (c,) for c in comps)
                by_level.setdefault(level - 1, set()).add(parent)

    out: list[Tag] = []
    for level in sorted(by_level):
        out.extend(by_level[level])
    return sorted(out)


def cover_leaf_indices(space: TagSpace, tags) -> set[int]:
    """All leaf indices under the given tags (small spaces / oracles only)."""
    covered: set[int] = set()
    for tag in tags:
        prefix = space.validate_tag(tag)
        if len(prefix) == space.time_levels:
            covered.add(space.index_of_tag(prefix))
            continue
        lo = _first_leaf_index(space, prefix)
        covered.update(range(lo, lo + space.subtree_leaf_count(prefix)))
    return covered


def _first_leaf_index(space: TagSpace, prefix: tuple[int, ...]) -> int:
    node = prefix
    while len(node) < space.time_levels:
        node = node + (1,)
    return space.index_of_tag(node)


def _child_blocks(space: TagSpace, prefix: tuple[int, ...]):
    """Yield (component, width) for each child; width = leaves beneath it."""
    n = space.child_count(prefix)
    if space.layout == "uniform" or len(prefix) >= 2:
        width = space.subtree_leaf_count(prefix) // n
        return n, width, None
    widths = [space.subtree_leaf_count(prefix + (c,)) for c in range(1, n + 1)]
    return n, None, widths


def _locate(lo: int, n: int, width: int | None, widths) -> tuple[int, int]:
    """Child index (0-based) containing relative leaf lo, and its start."""
    if width is not None:
        c = lo // width
        return c, c * width
    acc = 0
    for c, w in enumerate(widths):
        if lo < acc + w:
            return c, acc
        acc += w
    raise InvalidTagError("leaf offset out of range")


def range_cover(space: TagSpace, from_leaf: int, to_leaf: int) -> list[Tag]:
    """Minimal antichain covering exactly leaves from_leaf..to_leaf (inclusive).

    Equal to ``compress(space, lex_range(from_leaf, to_leaf))`` but computed
    by digit arithmetic.
    """
    if not 0 <= from_leaf <= to_leaf < space.leaf_count():
        raise InvalidTagError(
            f"range {from_leaf}..{to_leaf} outside 0..{space.leaf_count() - 1}"
        )
    out: list[Tag] = []

    def rec(prefix: tuple[int, ...], lo: int, hi: int) -> None:
        count = space.subtree_leaf_count(prefix)
        if lo == 0 and hi == count - 1 and len(prefix) >= 1:
            out.append(prefix)
            return
        n, width, widths = _child_blocks(space, prefix)
        a, a_start = _locate(lo, n, width, widths)
        b, b_start = _locate(hi, n, width, widths)
        if a == b:
            rec(prefix + (a + 1,), lo - a_start, hi - b_start)
            return
        rec(prefix + (a + 1,), lo - a_start,
            (width if width is not None else widths[a]) - 1)
        for c in range(a + 1, b):
            out.append(prefix + (c + 1,))
        rec(prefix + (b + 1,), 0, hi - b_start)

    rec((), from_leaf, to_leaf)
    return sorted(out)


def range_cover_size(space: TagSpace, from_leaf: int, to_leaf: int) -> int:
    """len(range_cover(...)) without materializing the middle run."""
    if not 0 <= from_leaf <= to_leaf < space.leaf_count():
        raise InvalidTagError("leaf range out of bounds")

    def rec(prefix: tuple[int, ...], lo: int, hi: int) -> int:
        count = space.subtree_leaf_count(prefix)
        if lo == 0 and hi == count - 1 and len(prefix) >= 1:
            return 1
        n, width, widths = _child_blocks(space, prefix)
        a, a_start = _locate(lo, n, width, widths)
        b, b_start = _locate(hi, n, width, widths)
        if a == b:
            return rec(prefix + (a + 1,), lo - a_start, hi - b_start)
        left = rec(prefix + (a + 1,), lo - a_start,
                   (width if width is not None else widths[a]) - 1)
        right = rec(prefix + (b + 1,), 0, hi - b_start)
        return left + (b - a - 1) + right

    return rec((), from_leaf, to_leaf)


# --- expiry info -------------------------------------------------------------


@dataclass(frozen=True)
class ExpiryInfo:
    """A published release: (identity prefix, secret key) pairs plus the vk.

    Entries form an antichain (no entry prefixes another) and are sorted by
    identity for canonical serialization.
    """

    vk: int
    entries: tuple[tuple[IdentityTuple, HibsSecretKey], ...]

    def covering_entry(self, identity: IdentityTuple) -> HibsSecretKey | None:
        for prefix, key in self.entries:
            if hibs.is_prefix(prefix, identity):
                return key
        return None

    def serialize(self) -> bytes:
        out = [EXPIRY_MAGIC, EXPIRY_VERSION.to_bytes(2, "big"),
               group.encode_element(self.vk), len(self.entries).to_bytes(4, "big")]
        for identity, key in self.entries:
            blob = key.encode()
            out.append(hibs.encode_identity(identity))
            out.append(len(blob).to_bytes(4, "big"))
            out.append(blob)
        return b"".join(out)

    @classmethod
    def deserialize(cls, raw: bytes) -> "ExpiryInfo":
        if raw[:4] != EXPIRY_MAGIC:
            raise EncodingError("not an expiry file")
        if int.from_bytes(raw[4:6], "big") != EXPIRY_VERSION:
            raise EncodingError("unsupported expiry file version")
        off = 6
        vk = group.decode_element(raw[off:off + group.ELEMENT_LEN])
        off += group.ELEMENT_LEN
        if len(raw) < off + 4:
            raise EncodingError("expiry file truncated")
        n = int.from_bytes(raw[off:off + 4], "big")
        off += 4
        entries = []
        for _ in range(n):
            identity, off = hibs.decode_identity(raw, off)
            if len(raw) < off + 4:
                raise EncodingError("expiry entry truncated")
            blob_len = int.from_bytes(raw[off:off + 4], "big")
            off += 4
            key, key_off = HibsSecretKey.decode(raw[off:off + blob_len])
            if key_off != blob_len:
                raise EncodingError("expiry entry has trailing bytes")
            off += blob_len
            entries.append((identity, key))
        if off != len(raw):
            raise EncodingError("expiry file has trailing bytes")
        return cls(vk=vk, entries=tuple(entries))


def _entries_for_cover(sk: HibsMasterKeys, cover: list[Tag],
                       cache: KeyCache | None) -> tuple:
    entries = []
    for tag in cover:
        identity = tagtree.tag_to_identity(tag)
        entries.append((identity, derive_key(sk, identity, cache)))
    entries.sort(key=lambda e: e[0])
    return tuple(entries)


def ffs_expire(
    sk: HibsMasterKeys,
    space: TagSpace,
    tags,
    cache: KeyCache | None = None,
) -> ExpiryInfo:
    """Release keys for the compressed cover of ``tags`` (empty set is fine)."""
    cover = compress(space, tags)
    return ExpiryInfo(vk=group.pow_g(sk.msk_scalar),
                      entries=_entries_for_cover(sk, cover, cache))


def expire_prefix(
    sk: HibsMasterKeys,
    space: TagSpace,
    through_leaf: int,
    cache: KeyCache | None = None,
) -> ExpiryInfo:
    """Release keys covering leaves 0..through_leaf without materializing them."""
    cover = range_cover(space, 0, through_leaf)
    return ExpiryInfo(vk=group.pow_g(sk.msk_scalar),
                      entries=_entries_for_cover(sk, cover, cache))


def ffs_forge(
    expiry: ExpiryInfo,
    tag_identity: IdentityTuple,
    msg: bytes,
) -> HibsSignature | None:
    """Forge a signature for an expired tag; None when the tag is not covered.

    The released key carries the derivation PRF, so the forged signature is
    byte-identical to what the honest signer would have produced.
    """
    entry = expiry.covering_entry(tag_identity)
    if entry is None:
        return None
    if entry.identity == tag_identity:
        key = entry
    else:
        key = hibs.keygen_star(
            entry, len(entry.identity), tag_identity,
            rho_vec(entry.prf_key, tag_identity, from_level=len(entry.identity)),
        )
        assert isinstance(key, HibsSecretKey)
    return hibs.hibs_sign(key, msg)


def expiry_size(expiry: ExpiryInfo, key_model_bytes: int | None = MODEL_KEY_BYTES
                ) -> tuple[int, int]:
    """(entry count, byte count).

    With the default model every released key is tallied at
    ``MODEL_KEY_BYTES``; passing None counts actual serialized bytes.
    """
    n = len(expiry.entries)
    if key_model_bytes is None:
        return n, len(expiry.serialize())
    return n, n * key_model_bytes


def forgeable(expiry: ExpiryInfo, tag_identity: IdentityTuple) -> bool:
    return expiry.covering_entry(tag_identity) is not None
