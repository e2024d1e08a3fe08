"""Forward-forgeable email signatures.

Signatures are bound to short time-chunk tags.  While a tag is live the
signature authenticates the mail like any DKIM signature would; once the
chunk ends, the signer publishes the per-tag secret key material (compressed
to a logarithmic-size tree cover), at which point anyone can produce
byte-identical signatures and the mail stops being attributable.  A
forge-on-request protocol gives recipients the same power immediately, and
an alternative timekeeper-based scheme (:mod:`keyforge.timeforge`) achieves
expiry without the signer publishing anything.

Layering, bottom up: :mod:`keyforge.group` and :mod:`keyforge.sig` (group
arithmetic, Schnorr + ring signatures, PRF), :mod:`keyforge.hibs`
(certificate-chain hierarchical identities), :mod:`keyforge.ffs` (tagged
signing, expiry covers, forging), :mod:`keyforge.tagtree` (time-chunk tag
spaces), :mod:`keyforge.protocol` / :mod:`keyforge.pipeline` (the mail
protocol and simulators), :mod:`keyforge.server` (key server), and the CLI
entry points ``kf-filter``, ``kf-server``, ``kf-admin``, ``kf-bench``.
"""

from .errors import KeyForgeError
from .ffs import (
    ExpiryInfo,
    FfsKeyPair,
    KeyCache,
    compress,
    expire_prefix,
    expiry_size,
    ffs_expire,
    ffs_forge,
    ffs_keygen,
    ffs_sign,
    ffs_verify,
    range_cover,
    range_cover_size,
)
from .hibs import CertCache, HibsMasterKeys, HibsSecretKey, HibsSignature
from .protocol import (
    KeyForgeConfig,
    KeyForgeSignature,
    expiry_due,
    kf_sign,
    kf_verify,
    publish_expiry_info,
)
from .tagtree import TagSpace, calendar_layout, tag_text, uniform_layout

__version__ = "0.1.0"

__all__ = [
    "CertCache",
    "ExpiryInfo",
    "FfsKeyPair",
    "HibsMasterKeys",
    "HibsSecretKey",
    "HibsSignature",
    "KeyCache",
    "KeyForgeConfig",
    "KeyForgeError",
    "KeyForgeSignature",
    "TagSpace",
    "calendar_layout",
    "compress",
    "expire_prefix",
    "expiry_due",
    "expiry_size",
    "ffs_expire",
    "ffs_forge",
    "ffs_keygen",
    "ffs_sign",
    "ffs_verify",
    "kf_sign",
    "kf_verify",
    "publish_expiry_info",
    "range_cover",
    "range_cover_size",
    "tag_text",
    "uniform_layout",
    "__version__",
]
