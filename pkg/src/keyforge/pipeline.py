"""End-to-end mail signing and verification, the forge-on-request protocol,
and the two reference forgers ("simulators") that the equality tests drive.

Every path that emits a signed email goes through :func:`assemble_signed`,
and all signing is deterministic, so an email forged from released expiry
info -- or served through forge-on-request -- is byte-for-byte the email
the honest sender would have produced for the same content, metadata, and
tag.  That byte equality is the non-attributability claim in executable
form, and the test suite asserts it directly.

Verification failures carry one of five reason codes:
``missing-header``, ``unknown-domain``, ``digest-mismatch``,
``tag-expired-at-receipt``, ``bad-signature`` (checked in that order).
"""

from __future__ import annotations

import base64
from dataclasses import dataclass
from typing import Callable

from . import ffs, mailproto, protocol, sig, tagtree
from .errors import (
    EncodingError,
    ForgeRequestError,
    KeyForgeError,
    MailParseError,
    UnsignableError,
)
from .ffs import ExpiryInfo, KeyCache
from .hibs import CertCache, HibsMasterKeys, HibsSignature
from .mailproto import MailMessage
from .protocol import KeyForgeConfig
from .tagtree import Tag

REASON_MISSING_HEADER = "missing-header"
REASON_UNKNOWN_DOMAIN = "unknown-domain"
REASON_DIGEST_MISMATCH = "digest-mismatch"
REASON_TAG_EXPIRED = "tag-expired-at-receipt"
REASON_BAD_SIGNATURE = "bad-signature"


@dataclass(frozen=True)
class VerifyOutcome:
    ok: bool
    reason: str | None = None

    @classmethod
    def passed(cls) -> "VerifyOutcome":
        return cls(ok=True)

    @classmethod
    def failed(cls, reason: str) -> "VerifyOutcome":
        return cls(ok=False, reason=reason)


SignFn = Callable[[bytes], HibsSignature]  # 32-byte payload -> tag signature


def assemble_signed(
    msg: MailMessage,
    tag: Tag,
    domain: str,
    cfg: KeyForgeConfig,
    signer: SignFn,
) -> MailMessage:
    """Build the signed message for a fixed tag.

    This is the single assembly path shared by normal sending, the
    forge-on-request responder, and the simulators.
    """
    digest = mailproto.content_digest(msg)
    header = mailproto.KeyForgeHeader(
        domain=domain,
        tag_text=tagtree.tag_text(tag),
        expires_at=cfg.space.live_until(tag),
        body_hash_b64=base64.b64encode(digest).decode("ascii"),
    )
    signature = signer(header.signing_payload())
    return mailproto.attach_header(msg, header.with_signature(signature.encode()))


def sign_message(
    msg: MailMessage,
    sk: HibsMasterKeys,
    cfg: KeyForgeConfig,
    cache: KeyCache | None = None,
    tag: Tag | None = None,
) -> MailMessage:
    """Sign with the clock-derived tag (now + delta_hat) under cfg.domain."""
    if tag is None:
        tag = cfg.space.tag_of_time(cfg.now() + cfg.delta_hat)
    identity = tagtree.tag_to_identity(tag)
    return assemble_signed(
        msg, tag, cfg.domain, cfg,
        lambda payload: ffs.ffs_sign(sk, identity, payload, cache),
    )


def verify_message(
    msg: MailMessage,
    resolve_vk: Callable[[str], int | None],
    cfg: KeyForgeConfig,
    now: int | None = None,
    cert_cache: CertCache | None = None,
) -> VerifyOutcome:
    """Full receive-side check; the filter drops the message on any failure."""
    if now is None:
        now = cfg.now()
    try:
        header = mailproto.extract_header(msg)
    except MailParseError:
        return VerifyOutcome.failed(REASON_MISSING_HEADER)
    if header is None:
        return VerifyOutcome.failed(REASON_MISSING_HEADER)

    vk = resolve_vk(header.domain)
    if vk is None:
        return VerifyOutcome.failed(REASON_UNKNOWN_DOMAIN)

    try:
        tag = tagtree.parse_tag_text(header.tag_text, cfg.space)
    except KeyForgeError:
        return VerifyOutcome.failed(REASON_BAD_SIGNATURE)

    try:
        digest = mailproto.content_digest(msg)
    except UnsignableError:
        return VerifyOutcome.failed(REASON_DIGEST_MISMATCH)
    if base64.b64encode(digest).decode("ascii") != header.body_hash_b64:
        return VerifyOutcome.failed(REASON_DIGEST_MISMATCH)

    if not protocol.tag_is_live(cfg.space, tag, now):
        return VerifyOutcome.failed(REASON_TAG_EXPIRED)

    try:
        raw = base64.b64decode(header.signature_b64, validate=True)
        signature = HibsSignature.decode(raw)
    except (ValueError, EncodingError):
        return VerifyOutcome.failed(REASON_BAD_SIGNATURE)
    identity = tagtree.tag_to_identity(tag)
    if not ffs.ffs_verify(vk, identity, header.signing_payload(), signature, cert_cache):
        return VerifyOutcome.failed(REASON_BAD_SIGNATURE)
    return VerifyOutcome.passed()


# --- forge-on-request ---------------------------------------------------------

REQUEST_MAGIC = b"KFRQ"
REQUEST_VERSION = 1


@dataclass(frozen=True)
class ForgeRequest:
    """Request that the responder send (m, mu) back to the requester.

    ``server_sig`` is the requester's server signing the whole request
    content, requester identity included, with its request key.
    """

    requester: str
    mu: tuple[tuple[str, str], ...]
    body: bytes
    server_sig: sig.Signature

    @staticmethod
    def payload(requester: str, mu, body: bytes) -> bytes:
        out = [b"KF/forge-request\x00", requester.encode("utf-8"), b"\x00"]
        for name, value in mu:
            out.append(name.encode("utf-8") + b"\x00" + value.encode("utf-8") + b"\x00")
        out.append(len(body).to_bytes(8, "big"))
        out.append(body)
        return b"".join(out)

    def encode(self) -> bytes:
        req = self.requester.encode("utf-8")
        out = [REQUEST_MAGIC, REQUEST_VERSION.to_bytes(2, "big"),
               len(req).to_bytes(2, "big"), req,
               len(self.mu).to_bytes(2, "big")]
        for name, value in self.mu:
            n, v = name.encode("utf-8"), value.encode("utf-8")
            out += [len(n).to_bytes(2, "big"), n, len(v).to_bytes(4, "big"), v]
        out += [len(self.body).to_bytes(8, "big"), self.body, self.server_sig.encode()]
        return b"".join(out)

    @classmethod
    def decode(cls, raw: bytes) -> "ForgeRequest":
        if raw[:4] != REQUEST_MAGIC:
            raise EncodingError("not a forge request")
        if int.from_bytes(raw[4:6], "big") != REQUEST_VERSION:
            raise EncodingError("unsupported forge request version")
        off = 6

        def take(n: int) -> bytes:
            nonlocal off
            if len(raw) < off + n:
                raise EncodingError("forge request truncated")
            chunk = raw[off:off + n]
            off += n
            return chunk

        requester = take(int.from_bytes(take(2), "big")).decode("utf-8")
        mu = []
        for _ in range(int.from_bytes(take(2), "big")):
            name = take(int.from_bytes(take(2), "big")).decode("utf-8")
            value = take(int.from_bytes(take(4), "big")).decode("utf-8")
            mu.append((name, value))
        body = take(int.from_bytes(take(8), "big"))
        signature = sig.Signature.decode(take(sig.SIG_LEN))
        if off != len(raw):
            raise EncodingError("forge request has trailing bytes")
        return cls(requester=requester, mu=tuple(mu), body=body, server_sig=signature)


def make_forge_request(
    requester: str,
    mu,
    body: bytes,
    requester_server_key: sig.SigKeyPair,
) -> ForgeRequest:
    mu = tuple(mu)
    return ForgeRequest(
        requester=requester,
        mu=mu,
        body=body,
        server_sig=sig.sig_sign(requester_server_key, ForgeRequest.payload(requester, mu, body)),
    )


@dataclass(frozen=True)
class ForgeResponse:
    """Two fully formed emails, one per tag in {tag(t*-delta), tag(t*)}."""

    emails: tuple[MailMessage, MailMessage]
    tags: tuple[Tag, Tag]


def _domain_of(address: str) -> str:
    if "@" not in address:
        raise ForgeRequestError(f"requester {address!r} is not an address")
    return address.rsplit("@", 1)[1].lower()


def forge_on_request(
    sk: HibsMasterKeys,
    req: ForgeRequest,
    cfg: KeyForgeConfig,
    resolve_request_pk: Callable[[str], int | None],
    cache: KeyCache | None = None,
    now: int | None = None,
) -> ForgeResponse:
    """Answer a forge request with the two prescribed emails.

    Rejections (unsigned, badly signed, or not addressed back to the
    requester) raise ForgeRequestError; both guards exist so the protocol
    cannot be turned into a spoofing vector.
    """
    requester_domain = _domain_of(req.requester)
    request_pk = resolve_request_pk(requester_domain)
    if request_pk is None:
        raise ForgeRequestError(f"no request key known for domain {requester_domain}")
    if not sig.sig_verify(request_pk, ForgeRequest.payload(req.requester, req.mu, req.body),
                          req.server_sig):
        raise ForgeRequestError("request signature invalid")
    msg = MailMessage(headers=list(req.mu), body=req.body)
    recipient = msg.get("To")
    if recipient is None or recipient.strip().lower() != req.requester.strip().lower():
        raise ForgeRequestError("requested recipient is not the requester")

    t_star = cfg.now() if now is None else int(now)
    tags = (cfg.space.tag_of_time(t_star - cfg.delta_hat), cfg.space.tag_of_time(t_star))
    emails = tuple(
        sign_message(msg, sk, cfg, cache, tag=tag) for tag in tags
    )
    return ForgeResponse(emails=emails, tags=tags)


# --- simulators ----------------------------------------------------------------


def simulate_recipient(
    send_request: Callable[[ForgeRequest], ForgeResponse],
    requester: str,
    requester_server_key: sig.SigKeyPair,
    mu,
    body: bytes,
    cfg: KeyForgeConfig,
    now: int | None = None,
) -> MailMessage:
    """Forge an email to ourselves using only the ability to send mail.

    Issues a forge request and returns whichever response email carries the
    tag containing the current time; the protocol guarantees one does.
    """
    t = cfg.now() if now is None else int(now)
    response = send_request(make_forge_request(requester, mu, body, requester_server_key))
    for email, tag in zip(response.emails, response.tags):
        if cfg.space.contains(tag, t):
            return email
    raise KeyForgeError("no response email covers the current time")


def simulate_universal(
    expiry: ExpiryInfo,
    mu,
    body: bytes,
    t: int,
    cfg: KeyForgeConfig,
    domain: str | None = None,
) -> MailMessage | None:
    """Forge, from published expiry info alone, the email a sender would
    have produced so that it reads as sent at time ``t``.

    Returns None when the expiry info does not (yet) cover ``t``'s tag.
    """
    tag = cfg.space.tag_of_time(t)
    identity = tagtree.tag_to_identity(tag)
    if expiry.covering_entry(identity) is None:
        return None
    msg = MailMessage(headers=list(mu), body=body)

    def forge_signer(payload: bytes) -> HibsSignature:
        forged = ffs.ffs_forge(expiry, identity, payload)
        assert forged is not None  # covering entry checked above
        return forged

    return assemble_signed(msg, tag, domain or cfg.domain, cfg, forge_signer)
