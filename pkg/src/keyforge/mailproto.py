"""Minimal mail message handling: parsing, canonicalization, and the
signature header.

Only what the filter needs is implemented: headers up to the first empty
line (folded values unfolded), opaque body bytes, CRLF on output.  The
canonical form that gets hashed is a fixed-order subset of headers (From,
To, Subject, Date, Message-ID) with whitespace collapsed, then the
signature header's parameter string with an empty signature slot, then the
exact body bytes.  Reordering unrelated headers therefore never disturbs
the digest; touching any covered field does.

The signature header is DKIM-shaped::

    X-KeyForge-Signature: v=1; d=example.com; t=1/3/12/40; x=1767226800;
        bh=<base64 content hash>; b=<base64 signature>

``t`` is the tag, ``x`` the Unix time at which the tag's chunk ends
(advisory; verifiers recompute it from the tag), ``bh`` the content hash,
and ``b`` the tag signature over the parameter string with ``b=`` empty.
"""

from __future__ import annotations

import base64
import hashlib
import re
from dataclasses import dataclass, replace

from .errors import MailParseError, UnsignableError

HEADER_NAME = "X-KeyForge-Signature"
VERSION = 1

CANONICAL_HEADERS = ("From", "To", "Subject", "Date", "Message-ID")
REQUIRED_HEADERS = ("From", "To")

_WSP_RUN = re.compile(rb"[ \t]+")


@dataclass
class MailMessage:
    headers: list[tuple[str, str]]
    body: bytes

    def get(self, name: str) -> str | None:
        lname = name.lower()
        for hname, value in self.headers:
            if hname.lower() == lname:
                return value
        return None

    def get_all(self, name: str) -> list[str]:
        lname = name.lower()
        return [v for n, v in self.headers if n.lower() == lname]

    def remove(self, name: str) -> None:
        lname = name.lower()
        self.headers = [(n, v) for n, v in self.headers if n.lower() != lname]

    def append(self, name: str, value: str) -> None:
        self.headers.append((name, value))


def parse_message(raw: bytes) -> MailMessage:
    """Split headers from body; tolerant of LF-only input, never crashes.

    Structural problems (a header line with no colon, a continuation with
    nothing to continue) raise MailParseError carrying the byte offset.
    """
    headers: list[tuple[str, str]] = []
    pos = 0
    n = len(raw)
    while pos < n:
        eol = raw.find(b"\n", pos)
        line_end = eol if eol >= 0 else n
        line = raw[pos:line_end]
        if line.endswith(b"\r"):
            line = line[:-1]
        if line == b"":
            body_start = (eol + 1) if eol >= 0 else n
            return MailMessage(headers=headers, body=raw[body_start:])
        if line[:1] in (b" ", b"\t"):
            if not headers:
                raise MailParseError("continuation line before any header", pos)
            name, value = headers[-1]
            headers[-1] = (name, value + " " + line.lstrip(b" \t").decode("latin-1"))
        else:
            colon = line.find(b":")
            if colon <= 0:
                raise MailParseError("header line without a name", pos)
            name = line[:colon].decode("latin-1").strip()
            if not name or any(c in name for c in " \t"):
                raise MailParseError("malformed header name", pos)
            headers.append((name, line[colon + 1:].lstrip(b" \t").decode("latin-1")))
        if eol < 0:
            break
        pos = eol + 1
    return MailMessage(headers=headers, body=b"")


def render_message(msg: MailMessage) -> bytes:
    out = []
    for name, value in msg.headers:
        out.append(f"{name}: {value}\r\n".encode("latin-1"))
    out.append(b"\r\n")
    out.append(msg.body)
    return b"".join(out)


def _canonical_line(name: str, value: str) -> bytes:
    folded = _WSP_RUN.sub(b" ", value.encode("latin-1")).strip()
    return name.lower().encode("ascii") + b": " + folded + b"\r\n"


def content_digest(msg: MailMessage) -> bytes:
    """SHA-256 over the canonical header subset and the exact body bytes."""
    for required in REQUIRED_HEADERS:
        if msg.get(required) is None:
            raise UnsignableError(f"message has no {required} header")
    block = [b"KF/mail-content\x00"]
    for name in CANONICAL_HEADERS:
        value = msg.get(name)
        if value is not None:
            block.append(_canonical_line(name, value))
    block.append(b"\r\n")
    block.append(msg.body)
    return hashlib.sha256(b"".join(block)).digest()


@dataclass(frozen=True)
class KeyForgeHeader:
    """Parsed form of the signature header's parameter list."""

    domain: str
    tag_text: str
    expires_at: int
    body_hash_b64: str
    signature_b64: str = ""
    version: int = VERSION

    def params(self, include_signature: bool = True) -> str:
        sig = self.signature_b64 if include_signature else ""
        return (
            f"v={self.version}; d={self.domain}; t={self.tag_text}; "
            f"x={self.expires_at}; bh={self.body_hash_b64}; b={sig}"
        )

    def signing_payload(self) -> bytes:
        """The 32-byte digest the key server signs for this header."""
        return hashlib.sha256(
            b"KF/mail-sign\x00" + self.params(include_signature=False).encode("ascii")
        ).digest()

    def with_signature(self, raw_signature: bytes) -> "KeyForgeHeader":
        return replace(self, signature_b64=base64.b64encode(raw_signature).decode("ascii"))


def parse_header_params(value: str) -> KeyForgeHeader:
    """Parse "k=v; ..." parameters; raises MailParseError on junk."""
    fields: dict[str, str] = {}
    for part in value.split(";"):
        part = part.strip()
        if not part:
            continue
        if "=" not in part:
            raise MailParseError(f"bad signature header parameter {part!r}", 0)
        k, v = part.split("=", 1)
        fields[k.strip()] = v.strip()
    try:
        version = int(fields["v"])
        domain = fields["d"]
        tag_text = fields["t"]
        expires_at = int(fields["x"])
        body_hash = fields["bh"]
        signature = fields.get("b", "")
    except (KeyError, ValueError) as exc:
        raise MailParseError(f"signature header missing field: {exc}", 0) from None
    if version != VERSION:
        raise MailParseError(f"unsupported signature header version {version}", 0)
    if not domain or not tag_text:
        raise MailParseError("empty domain or tag in signature header", 0)
    return KeyForgeHeader(
        domain=domain,
        tag_text=tag_text,
        expires_at=expires_at,
        body_hash_b64=body_hash,
        signature_b64=signature,
    )


def extract_header(msg: MailMessage) -> KeyForgeHeader | None:
    value = msg.get(HEADER_NAME)
    if value is None:
        return None
    return parse_header_params(value)


def attach_header(msg: MailMessage, header: KeyForgeHeader) -> MailMessage:
    """Return a copy with the signature header as the last header (replacing
    any previous one, so re-signing is idempotent)."""
    out = MailMessage(headers=list(msg.headers), body=msg.body)
    out.remove(HEADER_NAME)
    out.append(HEADER_NAME, header.params())
    return out
