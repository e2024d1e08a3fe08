"""``kf-filter``: the mail-server integration point.

Reads one message on stdin.  ``sign`` emits the message with the signature
header attached; ``verify`` emits the message unchanged on success, or a
reason code on stderr with a nonzero exit so the mail server drops it.
Cryptographic operations go to the key server over its RPC socket; the
filter itself holds no keys.

A ``--now`` override pins the clock for both tag selection and verification,
which is how the test suite exercises boundary behavior.
"""

from __future__ import annotations

import argparse
import base64
import sys
import time

from . import mailproto, tagtree
from .errors import KeyForgeError, MailParseError, RpcError, UnsignableError
from .pipeline import (
    REASON_DIGEST_MISMATCH,
    REASON_MISSING_HEADER,
)
from .server.cli import load_config
from .server.rpc import RpcClient
from .server.service import space_from_config


def _read_message() -> mailproto.MailMessage:
    return mailproto.parse_message(sys.stdin.buffer.read())


def _sign(args, config) -> int:
    space = space_from_config(config["space"])
    domain = config["domains"][0] if config.get("domains") else config.get("domain")
    if not domain:
        print("kf-filter: no signing domain in config", file=sys.stderr)
        return 2
    delta_hat = int(config.get("delta_hat_seconds", 900))
    now = args.now if args.now is not None else int(time.time())

    try:
        msg = _read_message()
        digest = mailproto.content_digest(msg)
    except (MailParseError, UnsignableError) as exc:
        print(f"kf-filter: {exc}", file=sys.stderr)
        return 1

    tag = space.tag_of_time(now + delta_hat)
    header = mailproto.KeyForgeHeader(
        domain=domain,
        tag_text=tagtree.tag_text(tag),
        expires_at=space.live_until(tag),
        body_hash_b64=base64.b64encode(digest).decode("ascii"),
    )
    with RpcClient(args.keyserver) as client:
        result = client.call("kf.sign", {
            "domain": domain,
            "digest": base64.b64encode(header.signing_payload()).decode("ascii"),
            "tag": header.tag_text,
        })
    signed = mailproto.attach_header(
        msg, header.with_signature(base64.b64decode(result["signature"])))
    sys.stdout.buffer.write(mailproto.render_message(signed))
    return 0


def _verify(args, config) -> int:
    try:
        raw = sys.stdin.buffer.read()
        msg = mailproto.parse_message(raw)
        header = mailproto.extract_header(msg)
    except (MailParseError, KeyForgeError):
        print(f"fail: {REASON_MISSING_HEADER}", file=sys.stderr)
        return 1
    if header is None:
        print(f"fail: {REASON_MISSING_HEADER}", file=sys.stderr)
        return 1
    try:
        digest = mailproto.content_digest(msg)
    except UnsignableError:
        print(f"fail: {REASON_DIGEST_MISMATCH}", file=sys.stderr)
        return 1
    if base64.b64encode(digest).decode("ascii") != header.body_hash_b64:
        print(f"fail: {REASON_DIGEST_MISMATCH}", file=sys.stderr)
        return 1

    params = {
        "domain": header.domain,
        "digest": base64.b64encode(header.signing_payload()).decode("ascii"),
        "tag": header.tag_text,
        "signature": header.signature_b64,
    }
    if args.now is not None:
        params["now"] = args.now
    with RpcClient(args.keyserver) as client:
        result = client.call("kf.verify", params)
    if result["ok"]:
        sys.stdout.buffer.write(raw)
        return 0
    print(f"fail: {result['reason']}", file=sys.stderr)
    return 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="kf-filter",
                                     description="sign or verify one message on stdin")
    parser.add_argument("command", choices=["sign", "verify"])
    parser.add_argument("--config", required=True)
    parser.add_argument("--keyserver", required=True, help="key server RPC socket path")
    parser.add_argument("--now", type=int, default=None, help="clock override (unix seconds)")
    args = parser.parse_args(argv)

    try:
        config = load_config(args.config)
    except (OSError, ValueError) as exc:
        print(f"kf-filter: {exc}", file=sys.stderr)
        return 2

    try:
        if args.command == "sign":
            return _sign(args, config)
        return _verify(args, config)
    except RpcError as exc:
        print(f"kf-filter: rpc failure: {exc}", file=sys.stderr)
        return 2
    except KeyForgeError as exc:
        print(f"kf-filter: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
