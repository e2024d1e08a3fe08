"""JSON-RPC 2.0 over a unix stream socket, one JSON object per line.

Byte fields travel base64-encoded.  Methods:

``kf.sign``          {domain, digest, tag?}            -> {domain, tag, expires_at, signature}
``kf.verify``        {domain, digest, tag, signature, now?} -> {ok, reason}
``kf.forgeRequest``  {domain, request}                 -> {emails: [...], tags: [...]}

Unknown methods get error -32601; malformed frames get -32700/-32600 with a
null id; application failures use the -32000 range.  Request ids are echoed
verbatim, so concurrent clients can multiplex safely.
"""

from __future__ import annotations

import base64
import json
import socket
import socketserver
import threading

from .. import mailproto, pipeline, tagtree
from ..errors import EncodingError, ForgeRequestError, KeyForgeError, RpcError
from ..hibs import HibsSignature
from .service import ERR_BAD_PARAMS, ERR_FORGE_REQUEST, KeyServerService

MAX_FRAME = 8 * 1024 * 1024


def _b64(raw: bytes) -> str:
    return base64.b64encode(raw).decode("ascii")


def _unb64(field: str, params: dict) -> bytes:
    try:
        return base64.b64decode(params[field], validate=True)
    except KeyError:
        raise RpcError(ERR_BAD_PARAMS, f"missing parameter {field!r}") from None
    except (ValueError, TypeError):
        raise RpcError(ERR_BAD_PARAMS, f"parameter {field!r} is not base64") from None


def _require_str(field: str, params: dict) -> str:
    value = params.get(field)
    if not isinstance(value, str):
        raise RpcError(ERR_BAD_PARAMS, f"missing string parameter {field!r}")
    return value


class Dispatcher:
    """Transport-independent request handling (also driven directly by tests)."""

    def __init__(self, service: KeyServerService):
        self.service = service

    def handle_line(self, line: bytes) -> bytes:
        try:
            request = json.loads(line.decode("utf-8"))
        except (ValueError, UnicodeDecodeError):
            return self._error(None, -32700, "parse error")
        if not isinstance(request, dict):
            return self._error(None, -32600, "request must be an object")
        req_id = request.get("id")
        if request.get("jsonrpc") != "2.0" or not isinstance(request.get("method"), str):
            return self._error(req_id, -32600, "invalid request")
        params = request.get("params")
        if params is None:
            params = {}
        if not isinstance(params, dict):
            return self._error(req_id, -32602, "params must be an object")
        try:
            result = self._dispatch(request["method"], params)
        except RpcError as exc:
            return self._error(req_id, exc.code, str(exc))
        except ForgeRequestError as exc:
            return self._error(req_id, ERR_FORGE_REQUEST, str(exc))
        except (EncodingError, KeyForgeError) as exc:
            return self._error(req_id, ERR_BAD_PARAMS, str(exc))
        return json.dumps({"jsonrpc": "2.0", "result": result, "id": req_id},
                          sort_keys=True).encode("utf-8") + b"\n"

    @staticmethod
    def _error(req_id, code: int, message: str) -> bytes:
        return json.dumps(
            {"jsonrpc": "2.0", "error": {"code": code, "message": message}, "id": req_id},
            sort_keys=True,
        ).encode("utf-8") + b"\n"

    def _dispatch(self, method: str, params: dict):
        if method == "kf.sign":
            return self._sign(params)
        if method == "kf.verify":
            return self._verify(params)
        if method == "kf.forgeRequest":
            return self._forge(params)
        raise RpcError(-32601, f"method {method!r} not found")

    def _sign(self, params: dict):
        domain = _require_str("domain", params)
        digest = _unb64("digest", params)
        tag_text = params.get("tag")
        if tag_text is not None and not isinstance(tag_text, str):
            raise RpcError(ERR_BAD_PARAMS, "tag must be a string")
        ksig = self.service.sign(domain, digest, tag_text)
        space = self.service.domains[domain].cfg.space
        return {
            "domain": ksig.domain,
            "tag": tagtree.tag_text(ksig.tag),
            "expires_at": space.live_until(ksig.tag),
            "signature": _b64(ksig.signature.encode()),
        }

    def _verify(self, params: dict):
        domain = _require_str("domain", params)
        digest = _unb64("digest", params)
        tag_text = _require_str("tag", params)
        try:
            signature = HibsSignature.decode(_unb64("signature", params))
        except EncodingError:
            return {"ok": False, "reason": pipeline.REASON_BAD_SIGNATURE}
        now = params.get("now")
        if now is not None and not isinstance(now, int):
            raise RpcError(ERR_BAD_PARAMS, "now must be an integer")
        ok, reason = self.service.verify(domain, digest, tag_text, signature, now=now)
        return {"ok": ok, "reason": reason}

    def _forge(self, params: dict):
        domain = _require_str("domain", params)
        request = pipeline.ForgeRequest.decode(_unb64("request", params))
        response = self.service.forge_request(domain, request)
        return {
            "emails": [_b64(mailproto.render_message(m)) for m in response.emails],
            "tags": [tagtree.tag_text(t) for t in response.tags],
        }


class _Handler(socketserver.StreamRequestHandler):
    def handle(self):
        while True:
            line = self.rfile.readline(MAX_FRAME)
            if not line:
                return
            if line.strip() == b"":
                continue
            self.wfile.write(self.server.dispatcher.handle_line(line))
            self.wfile.flush()


class RpcServer(socketserver.ThreadingMixIn, socketserver.UnixStreamServer):
    daemon_threads = True
    allow_reuse_address = True

    def __init__(self, socket_path: str, service: KeyServerService):
        self.dispatcher = Dispatcher(service)
        super().__init__(socket_path, _Handler)

    def serve_in_thread(self) -> threading.Thread:
        thread = threading.Thread(target=self.serve_forever, daemon=True)
        thread.start()
        return thread


class RpcClient:
    """Line-oriented client; one in-flight call per instance."""

    def __init__(self, socket_path: str, timeout: float = 30.0):
        self._sock = socket.socket(socket.AF_UNIX, socket.SOCK_STREAM)
        self._sock.settimeout(timeout)
        self._sock.connect(socket_path)
        self._file = self._sock.makefile("rb")
        self._next_id = 0
        self._lock = threading.Lock()

    def close(self) -> None:
        try:
            self._file.close()
        finally:
            self._sock.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def call(self, method: str, params: dict):
        with self._lock:
            self._next_id += 1
            req_id = self._next_id
            frame = json.dumps(
                {"jsonrpc": "2.0", "method": method, "params": params, "id": req_id}
            ).encode("utf-8") + b"\n"
            self._sock.sendall(frame)
            line = self._file.readline(MAX_FRAME)
        if not line:
            raise RpcError(-32000, "connection closed by server")
        response = json.loads(line.decode("utf-8"))
        if response.get("id") != req_id:
            raise RpcError(-32000, "response id mismatch")
        if "error" in response:
            err = response["error"]
            raise RpcError(err.get("code", -32000), err.get("message", "server error"))
        return response["result"]
