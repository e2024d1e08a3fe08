"""Read-only HTTP front end for the public directories.

Stands in for DNS/website publication:

``GET /params/{domain}``            root parameter record (JSON)
``GET /params/{domain}/{prefix}``   parameters for a tag prefix, e.g. /params/d/1/3
``GET /expiry/{domain}/{index}``    one expiry publication (binary)
``GET /expiry/{domain}``            JSON list of published indices
"""

from __future__ import annotations

import json
import os
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from ..errors import KeyForgeError, RpcError
from .service import KeyServerService


class _Handler(BaseHTTPRequestHandler):
    server_version = "kf-httpd/1"

    def log_message(self, fmt, *args):  # quiet by default
        pass

    def _send(self, code: int, body: bytes, ctype: str = "application/json") -> None:
        self.send_response(code)
        self.send_header("Content-Type", ctype)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _not_found(self, why: str = "not found") -> None:
        self._send(404, json.dumps({"error": why}).encode())

    def do_GET(self):
        service: KeyServerService = self.server.service
        parts = [p for p in self.path.split("?")[0].split("/") if p]
        try:
            if len(parts) >= 2 and parts[0] == "params":
                domain = parts[1]
                prefix = "/".join(parts[2:])
                record = service.serve_params(domain, prefix)
                self._send(200, record.to_json().encode())
                return
            if len(parts) == 2 and parts[0] == "expiry":
                directory = os.path.join(service.public_dir, "expiry", parts[1])
                names = (sorted(int(n.split(".")[0]) for n in os.listdir(directory)
                                if n.endswith(".kfe"))
                         if os.path.isdir(directory) else [])
                self._send(200, json.dumps({"domain": parts[1], "published": names}).encode())
                return
            if len(parts) == 3 and parts[0] == "expiry":
                try:
                    index = int(parts[2])
                except ValueError:
                    self._not_found("bad index")
                    return
                blob = service.expiry_file(parts[1], index)
                if blob is None:
                    self._not_found("no such publication")
                    return
                self._send(200, blob, ctype="application/octet-stream")
                return
            self._not_found()
        except (RpcError, KeyForgeError) as exc:
            self._not_found(str(exc))


class HttpServer(ThreadingHTTPServer):
    daemon_threads = True

    def __init__(self, addr: tuple[str, int], service: KeyServerService):
        self.service = service
        super().__init__(addr, _Handler)

    def serve_in_thread(self) -> threading.Thread:
        thread = threading.Thread(target=self.serve_forever, daemon=True)
        thread.start()
        return thread
