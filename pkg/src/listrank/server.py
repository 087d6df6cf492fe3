"""Minimal HTTP unit server speaking the remote wire format.

Wraps any in-process backend. Used by the test-suite and handy for smoke
testing a client against something that behaves like a real model server.
"""

from __future__ import annotations

import json
import logging
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Callable

from listrank.unit import UnitBackend, UnitRequest, request_from_payload

logger = logging.getLogger(__name__)

# Hook to corrupt responses on purpose: (request, well-formed order text) -> body order text.
Mangler = Callable[[UnitRequest, str], str]


def _handler(backend: UnitBackend, mangle: Mangler | None):
    class Handler(BaseHTTPRequestHandler):
        def log_message(self, fmt, *args):  # keep test output quiet
            logger.debug(fmt, *args)

        def do_POST(self):
            try:
                length = int(self.headers.get("Content-Length", 0))
                payload = json.loads(self.rfile.read(length))
                request = request_from_payload(payload)
            except Exception as exc:
                self._send(400, {"error": str(exc)})
                return
            result = backend.rank(request)
            order = " ".join(map(str, result.order))
            if mangle is not None:
                order = mangle(request, order)
            self._send(200, {"order": order})

        def _send(self, status: int, body: dict) -> None:
            data = json.dumps(body).encode()
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(data)))
            self.end_headers()
            self.wfile.write(data)

    return Handler


class UnitServer:
    """Threaded server bound to ``host:port`` (port 0 picks a free one)."""

    def __init__(self, backend: UnitBackend, host: str = "127.0.0.1", port: int = 0, mangle: Mangler | None = None):
        self.httpd = ThreadingHTTPServer((host, port), _handler(backend, mangle))
        self.httpd.daemon_threads = True
        self._thread: threading.Thread | None = None

    @property
    def url(self) -> str:
        host, port = self.httpd.server_address[:2]
        return f"http://{host}:{port}/rank"

    def start(self) -> UnitServer:
        self._thread = threading.Thread(target=self.httpd.serve_forever, daemon=True)
        self._thread.start()
        return self

    def serve_forever(self) -> None:
        self.httpd.serve_forever()

    def stop(self) -> None:
        self.httpd.shutdown()
        self.httpd.server_close()
        if self._thread is not None:
            self._thread.join()

    def __enter__(self) -> UnitServer:
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()
