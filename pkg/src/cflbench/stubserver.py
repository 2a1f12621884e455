"""A deterministic local chat-completions endpoint for tests and demos.

``StubEndpoint`` serves the same wire shape the harness speaks, with the
reply computed by a plain function of the incoming prompt.  Helpers provide
the behaviours the test suite leans on: a fixed reply, and the parity rule
("Yes" exactly when the query string has an even number of tokens).
"""

from __future__ import annotations

import json
import re
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

_STRING_RE = re.compile(r"String: `([^`]*)`\.")


def query_tokens(prompt: str) -> list[str]:
    """Pull the query string's tokens back out of a rendered prompt."""
    m = _STRING_RE.search(prompt)
    if m is None:
        raise ValueError("prompt carries no query string")
    return m.group(1).split()


def parity_reply(prompt: str) -> str:
    """"Yes" iff the query string has an even number of tokens."""
    return "Yes" if len(query_tokens(prompt)) % 2 == 0 else "No"


def fixed_reply(text: str):
    return lambda prompt: text


class StubEndpoint:
    """Context manager running a one-behaviour chat-completions server on an
    ephemeral port.  ``fail_first`` makes the first N requests return 500,
    for retry and resume tests; ``request_count`` counts every POST."""

    def __init__(self, behaviour, *, fail_first: int = 0):
        self.behaviour = behaviour
        self.fail_first = fail_first
        self.request_count = 0
        self._lock = threading.Lock()
        self._server: ThreadingHTTPServer | None = None
        self._thread: threading.Thread | None = None

    @property
    def base_url(self) -> str:
        assert self._server is not None, "endpoint is not running"
        host, port = self._server.server_address[:2]
        return f"http://127.0.0.1:{port}/v1"

    def __enter__(self) -> "StubEndpoint":
        stub = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):
                with stub._lock:
                    stub.request_count += 1
                    fail = stub.request_count <= stub.fail_first
                if fail:
                    self.send_response(500)
                    self.end_headers()
                    self.wfile.write(b"induced failure")
                    return
                length = int(self.headers.get("Content-Length", 0))
                body = json.loads(self.rfile.read(length))
                prompt = body["messages"][-1]["content"]
                reply = stub.behaviour(prompt)
                doc = {
                    "choices": [{"message": {"role": "assistant", "content": reply}}],
                    "usage": {
                        "completion_tokens": len(reply.split()),
                        "completion_tokens_details": {"reasoning_tokens": 0},
                    },
                }
                payload = json.dumps(doc).encode("utf-8")
                self.send_response(200)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(payload)))
                self.end_headers()
                self.wfile.write(payload)

            def log_message(self, *args):  # quiet
                pass

        self._server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()
        return self

    def __exit__(self, *exc):
        assert self._server is not None
        self._server.shutdown()
        self._server.server_close()
        assert self._thread is not None
        self._thread.join(timeout=5)
        return False
