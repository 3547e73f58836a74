import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest


class StubEmbeddingServer:
    """Local embedding service with scriptable behaviour.

    mode "echo": each text maps to [len(text), 1.0, word count].
    mode "fail": every request answers ``status``.
    mode "mixed": rows alternate between 3 and 4 dimensions.
    mode "short": one embedding fewer than texts sent.
    """

    def __init__(self):
        self.mode = "echo"
        self.status = 500
        self.requests = 0
        self.batches: list[list[str]] = []
        self._lock = threading.Lock()
        stub = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, *args):
                pass

            def do_POST(self):
                body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
                texts = body["texts"]
                with stub._lock:
                    stub.requests += 1
                    stub.batches.append(texts)
                if stub.mode == "fail":
                    self.send_response(stub.status)
                    self.end_headers()
                    return
                rows = [[float(len(t)), 1.0, float(len(t.split()))] for t in texts]
                if stub.mode == "mixed":
                    rows = [r + [0.0] * (i % 2) for i, r in enumerate(rows)]
                elif stub.mode == "short":
                    rows = rows[:-1]
                data = json.dumps({"embeddings": rows}).encode()
                self.send_response(200)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

        self.httpd = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self.url = f"http://127.0.0.1:{self.httpd.server_address[1]}/embed"
        self.thread = threading.Thread(target=self.httpd.serve_forever, daemon=True)
        self.thread.start()

    def close(self):
        self.httpd.shutdown()
        self.httpd.server_close()


@pytest.fixture
def stub_server():
    s = StubEmbeddingServer()
    yield s
    s.close()
