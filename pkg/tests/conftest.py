import contextlib
import json
import threading
from datetime import date
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from tokennet.ingest import DailyGraph

DAY = date(2021, 4, 5)


def addr(i: int) -> str:
    """Deterministic non-null address; ordering of addresses follows ``i``."""
    return f"0x{i + 1:040x}"


def graph(edges, n=None, day=DAY, weights=None) -> DailyGraph:
    if n is None:
        n = 1 + max(max(e) for e in edges)
    return DailyGraph.from_edges(day, [addr(i) for i in range(n)], edges, weights=weights)


def clique(nodes):
    nodes = list(nodes)
    return [(a, b) for i, a in enumerate(nodes) for b in nodes[i + 1:]]


@pytest.fixture
def two_triangles():
    return graph([(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)])


@pytest.fixture
def star5():
    # hub 0 with four leaves: K(1,4)
    return graph([(0, 1), (0, 2), (0, 3), (0, 4)])


@pytest.fixture
def triangle():
    return graph([(0, 1), (1, 2), (0, 2)])


@pytest.fixture
def path3():
    return graph([(0, 1), (1, 2)])


class RpcStub:
    """Tiny JSON-RPC server answering eth_getCode from a dict; records every request."""

    def __init__(self, code, fail_first=0):
        self.code = code
        self.requests = []
        self.fail_remaining = fail_first
        stub = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):
                body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
                stub.requests.append(body)
                if stub.fail_remaining > 0:
                    stub.fail_remaining -= 1
                    self.send_response(503)
                    self.end_headers()
                    return
                if body["method"] != "eth_getCode":
                    reply = {"jsonrpc": "2.0", "id": body["id"], "error": {"code": -32601, "message": "no"}}
                else:
                    reply = {"jsonrpc": "2.0", "id": body["id"], "result": stub.code.get(body["params"][0], "0x")}
                data = json.dumps(reply).encode()
                self.send_response(200)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

            def log_message(self, *args):
                pass

        self.server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self.url = f"http://127.0.0.1:{self.server.server_address[1]}"
        threading.Thread(target=self.server.serve_forever, daemon=True).start()

    def close(self):
        self.server.shutdown()
        self.server.server_close()


TOKEN = "0x" + "7" * 40
EXPORT_HEADER = "token_address,from_address,to_address,value,block_timestamp\n"


def export_rows(edges, day=DAY, value=1, token=TOKEN):
    """CSV rows for one transfer per edge, spread over the day's hours."""
    return [
        f"{token},{addr(a)},{addr(b)},{value},{day.isoformat()} {k % 24:02d}:00:00 UTC\n"
        for k, (a, b) in enumerate(edges)
    ]


def write_export(path, rows):
    path.write_text(EXPORT_HEADER + "".join(rows), encoding="utf-8")
    return path


ACCEPTANCE_LINES = pytest.StashKey[list]()


@pytest.fixture
def verdict(request):
    """``with verdict(k, title):`` records one PASS/FAIL line for acceptance criterion ``k``."""
    lines = request.config.stash.setdefault(ACCEPTANCE_LINES, [])

    @contextlib.contextmanager
    def record(k, title):
        notes = []
        try:
            yield notes
        except BaseException as exc:
            line = f"criterion {k} FAIL  {title}: {type(exc).__name__}: {str(exc).splitlines()[0] if str(exc) else ''}"
            lines.append(line)
            print(line)
            raise
        line = f"criterion {k} PASS  {title}" + (f" ({'; '.join(notes)})" if notes else "")
        lines.append(line)
        print(line)

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
