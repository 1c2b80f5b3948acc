"""Who the core addresses are: contract vs. externally owned, and how often they are core.

Kinds come from a local label file first.  When a JSON-RPC endpoint is
configured, unknown addresses are resolved with ``eth_getCode`` at the latest
block and the answer is written back to the label store (``source="rpc"``)
so later runs need no network.
"""

from __future__ import annotations

import csv
import enum
import io
import logging
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import date
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
import requests

from .coreperiphery import CorePeripheryResult
from .errors import DataError
from .ingest import NULL_ADDRESS, canonical_address

log = logging.getLogger(__name__)

LABELS_HEADER = "# tokennet-labels v1"
LABEL_FIELDS = ("address", "label", "kind", "source")
RPC_ENV_VAR = "TOKENNET_RPC_URL"


class Kind(str, enum.Enum):
    CA = "CA"
    EOA = "EOA"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class LabelEntry:
    label: str
    kind: Kind
    source: str


@dataclass(frozen=True)
class AddressProfile:
    address: str
    kind: Kind
    label: str | None
    core_days: int
    outlier: bool


class LabelStore:
    """Address -> (label, kind, source), backed by a versioned CSV file."""

    def __init__(self, entries: Mapping[str, LabelEntry] | None = None, path: Path | None = None):
        self._entries = dict(entries or {})
        self.path = Path(path) if path is not None else None
        self._lock = threading.Lock()
        self.dirty = False

    def __len__(self):
        return len(self._entries)

    def __contains__(self, address):
        return address in self._entries

    def get(self, address: str) -> LabelEntry | None:
        return self._entries.get(address)

    def put(self, address: str, entry: LabelEntry) -> None:
        with self._lock:
            self._entries[canonical_address(address)] = entry
            self.dirty = True

    def items(self):
        return sorted(self._entries.items())

    @classmethod
    def parse(cls, text: str, path: Path | None = None) -> "LabelStore":
        lines = text.splitlines()
        if lines and lines[0].startswith("#"):
            if lines[0].strip() != LABELS_HEADER:
                raise DataError(f"unsupported label file version: {lines[0].strip()!r}")
            lines = lines[1:]
        reader = csv.DictReader(lines)
        if reader.fieldnames is None:
            return cls(path=path)
        if tuple(reader.fieldnames[:4]) != LABEL_FIELDS:
            raise DataError(f"label file header must be {','.join(LABEL_FIELDS)}")
        entries = {}
        for row in reader:
            try:
                addr = canonical_address(row["address"])
                kind = Kind(row["kind"])
            except ValueError as exc:
                raise DataError(f"label file line {reader.line_num + 1}: {exc}") from None
            entries[addr] = LabelEntry(row["label"] or "", kind, row["source"] or "")
        return cls(entries, path)

    @classmethod
    def load(cls, path: Path) -> "LabelStore":
        path = Path(path)
        return cls.parse(path.read_text(encoding="utf-8"), path)

    @classmethod
    def starter(cls) -> "LabelStore":
        text = resources.files("tokennet").joinpath("data/labels.csv").read_text(encoding="utf-8")
        return cls.parse(text)

    @classmethod
    def open(cls, path: Path | None) -> "LabelStore":
        """Load ``path``; a missing file starts from the shipped starter labels."""
        if path is None:
            return cls.starter()
        path = Path(path)
        if path.exists():
            return cls.load(path)
        store = cls.starter()
        store.path = path
        store.dirty = True
        return store

    def dumps(self) -> str:
        buf = io.StringIO()
        buf.write(LABELS_HEADER + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(LABEL_FIELDS)
        for addr, e in self.items():
            w.writerow([addr, e.label, e.kind.value, e.source])
        return buf.getvalue()

    def save(self, path: Path | None = None) -> None:
        path = Path(path) if path is not None else self.path
        if path is None:
            raise ValueError("label store has no path")
        with self._lock:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(self.dumps(), encoding="utf-8", newline="\n")
            self.dirty = False


class RpcError(Exception):
    pass


class CodeLookupClient:
    """Minimal JSON-RPC client for ``eth_getCode(address, "latest")``.

    Transport failures and JSON-RPC errors are retried ``retries`` times with
    exponential backoff; calls are spaced at least ``min_interval`` seconds.
    """

    def __init__(self, url: str, timeout: float = 10.0, retries: int = 3, backoff: float = 0.5,
                 min_interval: float = 0.0, session: requests.Session | None = None):
        self.url = url
        self.timeout = timeout
        self.retries = retries
        self.backoff = backoff
        self.min_interval = min_interval
        self.session = session or requests.Session()
        self._lock = threading.Lock()
        self._last_call = 0.0
        self._next_id = 0

    def _throttle(self) -> int:
        with self._lock:
            wait = self._last_call + self.min_interval - time.monotonic()
            if wait > 0:
                time.sleep(wait)
            self._last_call = time.monotonic()
            self._next_id += 1
            return self._next_id

    def call(self, method: str, params: list):
        last_exc = None
        for attempt in range(self.retries + 1):
            if attempt:
                time.sleep(self.backoff * 2 ** (attempt - 1))
            req_id = self._throttle()
            payload = {"jsonrpc": "2.0", "method": method, "params": params, "id": req_id}
            try:
                resp = self.session.post(self.url, json=payload, timeout=self.timeout)
                resp.raise_for_status()
                body = resp.json()
            except (requests.RequestException, ValueError) as exc:
                last_exc = exc
                continue
            if "error" in body:
                last_exc = RpcError(f"{method}: {body['error']}")
                continue
            if "result" not in body:
                last_exc = RpcError(f"{method}: response without result")
                continue
            return body["result"]
        raise RpcError(f"{method} failed after {self.retries + 1} attempt(s): {last_exc}")

    def get_code(self, address: str) -> str:
        return self.call("eth_getCode", [address, "latest"])


def kind_from_code(code: str) -> Kind:
    if not isinstance(code, str) or not code.startswith("0x"):
        raise RpcError(f"unexpected eth_getCode result {code!r}")
    return Kind.CA if len(code) > 2 else Kind.EOA


def classify_address(address: str, labels: LabelStore, rpc: CodeLookupClient | None = None) -> Kind:
    address = canonical_address(address)
    if address == NULL_ADDRESS:
        raise ValueError("the null address has no kind")
    entry = labels.get(address)
    if entry is not None and entry.kind is not Kind.UNKNOWN:
        return entry.kind
    if rpc is None:
        return Kind.UNKNOWN
    try:
        kind = kind_from_code(rpc.get_code(address))
    except RpcError as exc:
        log.warning("could not classify %s: %s", address, exc)
        return Kind.UNKNOWN
    label = entry.label if entry is not None else ""
    labels.put(address, LabelEntry(label, kind, "rpc"))
    return kind


def classify_addresses(addresses: Iterable[str], labels: LabelStore, rpc: CodeLookupClient | None = None,
                       workers: int = 4) -> dict[str, Kind]:
    addrs = sorted(set(addresses))
    if rpc is None or workers <= 1:
        return {a: classify_address(a, labels, rpc) for a in addrs}
    with ThreadPoolExecutor(max_workers=workers) as pool:
        kinds = list(pool.map(lambda a: classify_address(a, labels, rpc), addrs))
    return dict(zip(addrs, kinds))


def tally_core_days(results: Iterable[tuple[date, CorePeripheryResult]], require_significant: bool = True) -> dict[str, int]:
    """Days each address sat in the core.

    With ``require_significant`` only days whose structure passed the
    significance test count, matching the filtered core features.
    """
    seen_days = set()
    tallies: dict[str, int] = {}
    for day, res in results:
        if day in seen_days:
            raise ValueError(f"duplicate day {day}")
        seen_days.add(day)
        if require_significant and not res.significant:
            continue
        for a in res.core:
            tallies[a] = tallies.get(a, 0) + 1
    return tallies


def tukey_fence(values: Sequence[int]) -> float | None:
    """Upper fence ``Q3 + 1.5 IQR`` with linear-interpolation quartiles; None below 4 values."""
    if len(values) < 4:
        return None
    q1, q3 = np.percentile(np.asarray(values, dtype=float), [25, 75])
    return float(q3 + 1.5 * (q3 - q1))


def flag_outliers(tallies: Mapping[str, int], kinds: Mapping[str, Kind]) -> set[str]:
    groups: dict[Kind, list[str]] = {}
    for addr in tallies:
        groups.setdefault(kinds.get(addr, Kind.UNKNOWN), []).append(addr)
    flagged = set()
    for members in groups.values():
        fence = tukey_fence([tallies[a] for a in members])
        if fence is None:
            continue
        flagged.update(a for a in members if tallies[a] > fence)
    return flagged


def build_profiles(tallies: Mapping[str, int], kinds: Mapping[str, Kind], labels: LabelStore) -> list[AddressProfile]:
    """One profile per tallied address, most core days first."""
    outliers = flag_outliers(tallies, kinds) if tallies else set()
    out = []
    for addr in sorted(tallies, key=lambda a: (-tallies[a], a)):
        entry = labels.get(addr)
        out.append(AddressProfile(
            addr,
            kinds.get(addr, Kind.UNKNOWN),
            entry.label or None if entry else None,
            tallies[addr],
            addr in outliers,
        ))
    return out
