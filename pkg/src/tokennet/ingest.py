"""Turn raw token-transfer exports into one undirected graph per UTC day.

The expected export schema is the one produced by the public Ethereum
``token_transfers`` table::

    token_address,from_address,to_address,value,block_timestamp

Extra columns are ignored.  ``value`` is an unsigned integer in token base
units and is kept as a Python ``int`` throughout, since totals routinely
exceed both 64-bit and exact-double range.

Pipeline::

    records = parse_transfers(stream, "csv")
    kept, stats = filter_records(records)
    graphs = [build_daily_graph(rows) for rows in bucket_by_day(kept).values()]
"""

from __future__ import annotations

import csv
import io
import json
import logging
import re
from collections import defaultdict
from dataclasses import dataclass
from datetime import date, datetime, timezone
from functools import cached_property
from pathlib import Path
from typing import IO, Iterable, Iterator, Sequence

import numpy as np

from .errors import DataError, GraphError, ParseError

log = logging.getLogger(__name__)

NULL_ADDRESS = "0x" + "0" * 40
REQUIRED_FIELDS = ("token_address", "from_address", "to_address", "value", "block_timestamp")

GRAPH_CACHE_FORMAT = "tokennet.daily-graph"
GRAPH_CACHE_VERSION = 1

_ADDRESS_RE = re.compile(r"0x[0-9a-f]{40}")
_MAX_UINT256 = (1 << 256) - 1


@dataclass(frozen=True, slots=True)
class TransferRecord:
    token_address: str
    from_address: str
    to_address: str
    value: int
    timestamp: datetime

    @property
    def day(self) -> date:
        return self.timestamp.date()


@dataclass
class IngestStats:
    rows_read: int = 0
    rows_skipped: int = 0
    rows_filtered_null: int = 0
    rows_filtered_selfloop: int = 0
    days: int = 0
    first_day: date | None = None
    last_day: date | None = None
    unique_addresses: int = 0
    total_value: int = 0
    # value moved by dropped self-loop rows; add to total_value for
    # totals that count every non-mint/burn transfer
    selfloop_value: int = 0

    @property
    def duration_days(self) -> int:
        """Calendar span in days, counting both endpoints."""
        if self.first_day is None or self.last_day is None:
            return 0
        return (self.last_day - self.first_day).days + 1

    def to_dict(self) -> dict:
        return {
            "rows_read": self.rows_read,
            "rows_skipped": self.rows_skipped,
            "rows_filtered_null": self.rows_filtered_null,
            "rows_filtered_selfloop": self.rows_filtered_selfloop,
            "days": self.days,
            "first_day": self.first_day.isoformat() if self.first_day else None,
            "last_day": self.last_day.isoformat() if self.last_day else None,
            "duration_days": self.duration_days,
            "unique_addresses": self.unique_addresses,
            "total_value": str(self.total_value),
            "selfloop_value": str(self.selfloop_value),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "IngestStats":
        return cls(
            rows_read=d["rows_read"],
            rows_skipped=d["rows_skipped"],
            rows_filtered_null=d["rows_filtered_null"],
            rows_filtered_selfloop=d["rows_filtered_selfloop"],
            days=d["days"],
            first_day=date.fromisoformat(d["first_day"]) if d["first_day"] else None,
            last_day=date.fromisoformat(d["last_day"]) if d["last_day"] else None,
            unique_addresses=d["unique_addresses"],
            total_value=int(d["total_value"]),
            selfloop_value=int(d["selfloop_value"]),
        )


@dataclass(frozen=True, eq=False)
class DailyGraph:
    """Undirected simple graph of one day's transfers.

    Node ``i`` is ``addresses[i]``.  Edge ``e`` joins ``u[e] < v[e]`` and
    carries the summed transfer value ``weights[e]`` (exact int) and the
    number of transfers ``counts[e]``.  Topological features ignore weights.
    """

    day: date
    addresses: tuple[str, ...]
    u: np.ndarray
    v: np.ndarray
    weights: tuple[int, ...]
    counts: np.ndarray

    def __post_init__(self):
        for arr in (self.u, self.v, self.counts):
            arr.flags.writeable = False

    @property
    def n_nodes(self) -> int:
        return len(self.addresses)

    @property
    def n_edges(self) -> int:
        return len(self.u)

    @cached_property
    def degrees(self) -> np.ndarray:
        deg = np.bincount(self.u, minlength=self.n_nodes) + np.bincount(self.v, minlength=self.n_nodes)
        deg.flags.writeable = False
        return deg

    @cached_property
    def index_of(self) -> dict[str, int]:
        return {a: i for i, a in enumerate(self.addresses)}

    @cached_property
    def address_rank(self) -> np.ndarray:
        """Position of each node when nodes are sorted by canonical address."""
        order = sorted(range(self.n_nodes), key=self.addresses.__getitem__)
        rank = np.empty(self.n_nodes, dtype=np.int64)
        rank[order] = np.arange(self.n_nodes)
        rank.flags.writeable = False
        return rank

    @property
    def total_weight(self) -> int:
        return sum(self.weights)

    def edge_set(self) -> set[tuple[str, str, int, int]]:
        """Edges as sorted address pairs; independent of node numbering."""
        out = set()
        for a, b, w, c in zip(self.u.tolist(), self.v.tolist(), self.weights, self.counts.tolist()):
            x, y = self.addresses[a], self.addresses[b]
            if x > y:
                x, y = y, x
            out.add((x, y, w, c))
        return out

    def mask(self, addresses: Iterable[str]) -> np.ndarray:
        m = np.zeros(self.n_nodes, dtype=bool)
        idx = self.index_of
        for a in addresses:
            m[idx[a]] = True
        return m

    @classmethod
    def from_edges(cls, day: date, addresses: Sequence[str], edges, weights=None, counts=None) -> "DailyGraph":
        """Build from index pairs.  Pairs are normalized to ``u < v``; no checks for duplicates."""
        pairs = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        u = pairs.min(axis=1) if len(pairs) else np.empty(0, dtype=np.int64)
        v = pairs.max(axis=1) if len(pairs) else np.empty(0, dtype=np.int64)
        if weights is None:
            weights = (1,) * len(u)
        if counts is None:
            counts = np.ones(len(u), dtype=np.int64)
        return cls(day, tuple(addresses), u, v, tuple(weights), np.asarray(counts, dtype=np.int64))


def canonical_address(text: str) -> str:
    if not isinstance(text, str):
        raise ValueError(f"invalid address {text!r}")
    a = text.strip().lower()
    if not _ADDRESS_RE.fullmatch(a):
        raise ValueError(f"invalid address {text!r}")
    return a


def parse_value(text) -> int:
    if isinstance(text, bool):
        raise ValueError("invalid value")
    if isinstance(text, int):
        v = text
    else:
        s = str(text).strip()
        if not s.isdigit() or not s.isascii():
            raise ValueError(f"invalid value {text!r}")
        v = int(s)
    if v < 0 or v > _MAX_UINT256:
        raise ValueError(f"invalid value {text!r}")
    return v


def parse_timestamp(text: str) -> datetime:
    """Accept ``YYYY-MM-DD HH:MM:SS UTC`` or ISO-8601; returns an aware UTC datetime at second precision."""
    if not isinstance(text, str):
        raise ValueError(f"invalid timestamp {text!r}")
    s = text.strip()
    if s.endswith(" UTC"):
        s = s[:-4]
    elif s.endswith("Z") or s.endswith("z"):
        s = s[:-1] + "+00:00"
    try:
        ts = datetime.fromisoformat(s)
    except ValueError:
        raise ValueError(f"invalid timestamp {text!r}") from None
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    else:
        ts = ts.astimezone(timezone.utc)
    return ts.replace(microsecond=0)


def _record(row: dict) -> TransferRecord:
    missing = [f for f in REQUIRED_FIELDS if row.get(f) is None]
    if missing:
        raise ValueError(f"missing field(s) {', '.join(missing)}")
    return TransferRecord(
        canonical_address(row["token_address"]),
        canonical_address(row["from_address"]),
        canonical_address(row["to_address"]),
        parse_value(row["value"]),
        parse_timestamp(row["block_timestamp"]),
    )


def _text(stream: IO) -> IO[str]:
    if isinstance(stream, io.TextIOBase):
        return stream
    return io.TextIOWrapper(stream, encoding="utf-8-sig", newline="")


def _csv_rows(stream) -> Iterator[tuple[int, dict]]:
    reader = csv.DictReader(_text(stream))
    if reader.fieldnames is None:
        return
    missing = [f for f in REQUIRED_FIELDS if f not in reader.fieldnames]
    if missing:
        raise ParseError(1, f"header lacks column(s) {', '.join(missing)}")
    for row in reader:
        yield reader.line_num, row


def _jsonl_rows(stream) -> Iterator[tuple[int, dict]]:
    for lineno, line in enumerate(_text(stream), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            yield lineno, exc
            continue
        yield lineno, obj if isinstance(obj, dict) else ValueError("not a JSON object")


def parse_transfers(stream, fmt: str = "csv", on_error: str = "abort", errors: list | None = None) -> Iterator[TransferRecord]:
    """Stream ``TransferRecord`` objects out of a CSV or JSONL export.

    ``on_error="abort"`` raises :class:`ParseError` at the first bad row;
    ``"skip"`` drops it and, if given, appends the error to ``errors``.
    """
    if on_error not in ("abort", "skip"):
        raise ValueError(f"on_error must be 'abort' or 'skip', not {on_error!r}")
    if fmt == "csv":
        rows = _csv_rows(stream)
    elif fmt == "jsonl":
        rows = _jsonl_rows(stream)
    else:
        raise ValueError(f"unknown format {fmt!r}")
    for lineno, row in rows:
        try:
            if isinstance(row, Exception):
                raise ValueError(f"malformed JSON: {row}")
            rec = _record(row)
        except ValueError as exc:
            err = ParseError(lineno, str(exc))
            if on_error == "abort":
                raise err from None
            if errors is not None:
                errors.append(err)
            continue
        yield rec


def filter_records(records: Iterable[TransferRecord]) -> tuple[list[TransferRecord], IngestStats]:
    """Drop mint/burn rows (null counterparty) and self-transfers.

    The returned stats only carry the filter counters and ``rows_read``.
    """
    stats = IngestStats()
    kept = []
    for r in records:
        stats.rows_read += 1
        if r.from_address == NULL_ADDRESS or r.to_address == NULL_ADDRESS:
            stats.rows_filtered_null += 1
        elif r.from_address == r.to_address:
            stats.rows_filtered_selfloop += 1
            stats.selfloop_value += r.value
        else:
            kept.append(r)
    return kept, stats


def bucket_by_day(records: Iterable[TransferRecord]) -> dict[date, list[TransferRecord]]:
    buckets = defaultdict(list)
    for r in records:
        buckets[r.timestamp.date()].append(r)
    return {d: buckets[d] for d in sorted(buckets)}


def build_daily_graph(day_records: Sequence[TransferRecord]) -> DailyGraph:
    if not day_records:
        raise GraphError("empty day")
    day = day_records[0].timestamp.date()
    index: dict[str, int] = {}
    acc: dict[tuple[int, int], list[int]] = {}
    for r in day_records:
        if r.timestamp.date() != day:
            raise GraphError(f"records span more than one day ({day} and {r.timestamp.date()})")
        a = index.setdefault(r.from_address, len(index))
        b = index.setdefault(r.to_address, len(index))
        if a == b:
            raise GraphError(f"self-transfer by {r.from_address}; filter records first")
        key = (a, b) if a < b else (b, a)
        slot = acc.get(key)
        if slot is None:
            acc[key] = [r.value, 1]
        else:
            slot[0] += r.value
            slot[1] += 1
    m = len(acc)
    u = np.fromiter((k[0] for k in acc), dtype=np.int64, count=m)
    v = np.fromiter((k[1] for k in acc), dtype=np.int64, count=m)
    counts = np.fromiter((s[1] for s in acc.values()), dtype=np.int64, count=m)
    weights = tuple(s[0] for s in acc.values())
    return DailyGraph(day, tuple(index), u, v, weights, counts)


def select_token(records: Iterable[TransferRecord], token_address: str | None) -> Iterator[TransferRecord]:
    """Restrict to one token.  Without an explicit token the export must hold exactly one."""
    if token_address is not None:
        token = canonical_address(token_address)
        return (r for r in records if r.token_address == token)

    def single():
        seen = None
        for r in records:
            if seen is None:
                seen = r.token_address
            elif r.token_address != seen:
                raise DataError(
                    f"export mixes tokens {seen} and {r.token_address}; pass a token address to select one"
                )
            yield r

    return single()


def ingest_records(records: Iterable[TransferRecord], token_address: str | None = None) -> tuple[list[DailyGraph], IngestStats]:
    """Filter, bucket and build every daily graph of one token's records."""
    kept, stats = filter_records(select_token(records, token_address))
    buckets = bucket_by_day(kept)
    del kept
    graphs = [build_daily_graph(rows) for rows in buckets.values()]
    del buckets

    stats.days = len(graphs)
    if graphs:
        stats.first_day = graphs[0].day
        stats.last_day = graphs[-1].day
    seen = set()
    for g in graphs:
        seen.update(g.addresses)
        stats.total_value += g.total_weight
    stats.unique_addresses = len(seen)
    return graphs, stats


def ingest(stream, fmt: str = "csv", token_address: str | None = None, on_error: str = "abort") -> tuple[list[DailyGraph], IngestStats]:
    errors: list[ParseError] = []
    graphs, stats = ingest_records(parse_transfers(stream, fmt, on_error, errors), token_address)
    stats.rows_skipped = len(errors)
    for err in errors[:20]:
        log.warning("skipped %s", err)
    return graphs, stats


# -- graph cache ------------------------------------------------------------


def graph_to_json(g: DailyGraph) -> str:
    doc = {
        "format": GRAPH_CACHE_FORMAT,
        "version": GRAPH_CACHE_VERSION,
        "day": g.day.isoformat(),
        "nodes": list(g.addresses),
        "edges": [
            [a, b, str(w), c]
            for a, b, w, c in zip(g.u.tolist(), g.v.tolist(), g.weights, g.counts.tolist())
        ],
    }
    return json.dumps(doc, separators=(",", ":")) + "\n"


def graph_from_json(text: str) -> DailyGraph:
    doc = json.loads(text)
    if doc.get("format") != GRAPH_CACHE_FORMAT:
        raise DataError("not a daily graph cache file")
    if doc.get("version") != GRAPH_CACHE_VERSION:
        raise DataError(f"unsupported graph cache version {doc.get('version')}")
    edges = doc["edges"]
    return DailyGraph(
        date.fromisoformat(doc["day"]),
        tuple(doc["nodes"]),
        np.array([e[0] for e in edges], dtype=np.int64),
        np.array([e[1] for e in edges], dtype=np.int64),
        tuple(int(e[2]) for e in edges),
        np.array([e[3] for e in edges], dtype=np.int64),
    )


def write_graph_cache(directory: Path, graphs: Sequence[DailyGraph], stats: IngestStats) -> None:
    """One ``YYYY-MM-DD.json`` per day plus ``ingest-stats.json``; stale day files are removed."""
    directory = Path(directory)
    gdir = directory / "graphs"
    gdir.mkdir(parents=True, exist_ok=True)
    wanted = {f"{g.day.isoformat()}.json" for g in graphs}
    for old in gdir.glob("*.json"):
        if old.name not in wanted:
            old.unlink()
    for g in graphs:
        (gdir / f"{g.day.isoformat()}.json").write_text(graph_to_json(g), encoding="utf-8", newline="\n")
    (directory / "ingest-stats.json").write_text(
        json.dumps(stats.to_dict(), indent=2) + "\n", encoding="utf-8", newline="\n"
    )


def read_graph_cache(directory: Path) -> tuple[list[DailyGraph], IngestStats]:
    directory = Path(directory)
    stats_path = directory / "ingest-stats.json"
    if not stats_path.exists():
        raise FileNotFoundError(stats_path)
    stats = IngestStats.from_dict(json.loads(stats_path.read_text(encoding="utf-8")))
    graphs = [graph_from_json(p.read_text(encoding="utf-8")) for p in sorted((directory / "graphs").glob("*.json"))]
    return graphs, stats
