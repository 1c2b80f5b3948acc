"""Command-line front end: ingest -> analyze -> report, plus address classification.

Exit codes: 0 success, 1 usage, 2 data error, 3 IO error.
"""

from __future__ import annotations

import argparse
import gzip
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

from .addressintel import (
    RPC_ENV_VAR,
    CodeLookupClient,
    Kind,
    LabelStore,
    build_profiles,
    classify_addresses,
    tally_core_days,
)
from .coreperiphery import NULL_MODELS, NullModelConfig
from .errors import DataError, ParseError
from .ingest import (
    IngestStats,
    canonical_address,
    ingest_records,
    parse_transfers,
    read_graph_cache,
    write_graph_cache,
)
from .pipeline import (
    POLICIES,
    AnalysisSettings,
    analyze_days,
    read_analysis_cache,
    run_metadata,
    write_analysis_cache,
)
from .report import assemble_timeseries, correlation_matrix, write_bundle, write_text

log = logging.getLogger("tokennet")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_IO = 0, 1, 2, 3

SCHEMA_HELP = """\
input schema (CSV with header, or JSONL with one object per line):
  token_address    20-byte hex address of the token contract
  from_address     sender address
  to_address       recipient address
  value            unsigned integer amount in token base units
  block_timestamp  "YYYY-MM-DD HH:MM:SS UTC" or ISO-8601
extra columns are ignored; .gz inputs are decompressed.
"""


@dataclass
class RunConfig:
    token: str
    out: Path
    inputs: list[Path] = field(default_factory=list)
    fmt: str | None = None
    token_address: str | None = None
    on_error: str = "abort"
    settings: AnalysisSettings = field(default_factory=AnalysisSettings)
    rpc_url: str | None = None
    labels: Path | None = None
    correlation: str = "pearson"
    extended_correlation: bool = False
    activity_charts: bool = False
    jobs: int = 1

    @property
    def token_dir(self) -> Path:
        return self.out / self.token

    @property
    def cache_dir(self) -> Path:
        return self.token_dir / "cache"

    def ingest_config(self) -> dict:
        return {
            "token_address": canonical_address(self.token_address) if self.token_address else None,
            "on_error": self.on_error,
        }

    def report_config(self) -> dict:
        return {"correlation": self.correlation, "extended_correlation": self.extended_correlation}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _open_input(path: Path):
    if path.suffix == ".gz":
        return gzip.open(path, "rb")
    return open(path, "rb")


def _guess_format(path: Path) -> str:
    name = path.name[:-3] if path.name.endswith(".gz") else path.name
    return "jsonl" if name.endswith((".jsonl", ".ndjson")) else "csv"


def _parse_files(cfg: RunConfig, errors: list):
    for path in cfg.inputs:
        fmt = cfg.fmt or _guess_format(path)
        with _open_input(path) as fh:
            try:
                yield from parse_transfers(fh, fmt, cfg.on_error, errors)
            except ParseError as exc:
                raise DataError(f"{path}: {exc}") from None


def cmd_ingest(cfg: RunConfig) -> IngestStats:
    errors: list[ParseError] = []
    graphs, stats = ingest_records(_parse_files(cfg, errors), cfg.token_address)
    stats.rows_skipped = len(errors)
    for err in errors[:20]:
        log.warning("skipped %s", err)
    if len(errors) > 20:
        log.warning("... %d more malformed rows skipped", len(errors) - 20)
    if not graphs:
        raise DataError("no records")

    write_graph_cache(cfg.cache_dir, graphs, stats)
    write_text(cfg.cache_dir / "ingest-config.json", json.dumps(cfg.ingest_config(), indent=2, sort_keys=True) + "\n")
    for key, value in stats.to_dict().items():
        print(f"{key}: {value}")
    return stats


def _load_graphs(cfg: RunConfig):
    try:
        return read_graph_cache(cfg.cache_dir)
    except FileNotFoundError:
        raise DataError(f"no graph cache under {cfg.cache_dir}; run `tokennet ingest` first") from None


def cmd_analyze(cfg: RunConfig):
    graphs, _ = _load_graphs(cfg)
    if not graphs:
        raise DataError("graph cache holds no days")
    log.info("analyzing %d days", len(graphs))
    results = analyze_days(graphs, cfg.settings, cfg.jobs)
    write_analysis_cache(cfg.cache_dir, results, cfg.settings)
    n_sig = sum(1 for r in results if r.core is not None and r.core.significant)
    print(f"days: {len(results)}")
    print(f"significant_core_days: {n_sig}")
    return results


def _rpc_client(cfg: RunConfig) -> CodeLookupClient | None:
    url = cfg.rpc_url or os.environ.get(RPC_ENV_VAR)
    return CodeLookupClient(url) if url else None


def cmd_report(cfg: RunConfig) -> list[Path]:
    try:
        results, settings = read_analysis_cache(cfg.cache_dir)
    except FileNotFoundError:
        raise DataError(f"no analysis under {cfg.cache_dir}; run `tokennet analyze` first") from None
    if not results:
        raise DataError("analysis cache holds no days")
    _, stats = _load_graphs(cfg)
    ingest_cfg_path = cfg.cache_dir / "ingest-config.json"
    ingest_cfg = json.loads(ingest_cfg_path.read_text(encoding="utf-8")) if ingest_cfg_path.exists() else {}

    metadata = run_metadata(cfg.token, ingest_cfg, settings, cfg.report_config(), stats.to_dict(), len(results))
    table = assemble_timeseries({r.day: r for r in results}, metadata)
    corr = None
    if len(results) >= 2:
        corr = correlation_matrix(table, cfg.correlation, cfg.extended_correlation)
    else:
        log.warning("only one day analyzed; correlation matrix skipped")

    tallies = tally_core_days(((r.day, r.core) for r in results if r.core is not None),
                              require_significant=settings.policy == "filtered")
    labels = LabelStore.open(cfg.labels)
    kinds = classify_addresses(tallies, labels, _rpc_client(cfg))
    unknown = sum(1 for k in kinds.values() if k is Kind.UNKNOWN)
    if unknown:
        log.warning("%d core address(es) left unclassified; add labels or pass --rpc-url", unknown)
    if labels.dirty and labels.path is not None:
        labels.save()
    profiles = build_profiles(tallies, kinds, labels)

    written = write_bundle(cfg.token_dir, table, corr, profiles, cfg.token, cfg.activity_charts)
    written.append(write_text(cfg.token_dir / "run-metadata.json",
                              json.dumps(metadata, indent=2, sort_keys=True, ensure_ascii=False) + "\n"))
    for p in written:
        print(p)
    return written


def cmd_classify(cfg: RunConfig, addresses: list[str]) -> dict:
    if not addresses:
        try:
            results, settings = read_analysis_cache(cfg.cache_dir)
        except FileNotFoundError:
            raise DataError(f"no analysis under {cfg.cache_dir}; run `tokennet analyze` first") from None
        addresses = sorted(tally_core_days(((r.day, r.core) for r in results if r.core is not None),
                                           require_significant=settings.policy == "filtered"))
    try:
        addresses = [canonical_address(a) for a in addresses]
    except ValueError as exc:
        raise DataError(str(exc)) from None
    labels = LabelStore.open(cfg.labels)
    kinds = classify_addresses(addresses, labels, _rpc_client(cfg))
    if labels.dirty and labels.path is not None:
        labels.save()
    for addr, kind in kinds.items():
        entry = labels.get(addr)
        print(f"{addr},{kind.value},{entry.label if entry else ''}")
    return kinds


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="tokennet",
        description="Decentralization metrics for daily token transfer networks.",
        epilog=SCHEMA_HELP,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    parser.add_argument("-q", "--quiet", action="store_true", help="warnings and errors only")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    common = _Parser(add_help=False)
    common.add_argument("--token", required=True, help="dataset name; outputs go to OUT/TOKEN/")
    common.add_argument("--out", type=Path, default=Path("out"), help="output root (default: ./out)")

    p = sub.add_parser("ingest", parents=[common], help="parse an export and cache one graph per UTC day",
                       epilog=SCHEMA_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("inputs", nargs="+", type=Path, help="CSV or JSONL export file(s)")
    p.add_argument("--format", dest="fmt", choices=("csv", "jsonl"), help="default: from file extension")
    p.add_argument("--token-address", help="keep only this token's transfers (required if the export mixes tokens)")
    p.add_argument("--on-error", choices=("abort", "skip"), default="abort", help="malformed row policy")

    p = sub.add_parser("analyze", parents=[common], help="features and core-periphery for every cached day")
    p.add_argument("--seed", type=int, default=0, help="community detection seed (default 0)")
    p.add_argument("--resolution", type=float, default=1.0, help="modularity resolution (default 1.0)")
    p.add_argument("--replicates", type=int, default=100, help="null-model replicates (default 100)")
    p.add_argument("--swaps-per-edge", type=int, default=10, help="double-edge swaps per edge (default 10)")
    p.add_argument("--alpha", type=float, default=0.05, help="significance level (default 0.05)")
    p.add_argument("--null-seed", type=int, default=0, help="null-model master seed (default 0)")
    p.add_argument("--null-model", choices=NULL_MODELS, default="gnm", help="null model (default gnm)")
    p.add_argument("--no-significance", action="store_true", help="skip the significance test")
    p.add_argument("--untested-significant", action="store_true",
                   help="treat days without a test as significant")
    p.add_argument("--policy", choices=POLICIES, default="filtered",
                   help="core features on insignificant days: zeroed (filtered) or detected (raw)")
    p.add_argument("--jobs", type=int, default=1, help="days analyzed in parallel (default 1)")

    labels_help = "label store CSV (created from the starter labels if missing)"
    rpc_help = f"JSON-RPC endpoint for eth_getCode (default: ${RPC_ENV_VAR})"

    p = sub.add_parser("report", parents=[common], help="write tables, charts and run metadata")
    p.add_argument("--labels", type=Path, help=labels_help)
    p.add_argument("--rpc-url", help=rpc_help)
    p.add_argument("--correlation", choices=("pearson", "spearman"), default="pearson")
    p.add_argument("--extended-correlation", action="store_true",
                   help="add daily value and address count to the correlation matrix")
    p.add_argument("--activity-charts", action="store_true",
                   help="also chart daily value and address count")

    p = sub.add_parser("classify", help="classify addresses as CA/EOA")
    p.add_argument("addresses", nargs="*", help="addresses; default: every core address of --token")
    p.add_argument("--token", help="dataset whose core addresses to classify")
    p.add_argument("--out", type=Path, default=Path("out"))
    p.add_argument("--labels", type=Path, help=labels_help)
    p.add_argument("--rpc-url", help=rpc_help)
    return parser


def config_from_args(args) -> RunConfig:
    cfg = RunConfig(token=args.token or "", out=args.out)
    if args.command == "ingest":
        cfg.inputs = args.inputs
        cfg.fmt = args.fmt
        cfg.token_address = args.token_address
        cfg.on_error = args.on_error
    elif args.command == "analyze":
        cfg.settings = AnalysisSettings(
            community_seed=args.seed,
            resolution=args.resolution,
            null_model=NullModelConfig(
                replicates=args.replicates,
                swaps_per_edge=args.swaps_per_edge,
                alpha=args.alpha,
                master_seed=args.null_seed,
                null_model=args.null_model,
                untested_is_significant=args.untested_significant,
            ),
            test_significance=not args.no_significance,
            policy=args.policy,
        )
        cfg.jobs = args.jobs
    elif args.command == "report":
        cfg.labels = args.labels
        cfg.rpc_url = args.rpc_url
        cfg.correlation = args.correlation
        cfg.extended_correlation = args.extended_correlation
        cfg.activity_charts = args.activity_charts
    elif args.command == "classify":
        cfg.labels = args.labels
        cfg.rpc_url = args.rpc_url
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg = config_from_args(args)
        if args.command == "ingest":
            cmd_ingest(cfg)
        elif args.command == "analyze":
            cmd_analyze(cfg)
        elif args.command == "report":
            cmd_report(cfg)
        elif args.command == "classify":
            if not args.addresses and not args.token:
                parser.error("classify needs addresses or --token")
            cmd_classify(cfg, args.addresses)
    except ValueError as exc:
        print(f"tokennet: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"tokennet: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"tokennet: error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
