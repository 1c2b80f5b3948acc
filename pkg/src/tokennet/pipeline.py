"""Stage wiring shared by the CLI: per-day analysis, on-disk stage caches, run metadata."""

from __future__ import annotations

import hashlib
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from itertools import repeat
from pathlib import Path
from typing import Sequence

from . import __version__
from .coreperiphery import NullModelConfig, detect_core_periphery
from .errors import DataError
from .features import COMMUNITY_ALGORITHM, FEATURE_DIRECTIONS, FeatureVector, topological_features
from .ingest import DailyGraph
from .report import DayResult

log = logging.getLogger(__name__)

ANALYSIS_CACHE_FORMAT = "tokennet.day-analysis"
ANALYSIS_CACHE_VERSION = 1
POLICIES = ("filtered", "raw")


@dataclass(frozen=True)
class AnalysisSettings:
    community_seed: int = 0
    resolution: float = 1.0
    null_model: NullModelConfig = field(default_factory=NullModelConfig)
    test_significance: bool = True
    # "filtered": insignificant days report zero core; "raw": detected core always
    policy: str = "filtered"

    def __post_init__(self):
        if self.policy not in POLICIES:
            raise ValueError(f"policy must be one of {POLICIES}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "AnalysisSettings":
        d = dict(d)
        d["null_model"] = NullModelConfig(**d["null_model"])
        return cls(**d)


def config_digest(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def analyze_day(graph: DailyGraph, settings: AnalysisSettings) -> DayResult:
    topo = topological_features(graph, settings.community_seed)
    cp = detect_core_periphery(graph, settings.null_model, test=settings.test_significance)
    if settings.policy == "filtered" and not cp.significant:
        n_core, avg_deg = 0, 0.0
    else:
        n_core, avg_deg = cp.n_core, cp.avg_core_degree
    fv = FeatureVector(graph.day, n_core=n_core, avg_core_degree=avg_deg, **topo)
    return DayResult(fv, graph.total_weight, graph.n_nodes, cp)


def analyze_days(graphs: Sequence[DailyGraph], settings: AnalysisSettings, jobs: int = 1) -> list[DayResult]:
    total = len(graphs)
    out = []
    if jobs > 1 and total > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for i, res in enumerate(pool.map(analyze_day, graphs, repeat(settings), chunksize=4), 1):
                out.append(res)
                if i % 50 == 0 or i == total:
                    log.info("analyzed %d/%d days", i, total)
    else:
        for i, g in enumerate(graphs, 1):
            out.append(analyze_day(g, settings))
            if i % 50 == 0 or i == total:
                log.info("analyzed %d/%d days", i, total)
    return out


def write_analysis_cache(directory: Path, results: Sequence[DayResult], settings: AnalysisSettings) -> None:
    directory = Path(directory)
    adir = directory / "analysis"
    adir.mkdir(parents=True, exist_ok=True)
    wanted = {f"{r.day.isoformat()}.json" for r in results}
    for old in adir.glob("*.json"):
        if old.name not in wanted:
            old.unlink()
    for r in results:
        doc = {"format": ANALYSIS_CACHE_FORMAT, "version": ANALYSIS_CACHE_VERSION, **r.to_dict()}
        (adir / f"{r.day.isoformat()}.json").write_text(
            json.dumps(doc, indent=1) + "\n", encoding="utf-8", newline="\n"
        )
    (directory / "analysis-config.json").write_text(
        json.dumps(settings.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8", newline="\n"
    )


def read_analysis_cache(directory: Path) -> tuple[list[DayResult], AnalysisSettings]:
    directory = Path(directory)
    cfg = directory / "analysis-config.json"
    if not cfg.exists():
        raise FileNotFoundError(cfg)
    settings = AnalysisSettings.from_dict(json.loads(cfg.read_text(encoding="utf-8")))
    results = []
    for p in sorted((directory / "analysis").glob("*.json")):
        doc = json.loads(p.read_text(encoding="utf-8"))
        if doc.get("format") != ANALYSIS_CACHE_FORMAT or doc.get("version") != ANALYSIS_CACHE_VERSION:
            raise DataError(f"{p}: not a supported day-analysis file")
        results.append(DayResult.from_dict(doc))
    return results, settings


def run_metadata(token: str, ingest_config: dict, settings: AnalysisSettings, report_config: dict,
                 ingest_stats: dict, days: int) -> dict:
    config = {"ingest": ingest_config, "analysis": settings.to_dict(), "report": report_config}
    return {
        "tool": "tokennet",
        "version": __version__,
        "token": token,
        "config": config,
        "config_digest": config_digest(config),
        "algorithms": {
            "community_detection": COMMUNITY_ALGORITHM,
            "community_resolution": settings.resolution,
            "community_seed": settings.community_seed,
            "core_periphery": "lip",
            "core_error": "borgatti-everett",
            "significance": {
                "null_model": settings.null_model.null_model,
                "estimator": "plus-one, one-sided (null Z <= observed Z)",
                "replicates": settings.null_model.replicates,
                "alpha": settings.null_model.alpha,
                "master_seed": settings.null_model.master_seed,
            },
            "core_feature_policy": settings.policy,
        },
        "feature_directions": FEATURE_DIRECTIONS,
        "ingest_stats": ingest_stats,
        "days": days,
    }
