"""Decentralization metrics for token transfer networks."""

__version__ = "0.1.0"

from .coreperiphery import (  # noqa: E402
    CorePeripheryResult,
    NullModelConfig,
    borgatti_everett_error,
    core_metrics,
    detect_core_periphery,
    lip_partition,
    rewire_configuration_model,
    significance_test,
)
from .features import (  # noqa: E402
    FeatureVector,
    Partition,
    count_components,
    degree_centrality_std,
    detect_communities,
    largest_component_ratio,
    modularity,
)
from .ingest import (  # noqa: E402
    DailyGraph,
    IngestStats,
    TransferRecord,
    bucket_by_day,
    build_daily_graph,
    filter_records,
    ingest,
    parse_transfers,
)

__all__ = [
    "CorePeripheryResult",
    "DailyGraph",
    "FeatureVector",
    "IngestStats",
    "NullModelConfig",
    "Partition",
    "TransferRecord",
    "borgatti_everett_error",
    "bucket_by_day",
    "build_daily_graph",
    "core_metrics",
    "count_components",
    "degree_centrality_std",
    "detect_communities",
    "detect_core_periphery",
    "filter_records",
    "ingest",
    "largest_component_ratio",
    "lip_partition",
    "modularity",
    "parse_transfers",
    "rewire_configuration_model",
    "significance_test",
]
