"""Discrete core-periphery detection and its significance test.

For a candidate core ``S`` of size ``k`` the Borgatti-Everett error counts
missing core-core ties plus present periphery-periphery ties.  Core-periphery
ties are unconstrained, so

    Z(S) = C(k, 2) + |E| - sum(deg(v) for v in S)

and the best core of each size is the ``k`` highest-degree nodes.  The LIP
detector walks that degree-ordered prefix, updating ``Z`` by ``k - deg`` as
each node joins.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable

import numpy as np
from numba import njit, types
from numba.typed import Dict

from .ingest import DailyGraph

log = logging.getLogger(__name__)

NULL_MODELS = ("gnm", "configuration")


@dataclass(frozen=True)
class NullModelConfig:
    """Parameters of the significance test.

    ``null_model="gnm"`` draws uniform simple graphs with the observed node and
    edge counts.  ``"configuration"`` rewires by double-edge swaps; it keeps the
    degree sequence, which fixes the optimal error exactly, so under that null
    every replicate ties the observation and ``p`` is always 1.
    """

    replicates: int = 100
    swaps_per_edge: int = 10
    alpha: float = 0.05
    master_seed: int = 0
    null_model: str = "gnm"
    # significance assumed for days whose test was skipped or impossible
    untested_is_significant: bool = False

    def __post_init__(self):
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        if self.swaps_per_edge < 0:
            raise ValueError("swaps_per_edge must be >= 0")
        if self.null_model not in NULL_MODELS:
            raise ValueError(f"null_model must be one of {NULL_MODELS}")


@dataclass(frozen=True)
class CorePeripheryResult:
    core: frozenset[str]
    z_error: int
    p_value: float | None
    significant: bool
    n_core: int
    avg_core_degree: float

    def to_dict(self) -> dict:
        return {
            "core": sorted(self.core),
            "z_error": self.z_error,
            "p_value": self.p_value,
            "significant": self.significant,
            "n_core": self.n_core,
            "avg_core_degree": self.avg_core_degree,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CorePeripheryResult":
        return cls(
            frozenset(d["core"]),
            d["z_error"],
            d["p_value"],
            d["significant"],
            d["n_core"],
            d["avg_core_degree"],
        )


@dataclass(frozen=True)
class RewireResult:
    graph: DailyGraph
    attempted: int
    accepted: int

    @property
    def unchanged(self) -> bool:
        return self.accepted == 0


def borgatti_everett_error(graph: DailyGraph, core: Iterable[str]) -> int:
    in_core = graph.mask(core)
    k = int(in_core.sum())
    cu, cv = in_core[graph.u], in_core[graph.v]
    core_edges = int(np.count_nonzero(cu & cv))
    periphery_edges = int(np.count_nonzero(~cu & ~cv))
    return k * (k - 1) // 2 - core_edges + periphery_edges


def _degree_order(graph: DailyGraph) -> np.ndarray:
    # degree descending, ties by ascending address
    return np.lexsort((graph.address_rank, -graph.degrees))


def _prefix_errors(sorted_degrees: np.ndarray, n_edges: int) -> np.ndarray:
    """``Z`` for every prefix size ``0..n`` of a degree-ordered node list."""
    steps = np.arange(len(sorted_degrees), dtype=np.int64) - sorted_degrees
    z = np.empty(len(sorted_degrees) + 1, dtype=np.int64)
    z[0] = n_edges
    np.cumsum(steps, out=z[1:])
    z[1:] += n_edges
    return z


def optimal_error(degrees: np.ndarray, n_edges: int) -> int:
    """Minimum Borgatti-Everett error over all cores, from the degree sequence alone."""
    return int(_prefix_errors(np.sort(degrees)[::-1].astype(np.int64), n_edges).min())


def lip_partition(graph: DailyGraph) -> tuple[frozenset[str], int]:
    """Best degree-prefix core; the smallest one when several tie."""
    order = _degree_order(graph)
    z = _prefix_errors(graph.degrees[order].astype(np.int64), graph.n_edges)
    k = int(np.argmin(z))
    core = frozenset(graph.addresses[i] for i in order[:k].tolist())
    return core, int(z[k])


def core_metrics(graph: DailyGraph, core: Iterable[str]) -> tuple[int, float]:
    in_core = graph.mask(core)
    n_core = int(in_core.sum())
    if n_core == 0:
        return 0, 0.0
    return n_core, int(graph.degrees[in_core].sum()) / n_core


@njit(cache=True)
def _double_edge_swaps(n, u, v, first, second, flip):
    present = Dict.empty(key_type=types.int64, value_type=types.int64)
    for e in range(len(u)):
        present[u[e] * n + v[e]] = e
    accepted = 0
    for t in range(len(first)):
        e1 = first[t]
        e2 = second[t]
        if e1 == e2:
            continue
        a, b = u[e1], v[e1]
        if flip[t]:
            c, d = v[e2], u[e2]
        else:
            c, d = u[e2], v[e2]
        # (a,b),(c,d) -> (a,d),(c,b)
        if a == d or c == b:
            continue
        x1, y1 = (a, d) if a < d else (d, a)
        x2, y2 = (c, b) if c < b else (b, c)
        k1 = x1 * n + y1
        k2 = x2 * n + y2
        if k1 in present or k2 in present:
            continue
        del present[u[e1] * n + v[e1]]
        del present[u[e2] * n + v[e2]]
        u[e1], v[e1] = x1, y1
        u[e2], v[e2] = x2, y2
        present[k1] = e1
        present[k2] = e2
        accepted += 1
    return accepted


def rewire_configuration_model(graph: DailyGraph, seed: int, swaps: int) -> RewireResult:
    """Degree-preserving randomization by ``swaps`` attempted double-edge swaps.

    Swaps that would create a self-loop or a parallel edge are rejected.  Edge
    weights and counts travel with their edge slot.
    """
    m = graph.n_edges
    if m < 2 or swaps <= 0:
        return RewireResult(graph, 0, 0)
    rng = np.random.default_rng(seed)
    first = rng.integers(0, m, size=swaps, dtype=np.int64)
    second = rng.integers(0, m, size=swaps, dtype=np.int64)
    flip = rng.integers(0, 2, size=swaps, dtype=np.int8).astype(np.bool_)
    u = graph.u.copy()
    v = graph.v.copy()
    accepted = int(_double_edge_swaps(graph.n_nodes, u, v, first, second, flip))
    if accepted == 0:
        return RewireResult(graph, swaps, 0)
    out = DailyGraph(graph.day, graph.addresses, u, v, graph.weights, graph.counts.copy())
    return RewireResult(out, swaps, accepted)


def _gnm_degrees(n: int, m: int, rng: np.random.Generator) -> np.ndarray:
    """Degree sequence of a uniform simple graph with ``n`` nodes and ``m`` edges."""
    n_pairs = n * (n - 1) // 2
    if m > n_pairs:
        raise ValueError("more edges than node pairs")
    if n_pairs <= 2_000_000 or 2 * m > n_pairs:
        iu, iv = np.triu_indices(n, 1)
        pick = rng.choice(n_pairs, size=m, replace=False)
        a, b = iu[pick], iv[pick]
    else:
        keys = np.empty(0, dtype=np.int64)
        while len(keys) < m:
            need = m - len(keys)
            x = rng.integers(0, n, size=need + need // 8 + 16, dtype=np.int64)
            y = rng.integers(0, n, size=len(x), dtype=np.int64)
            ok = x != y
            lo, hi = np.minimum(x[ok], y[ok]), np.maximum(x[ok], y[ok])
            fresh = lo * n + hi
            # keep first occurrences in draw order so the sample is reproducible
            merged = np.concatenate([keys, fresh])
            _, first = np.unique(merged, return_index=True)
            keys = merged[np.sort(first)][:m]
        a, b = keys // n, keys % n
    return np.bincount(a, minlength=n) + np.bincount(b, minlength=n)


def replicate_seed(master_seed: int, index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([master_seed, index])


def null_errors(graph: DailyGraph, config: NullModelConfig) -> list[int | None]:
    """Optimal error of each null replicate; ``None`` where rewiring was impossible."""
    out: list[int | None] = []
    m = graph.n_edges
    for r in range(config.replicates):
        ss = replicate_seed(config.master_seed, r)
        if config.null_model == "gnm":
            degrees = _gnm_degrees(graph.n_nodes, m, np.random.default_rng(ss))
            out.append(optimal_error(degrees, m))
        else:
            res = rewire_configuration_model(graph, ss, config.swaps_per_edge * m)
            out.append(None if res.unchanged else lip_partition(res.graph)[1])
    return out


def significance_test(graph: DailyGraph, observed_z: int, config: NullModelConfig) -> float | None:
    """One-sided plus-one p-value: ``(1 + #{null Z <= observed}) / (1 + R)``.

    ``R`` counts the usable replicates.  Returns ``None`` when no replicate
    could be generated.
    """
    errors = [z for z in null_errors(graph, config) if z is not None]
    if not errors:
        log.warning("%s: no null replicate could be generated; significance untested", graph.day)
        return None
    hits = sum(1 for z in errors if z <= observed_z)
    return (1 + hits) / (1 + len(errors))


def detect_core_periphery(graph: DailyGraph, config: NullModelConfig | None = None, test: bool = True) -> CorePeripheryResult:
    """LIP core plus its significance verdict.  Core metrics are the raw, unfiltered ones."""
    config = config or NullModelConfig()
    core, z = lip_partition(graph)
    p = significance_test(graph, z, config) if test else None
    significant = config.untested_is_significant if p is None else p < config.alpha
    n_core, avg_deg = core_metrics(graph, core)
    return CorePeripheryResult(core, z, p, significant, n_core, avg_deg)
