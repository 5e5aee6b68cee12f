"""Query application: per-node Poisson query generation, duplicate-suppressed
TTL flooding toward providers, and the hop-dependent reply rule."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import netgraph
from .core import DemandProfile


def lambda_at(profile: DemandProfile, t: float) -> float:
    """Per-node query rate at time t; ramps interpolate linearly."""
    if not profile:
        raise ValueError("empty demand profile")
    if t < profile[0].t_start - 1e-9 or t > profile[-1].t_end + 1e-9:
        raise ValueError(f"t={t} outside the profile range "
                         f"[{profile[0].t_start}, {profile[-1].t_end}]")
    for seg in profile:
        if seg.t_start <= t < seg.t_end:
            frac = (t - seg.t_start) / (seg.t_end - seg.t_start)
            return seg.rate_from + frac * (seg.rate_to - seg.rate_from)
    return profile[-1].rate_to  # t == end of the last segment


@dataclass
class Query:
    origin: int
    seq: int
    issue_time: float
    hops_traversed: int = 0


def generate_queries(non_providers, rate: float, dt: float, rng: np.random.Generator,
                     issue_time: float = 0.0, seq_counters: dict | None = None) -> list[Query]:
    """Each non-provider emits a query with probability rate*dt (Poisson
    thinning); providers emit none. Nodes are scanned in ascending id order
    so the draw sequence is reproducible."""
    nodes = np.asarray(sorted(non_providers) if isinstance(non_providers, (set, frozenset))
                       else non_providers, dtype=np.int64)
    if nodes.size == 0 or rate <= 0.0:
        return []
    hits = rng.random(nodes.size) < rate * dt
    queries = []
    for origin in nodes[hits]:
        origin = int(origin)
        if seq_counters is None:
            seq = 0
        else:
            seq = seq_counters.get(origin, 0)
            seq_counters[origin] = seq + 1
        queries.append(Query(origin, seq, issue_time))
    return queries


def propagate_query(query: Query, index: netgraph.SpatialIndex, provider_mask: np.ndarray,
                    h_max: int, scratch: netgraph.BfsScratch | None = None) -> list[tuple[int, int]]:
    """Flood the query up to h_max hops and collect every provider reached.

    Each node relays a given (origin, seq) once, so the flood is exactly a
    breadth-first search and the reported hop counts are shortest-path
    distances. Returns (provider, hops) pairs ordered by (hops, id); a
    provider at the origin itself appears with hops=0.
    """
    nodes, hops = netgraph.bfs_hops(index, query.origin, h_max, scratch)
    hit = provider_mask[nodes]
    return [(int(n), int(h)) for n, h in zip(nodes[hit], hops[hit])]


def decide_reply(hops: int, rng: np.random.Generator, scale: float = 1.0) -> bool:
    """Reply with probability scale/hops (capped at 1); hops=0 always replies."""
    if hops <= 0:
        return True
    p = min(1.0, scale / hops)
    return bool(rng.random() < p)
