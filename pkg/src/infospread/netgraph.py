"""Unit-disk neighbor discovery over a spatial grid.

Cells are radio_range wide, so all neighbors of a node live in its own or
the eight surrounding cells. rebuild() materializes the full adjacency in
CSR form with one vectorized pass per cell offset; protocol code then
reads neighbor lists as array slices.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_OFFSETS = [(dx, dy) for dx in (-1, 0, 1) for dy in (-1, 0, 1)]


@dataclass
class SpatialIndex:
    cell_size: float
    area_side: float
    positions: np.ndarray          # (n, 2), snapshot the index was built from
    grid: dict                     # (cx, cy) -> ndarray of node ids
    indptr: np.ndarray             # CSR row starts, (n + 1,)
    indices: np.ndarray            # CSR neighbor ids, ascending per row
    generation: int = 0

    @property
    def n_nodes(self) -> int:
        return len(self.positions)


def rebuild(positions: np.ndarray, radio_range: float, area_side: float,
            generation: int = 0) -> SpatialIndex:
    """Build a SpatialIndex consistent with the given positions.

    Neighborhood is the closed disk: dist <= radio_range, self excluded.
    """
    pos = np.asarray(positions, dtype=float)
    n = len(pos)
    cell_size = float(radio_range)
    if n == 0:
        return SpatialIndex(cell_size, area_side, pos.reshape(0, 2), {},
                            np.zeros(1, dtype=np.int64), np.zeros(0, dtype=np.int64), generation)

    ncells = int(area_side // cell_size) + 2
    cx = np.floor(pos[:, 0] / cell_size).astype(np.int64)
    cy = np.floor(pos[:, 1] / cell_size).astype(np.int64)
    cell_id = cx * ncells + cy

    order = np.argsort(cell_id, kind="stable")
    sorted_ids = cell_id[order]

    grid: dict = {}
    uniq, starts = np.unique(sorted_ids, return_index=True)
    bounds = np.append(starts, n)
    for k, cid in enumerate(uniq):
        members = np.sort(order[bounds[k]:bounds[k + 1]])
        grid[(int(cid // ncells), int(cid % ncells))] = members

    src_parts, dst_parts = [], []
    node_ids = np.arange(n, dtype=np.int64)
    for dx, dy in _OFFSETS:
        tx, ty = cx + dx, cy + dy
        valid = (tx >= 0) & (tx < ncells) & (ty >= 0) & (ty < ncells)
        tid = tx * ncells + ty
        lo = np.searchsorted(sorted_ids, tid, side="left")
        hi = np.searchsorted(sorted_ids, tid, side="right")
        lo[~valid] = 0
        hi[~valid] = 0
        counts = hi - lo
        total = int(counts.sum())
        if total == 0:
            continue
        src = np.repeat(node_ids, counts)
        run_start = np.cumsum(counts) - counts
        gather = np.repeat(lo, counts) + (np.arange(total) - np.repeat(run_start, counts))
        dst = order[gather]
        src_parts.append(src)
        dst_parts.append(dst)

    src = np.concatenate(src_parts) if src_parts else np.zeros(0, dtype=np.int64)
    dst = np.concatenate(dst_parts) if dst_parts else np.zeros(0, dtype=np.int64)
    d2 = ((pos[src] - pos[dst]) ** 2).sum(axis=1)
    keep = (d2 <= cell_size * cell_size) & (src != dst)
    src, dst = src[keep], dst[keep]

    order2 = np.lexsort((dst, src))
    src, dst = src[order2], dst[order2]
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.add.at(indptr, src + 1, 1)
    np.cumsum(indptr, out=indptr)
    return SpatialIndex(cell_size, area_side, pos, grid, indptr, dst, generation)


def neighbors(index: SpatialIndex, node: int) -> np.ndarray:
    """Node ids within radio range of ``node``, ascending, self excluded."""
    if node < 0 or node >= index.n_nodes:
        raise KeyError(f"unknown node {node}")
    return index.indices[index.indptr[node]:index.indptr[node + 1]]


def closest_provider_distance(index: SpatialIndex, node: int, providers) -> float:
    """Euclidean distance from ``node`` to the nearest provider (0 if the
    node is one itself)."""
    prov = np.asarray(sorted(providers) if isinstance(providers, set) else providers, dtype=np.int64)
    if prov.size == 0:
        raise ValueError("provider set is empty")
    if node < 0 or node >= index.n_nodes:
        raise KeyError(f"unknown node {node}")
    delta = index.positions[prov] - index.positions[node]
    return float(np.sqrt((delta ** 2).sum(axis=1).min()))


def closest_provider_distances(positions: np.ndarray, nodes: np.ndarray,
                               provider_positions: np.ndarray) -> np.ndarray:
    """Vectorized nearest-provider distance for many nodes at once."""
    if len(provider_positions) == 0:
        raise ValueError("provider set is empty")
    pts = positions[nodes]
    d2 = ((pts[:, None, :] - provider_positions[None, :, :]) ** 2).sum(axis=2)
    return np.sqrt(d2.min(axis=1))


class BfsScratch:
    """Reusable buffers for hop-limited breadth-first searches."""

    def __init__(self, n: int):
        self.seen = np.full(n, -1, dtype=np.int64)
        self.stamp = 0


def bfs_hops(index: SpatialIndex, origin: int, h_max: int,
             scratch: BfsScratch | None = None) -> tuple[np.ndarray, np.ndarray]:
    """All nodes within h_max hops of origin and their hop distances.

    Returns (nodes, hops); origin is included with hop 0. Level-synchronous
    expansion over the CSR adjacency, vectorized per level.
    """
    n = index.n_nodes
    if origin < 0 or origin >= n:
        raise KeyError(f"unknown node {origin}")
    if scratch is None:
        scratch = BfsScratch(n)
    scratch.stamp += 1
    stamp = scratch.stamp
    seen = scratch.seen

    frontier = np.array([origin], dtype=np.int64)
    seen[origin] = stamp
    out_nodes = [frontier]
    out_hops = [np.zeros(1, dtype=np.int64)]
    indptr, indices = index.indptr, index.indices
    for level in range(1, h_max + 1):
        lo = indptr[frontier]
        counts = indptr[frontier + 1] - lo
        total = int(counts.sum())
        if total == 0:
            break
        run_start = np.cumsum(counts) - counts
        gather = np.repeat(lo, counts) + (np.arange(total) - np.repeat(run_start, counts))
        cand = indices[gather]
        cand = cand[seen[cand] != stamp]
        if cand.size == 0:
            break
        frontier = np.unique(cand)
        seen[frontier] = stamp
        out_nodes.append(frontier)
        out_hops.append(np.full(len(frontier), level, dtype=np.int64))
    return np.concatenate(out_nodes), np.concatenate(out_hops)


def is_connected(index: SpatialIndex) -> bool:
    """True when every node is reachable from node 0 over the unit-disk graph."""
    n = index.n_nodes
    if n <= 1:
        return True
    nodes, _ = bfs_hops(index, 0, n)
    return len(nodes) == n


def brute_force_neighbors(positions: np.ndarray, node: int, radio_range: float) -> np.ndarray:
    """O(n) reference scan used by tests as the oracle for neighbors()."""
    pos = np.asarray(positions, dtype=float)
    d2 = ((pos - pos[node]) ** 2).sum(axis=1)
    mask = d2 <= radio_range * radio_range
    mask[node] = False
    return np.nonzero(mask)[0]
