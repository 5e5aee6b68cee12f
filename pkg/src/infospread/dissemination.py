"""Copy-migration primitives for the two dissemination policies.

RWD hops the cached copy to a uniformly chosen one-hop neighbor at every
cache expiry. RDD alternates pause phases (the copy cached at a provider)
with move phases: the provider plans a target at a uniform angle and an
exponentially distributed distance, and the copy is greedily forwarded
toward that target until no neighbor is closer, where it either settles
(self-election) or bounces off the perceived void.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

CACHED = "cached"
MOVING = "moving"


@dataclass
class InformationCopy:
    """One migrating replica; cached at ``holder`` or in transit at ``forwarder``."""

    copy_id: int
    rng: np.random.Generator
    state: str = CACHED
    holder: int | None = None
    expiry: float = 0.0
    served_this_period: int = 0
    target: np.ndarray | None = None
    forwarder: int | None = None
    next_node: int | None = None
    hop_count: int = 0
    reflections: int = 0


class IdealLink:
    """Lossless link: every handover attempt is acknowledged."""

    def attempt(self, sender: int, receiver: int) -> bool:
        return True


def handover(copy: InformationCopy, sender: int, receiver: int, link) -> bool:
    """Single acked-transfer attempt; True means the receiver now carries the copy."""
    return bool(link.attempt(sender, receiver))


def rwd_select_next(provider: int, neighbor_list, rng: np.random.Generator) -> int | None:
    """Uniform choice among the one-hop neighbors; None when there are none."""
    n = len(neighbor_list)
    if n == 0:
        return None
    return int(neighbor_list[int(rng.integers(n))])


def rwd_move_target(provider: int, neighbor_list, rng: np.random.Generator, link) -> int | None:
    """Uniformly pick neighbors until one acks, never retrying a failed one.

    Returns the acked neighbor, or None when every neighbor nacked (the
    copy then stays cached for one more period).
    """
    remaining = [int(v) for v in neighbor_list]
    while remaining:
        choice = rwd_select_next(provider, remaining, rng)
        if link.attempt(provider, choice):
            return choice
        remaining.remove(choice)
    return None


def fold_into_area(point: np.ndarray, area_side: float) -> np.ndarray:
    """Specular (billiard) fold of an unconstrained point into the square."""
    m = np.mod(point, 2.0 * area_side)
    return np.where(m > area_side, 2.0 * area_side - m, m)


def fold_ray(origin: np.ndarray, theta: float, distance: float, area_side: float) -> np.ndarray:
    """Endpoint of a ray reflected at every boundary crossing until the full
    distance is consumed."""
    raw = np.asarray(origin, dtype=float) + distance * np.array([math.cos(theta), math.sin(theta)])
    return fold_into_area(raw, area_side)


def rdd_plan_move(origin: np.ndarray, area_side: float, rng: np.random.Generator,
                  mean_distance: float = 100.0) -> np.ndarray:
    """Plan a move-phase target: uniform angle, exponential distance, folded
    into the area."""
    theta = rng.uniform(0.0, 2.0 * math.pi)
    distance = rng.exponential(mean_distance)
    return fold_ray(origin, theta, distance, area_side)


def rdd_forward(forwarder: int, target: np.ndarray, neighbor_list: np.ndarray,
                positions: np.ndarray) -> int | None:
    """Greedy geographic step: the neighbor strictly closer to the target
    that minimizes the distance to it (ties to the lowest id); None when the
    forwarder is a local minimum (arrived / void)."""
    if len(neighbor_list) == 0:
        return None
    d_self = float(np.hypot(*(positions[forwarder] - target)))
    delta = positions[neighbor_list] - target
    d = np.sqrt((delta ** 2).sum(axis=1))
    closer = d < d_self
    if not closer.any():
        return None
    cand = neighbor_list[closer]
    dc = d[closer]
    best = np.argmin(dc)  # neighbor_list ascending, so argmin ties go to the lowest id
    return int(cand[best])


def rdd_closer_candidates(forwarder: int, target: np.ndarray, neighbor_list: np.ndarray,
                          positions: np.ndarray) -> list[int]:
    """Neighbors strictly closer to the target, best first (used for retries)."""
    if len(neighbor_list) == 0:
        return []
    d_self = float(np.hypot(*(positions[forwarder] - target)))
    delta = positions[neighbor_list] - target
    d = np.sqrt((delta ** 2).sum(axis=1))
    closer = d < d_self
    cand = neighbor_list[closer]
    order = np.lexsort((cand, d[closer]))
    return [int(v) for v in cand[order]]


def handle_void(target: np.ndarray, forwarder_pos: np.ndarray, reflections: int,
                radio_range: float, max_reflections: int, area_side: float) -> np.ndarray | None:
    """Decide between self-election and a void reflection once forwarding
    stalls.

    Within one hop of the target, or once the reflection budget is spent,
    the forwarder elects itself (None). Otherwise the unconsumed distance
    is re-aimed specularly: the void acts as a wall normal to the motion,
    so the heading reverses, and the new ray is folded at the area
    boundary as usual.
    """
    remaining = float(np.hypot(*(np.asarray(forwarder_pos, dtype=float) - target)))
    if remaining <= radio_range or reflections >= max_reflections:
        return None
    heading = math.atan2(target[1] - forwarder_pos[1], target[0] - forwarder_pos[0])
    return fold_ray(forwarder_pos, heading + math.pi, remaining, area_side)
