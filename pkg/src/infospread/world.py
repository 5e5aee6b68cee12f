"""Node deployment and mobility.

Deployments: uniform, stationary (the random-waypoint steady state, realized
by a stationarity-corrected initialization plus a warm-up), and clustered
(four equal clusters plus bridge nodes on the inter-center segments).

Mobility: static, stationary random waypoint, and random trip (waypoint
movement around four points of interest with occasional cluster changes).
State is kept in flat arrays and advanced on a fixed tick.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import netgraph
from .core import ClusterLayout

# Mean distance between two uniform points in the unit square; scales the
# expected trip length used by the stationary mixture weight.
MEAN_SEGMENT_FRACTION = (2.0 + math.sqrt(2.0) + 5.0 * math.asinh(1.0)) / 15.0


class ClusterConnectivityError(RuntimeError):
    """Clustered deployment stayed disconnected after the allowed redraws."""


@dataclass
class MobilityState:
    pos: np.ndarray          # (n, 2)
    dest: np.ndarray         # (n, 2), valid where moving
    speed: np.ndarray        # (n,)
    pause_left: np.ndarray   # (n,) seconds, valid where paused
    moving: np.ndarray       # (n,) bool
    home: np.ndarray | None = None  # (n,) cluster index, random trip only

    @property
    def n(self) -> int:
        return len(self.pos)


def deploy_uniform(n: int, area_side: float, rng: np.random.Generator) -> np.ndarray:
    """n independent positions, each coordinate uniform on [0, area_side]."""
    if n < 1:
        raise ValueError("need at least one node")
    return rng.uniform(0.0, area_side, size=(n, 2))


def _mean_inverse_speed(speed_min: float, speed_max: float) -> float:
    if speed_max == speed_min:
        return 1.0 / speed_min
    return (math.log(speed_max) - math.log(speed_min)) / (speed_max - speed_min)


def _length_biased_segments(m: int, area_side: float, rng: np.random.Generator):
    """Waypoint pairs drawn with probability proportional to their length."""
    starts = np.empty((m, 2))
    ends = np.empty((m, 2))
    filled = 0
    max_len = area_side * math.sqrt(2.0)
    while filled < m:
        batch = max(2 * (m - filled), 64)
        a = rng.uniform(0.0, area_side, size=(batch, 2))
        b = rng.uniform(0.0, area_side, size=(batch, 2))
        lengths = np.sqrt(((a - b) ** 2).sum(axis=1))
        accept = rng.random(batch) < lengths / max_len
        take = min(int(accept.sum()), m - filled)
        idx = np.nonzero(accept)[0][:take]
        starts[filled:filled + take] = a[idx]
        ends[filled:filled + take] = b[idx]
        filled += take
    return starts, ends


def stationary_waypoint_state(n: int, area_side: float, rng: np.random.Generator,
                              speed_min: float = 1.0, speed_max: float = 5.0,
                              pause_time: float = 10.0) -> MobilityState:
    """Waypoint process started in its steady state.

    A node is paused with the stationary pause fraction, sitting at a
    uniform waypoint with a uniform residual pause. A moving node sits
    uniformly on a length-biased waypoint segment with an inverse-speed
    biased speed; both biases factorize, so they are sampled independently.
    """
    mean_trip = MEAN_SEGMENT_FRACTION * area_side * _mean_inverse_speed(speed_min, speed_max)
    p_pause = pause_time / (pause_time + mean_trip) if pause_time > 0 else 0.0

    paused = rng.random(n) < p_pause
    pos = np.empty((n, 2))
    dest = np.zeros((n, 2))
    speed = np.full(n, speed_min)
    pause_left = np.zeros(n)

    k = int(paused.sum())
    if k:
        pos[paused] = rng.uniform(0.0, area_side, size=(k, 2))
        pause_left[paused] = rng.random(k) * pause_time
    m = n - k
    if m:
        idx = ~paused
        starts, ends = _length_biased_segments(m, area_side, rng)
        u = rng.random(m)
        pos[idx] = starts + u[:, None] * (ends - starts)
        dest[idx] = ends
        if speed_max > speed_min:
            speed[idx] = speed_min * (speed_max / speed_min) ** rng.random(m)
    return MobilityState(pos, dest, speed, pause_left, ~paused)


def deploy_stationary(n: int, area_side: float, warmup: float, rng: np.random.Generator,
                      speed_min: float = 1.0, speed_max: float = 5.0,
                      pause_time: float = 10.0, dt: float = 1.0) -> np.ndarray:
    """Snapshot of n waypoint-mobile nodes after the stationary init plus
    ``warmup`` simulated seconds; density is weighted toward the center."""
    state = stationary_waypoint_state(n, area_side, rng, speed_min, speed_max, pause_time)
    model = RandomWaypoint(area_side, speed_min, speed_max, pause_time)
    t = 0.0
    while t < warmup:
        step = min(dt, warmup - t)
        model.step(state, step, rng)
        t += step
    return state.pos.copy()


def cluster_shares(n: int, bridge_fraction: float) -> tuple[np.ndarray, int]:
    """Split n into four equal cluster shares plus the bridge remainder."""
    n_bridge = int(round(bridge_fraction * n))
    n_clustered = n - n_bridge
    share = np.full(4, n_clustered // 4)
    share[: n_clustered % 4] += 1
    return share, n_bridge


def deploy_clustered(n: int, layout: ClusterLayout, rng: np.random.Generator,
                     radio_range: float, area_side: float,
                     max_attempts: int = 10) -> np.ndarray:
    """Clustered deployment: equal shares in four disks, the rest uniform on
    the four inter-center side segments; redraws until the unit-disk graph
    is connected or the attempt budget runs out."""
    centers = np.asarray(layout.centers, dtype=float)
    share, n_bridge = cluster_shares(n, layout.bridge_fraction)

    # Segment endpoints between adjacent centers (the square's four sides
    # for the default quarter-point layout).
    seg_pairs = ((0, 1), (0, 2), (1, 3), (2, 3))

    for _ in range(max_attempts):
        parts = []
        for c in range(4):
            k = int(share[c])
            r = layout.cluster_radius * np.sqrt(rng.random(k))
            ang = rng.random(k) * 2.0 * np.pi
            pts = centers[c] + np.column_stack([r * np.cos(ang), r * np.sin(ang)])
            parts.append(pts)
        if n_bridge:
            seg = rng.integers(0, len(seg_pairs), size=n_bridge)
            u = rng.random(n_bridge)
            a = centers[[seg_pairs[i][0] for i in seg]]
            b = centers[[seg_pairs[i][1] for i in seg]]
            parts.append(a + u[:, None] * (b - a))
        pos = np.clip(np.vstack(parts), 0.0, area_side)
        index = netgraph.rebuild(pos, radio_range, area_side)
        if netgraph.is_connected(index):
            return pos
    raise ClusterConnectivityError(
        f"no connected clustered deployment found in {max_attempts} attempts "
        f"(n={n}, range={radio_range})")


def nearest_cluster(positions: np.ndarray, layout: ClusterLayout) -> np.ndarray:
    centers = np.asarray(layout.centers, dtype=float)
    d2 = ((positions[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    return d2.argmin(axis=1)


class RandomWaypoint:
    """Move-pause-move toward uniform destinations at a uniform speed."""

    def __init__(self, area_side: float, speed_min: float, speed_max: float, pause_time: float):
        self.area_side = area_side
        self.speed_min = speed_min
        self.speed_max = speed_max
        self.pause_time = pause_time

    def draw_destinations(self, k: int, rng: np.random.Generator, state: MobilityState,
                          which: np.ndarray) -> np.ndarray:
        return rng.uniform(0.0, self.area_side, size=(k, 2))

    def step(self, state: MobilityState, dt: float, rng: np.random.Generator) -> MobilityState:
        # Unpause first so a node whose pause just ended moves this tick.
        paused = ~state.moving
        state.pause_left[paused] -= dt
        unpause = paused & (state.pause_left <= 0.0)
        k = int(unpause.sum())
        if k:
            state.dest[unpause] = self.draw_destinations(k, rng, state, unpause)
            state.speed[unpause] = rng.uniform(self.speed_min, self.speed_max, size=k)
            state.moving[unpause] = True

        moving = state.moving
        if moving.any():
            delta = state.dest[moving] - state.pos[moving]
            dist = np.sqrt((delta ** 2).sum(axis=1))
            step = state.speed[moving] * dt
            arrive = step >= dist
            scale = np.zeros_like(dist)
            far = ~arrive
            scale[far] = step[far] / dist[far]
            newpos = state.pos[moving] + delta * scale[:, None]
            newpos[arrive] = state.dest[moving][arrive]
            state.pos[moving] = newpos

            idx = np.nonzero(moving)[0][arrive]
            state.moving[idx] = False
            state.pause_left[idx] = self.pause_time
        return state


class RandomTrip(RandomWaypoint):
    """Waypoint movement inside a home cluster, hopping clusters with a
    fixed probability on every destination draw."""

    def __init__(self, layout: ClusterLayout, area_side: float, speed_min: float,
                 speed_max: float, pause_time: float, inter_cluster_prob: float):
        super().__init__(area_side, speed_min, speed_max, pause_time)
        self.layout = layout
        self.centers = np.asarray(layout.centers, dtype=float)
        self.inter_cluster_prob = inter_cluster_prob

    def draw_destinations(self, k: int, rng: np.random.Generator, state: MobilityState,
                          which: np.ndarray) -> np.ndarray:
        if state.home is None:
            raise ValueError("random trip needs home clusters in the mobility state")
        home = state.home[which]
        leave = rng.random(k) < self.inter_cluster_prob
        n_leave = int(leave.sum())
        if n_leave:
            others = (home[leave] + 1 + rng.integers(0, 3, size=n_leave)) % 4
            home = home.copy()
            home[leave] = others
        state.home[which] = home
        r = self.layout.cluster_radius * np.sqrt(rng.random(k))
        ang = rng.random(k) * 2.0 * np.pi
        dest = self.centers[home] + np.column_stack([r * np.cos(ang), r * np.sin(ang)])
        return np.clip(dest, 0.0, self.area_side)


def step_mobility(state: MobilityState, dt: float, model, rng: np.random.Generator) -> MobilityState:
    """Advance all nodes by dt under the given model (None means static)."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    if model is None:
        return state
    return model.step(state, dt, rng)


def static_state(positions: np.ndarray) -> MobilityState:
    n = len(positions)
    return MobilityState(
        pos=np.array(positions, dtype=float),
        dest=np.zeros((n, 2)),
        speed=np.zeros(n),
        pause_left=np.zeros(n),
        moving=np.zeros(n, dtype=bool),
    )
