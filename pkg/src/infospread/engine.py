"""Simulation loop: event scheduling, copy migration, query serving, metric
sampling and multi-run orchestration.

Time advances through a priority event queue; mobility and query generation
run on a fixed tick interleaved with protocol events (cache expiries, copy
hop deliveries). Every stochastic concern draws from its own named stream,
and each copy owns a private stream, so runs are bitwise reproducible and
scenarios sharing a seed share their world.
"""

from __future__ import annotations

import heapq
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import adaptation as ad
from . import analytics, dissemination as diss, netgraph, queryapp, world
from .core import Scenario, derive_stream, dump_scenario, validate_scenario

TICK = 0
CACHE_EXPIRY = 1
QUERY = 2
HOP = 3
SAMPLE = 4


@dataclass
class RunResult:
    scenario: Scenario
    run_index: int
    series: dict
    access_samples: list              # (t, distances ndarray over non-providers)
    stint_counts: np.ndarray          # I_i per node
    served_counts: np.ndarray         # cumulative served queries per node
    decisions: list                   # (t, decision name) when adaptation is on
    initial_positions: np.ndarray
    final_positions: np.ndarray
    effective_mu_ref: float | None
    queries_issued: int
    queries_served: int
    rebuild_count: int
    duplication_events: int
    trace: list | None = None

    def provider_times(self) -> np.ndarray:
        return self.scenario.cache_time * self.stint_counts


class Simulation:
    """Single run; mutated only by its own event loop."""

    def __init__(self, scenario: Scenario, run_index: int = 0, collect_trace: bool = False):
        self.s = validate_scenario(scenario)
        self.run_index = run_index
        self.collect_trace = collect_trace
        s = self.s

        self.rng_deploy = derive_stream(s.seed, "deployment", run_index)
        self.rng_mobility = derive_stream(s.seed, "mobility", run_index)
        self.rng_queries = derive_stream(s.seed, "queries", run_index)
        self.rng_providers = derive_stream(s.seed, "providers", run_index)

        self.clock = 0.0
        self.heap: list = []
        self._tie = 0
        self.link = diss.IdealLink()

        n = s.n_nodes
        self.stint_counts = np.zeros(n, dtype=np.int64)
        self.served_counts = np.zeros(n, dtype=np.int64)
        self.seq_counters: dict = {}
        self.queries_issued = 0
        self.queries_served = 0
        self.duplication_events = 0
        self.decisions: list = []
        self.trace: list | None = [] if collect_trace else None
        self.scratch = netgraph.BfsScratch(n)
        self._ball_cache: dict | None = {} if s.mobility == "static" else None

        self._init_world()
        self._init_copies()

        self.mu_ref = None
        if s.adaptation is not None:
            self.mu_ref = s.adaptation.mu_ref
            if self.mu_ref is None:
                lam0 = queryapp.lambda_at(s.demand, 0.0)
                self.mu_ref = ad.compute_mu_ref(s.n_nodes, s.initial_providers, lam0)

        self._t_chi: list = []
        self._chi_spatial: list = []
        self._chi_nodal: list = []
        self._t_prov: list = []
        self._c_t: list = []
        self._ideal_c: list = []
        self._t_coarse: list = []
        self._c_coarse: list = []
        self.access_samples: list = []

        self._nodal_ref = None
        if s.mobility == "static" and s.n_nodes >= 2:
            self._nodal_ref = analytics.nodal_reference(self.positions, s.area_side, s.n_bins)

    # -- world -------------------------------------------------------------

    def _init_world(self):
        s = self.s
        homes = None
        if s.deployment == "uniform":
            pos = world.deploy_uniform(s.n_nodes, s.area_side, self.rng_deploy)
            self.mob_state = world.static_state(pos)
        elif s.deployment == "stationary":
            state = world.stationary_waypoint_state(
                s.n_nodes, s.area_side, self.rng_deploy, s.speed_min, s.speed_max, s.pause_time)
            model = world.RandomWaypoint(s.area_side, s.speed_min, s.speed_max, s.pause_time)
            t = 0.0
            while t < s.warmup:
                step = min(s.mobility_dt, s.warmup - t)
                model.step(state, step, self.rng_deploy)
                t += step
            self.mob_state = state
        else:  # clustered
            pos = world.deploy_clustered(s.n_nodes, s.cluster, self.rng_deploy,
                                         s.radio_range, s.area_side)
            self.mob_state = world.static_state(pos)
            homes = world.nearest_cluster(pos, s.cluster)

        if s.mobility == "static":
            self.model = None
        elif s.mobility == "srwp":
            self.model = world.RandomWaypoint(s.area_side, s.speed_min, s.speed_max, s.pause_time)
            if s.deployment != "stationary":
                # No warmed-up waypoint state to inherit; start everyone paused
                # with a desynchronized residual.
                self.mob_state.pause_left[:] = self.rng_deploy.random(s.n_nodes) * s.pause_time
        else:  # random_trip
            self.model = world.RandomTrip(s.cluster, s.area_side, s.speed_min, s.speed_max,
                                          s.pause_time, s.inter_cluster_prob)
            self.mob_state.home = homes
            self.mob_state.pause_left[:] = self.rng_deploy.random(s.n_nodes) * s.pause_time

        self.initial_positions = self.mob_state.pos.copy()
        self.index = netgraph.rebuild(self.mob_state.pos, s.radio_range, s.area_side)
        self.rebuild_count = 0

    @property
    def positions(self) -> np.ndarray:
        return self.mob_state.pos

    # -- copies ------------------------------------------------------------

    def _copy_stream(self, copy_id: int) -> np.random.Generator:
        return derive_stream(self.s.seed, f"policy.copy{copy_id}", self.run_index)

    def _init_copies(self):
        s = self.s
        chosen = np.sort(self.rng_providers.choice(s.n_nodes, size=s.initial_providers, replace=False))
        self.copies: dict[int, diss.InformationCopy] = {}
        self.next_copy_id = 0
        self.n_cached = np.zeros(s.n_nodes, dtype=np.int64)
        self.provider_mask = np.zeros(s.n_nodes, dtype=bool)
        self.cached_at: dict[int, list[int]] = {}
        for node in chosen:
            copy = diss.InformationCopy(copy_id=self.next_copy_id, rng=self._copy_stream(self.next_copy_id))
            self.next_copy_id += 1
            self.copies[copy.copy_id] = copy
            self._cache(copy, int(node), 0.0)

    def _cache(self, copy: diss.InformationCopy, node: int, t: float):
        copy.state = diss.CACHED
        copy.holder = node
        copy.forwarder = None
        copy.target = None
        copy.served_this_period = 0
        copy.expiry = t + self.s.cache_time
        self.n_cached[node] += 1
        self.provider_mask[node] = True
        self.cached_at.setdefault(node, []).append(copy.copy_id)
        self._push(copy.expiry, CACHE_EXPIRY, copy.copy_id)
        self._trace(t, copy.copy_id, "cache", node)

    def _uncache(self, copy: diss.InformationCopy):
        node = copy.holder
        self.n_cached[node] -= 1
        if self.n_cached[node] == 0:
            self.provider_mask[node] = False
        self.cached_at[node].remove(copy.copy_id)
        copy.holder = None

    def _trace(self, t: float, copy_id: int, event: str, node: int):
        if self.trace is not None:
            x, y = self.positions[node]
            self.trace.append((t, copy_id, event, node, float(x), float(y)))

    # -- event queue ---------------------------------------------------------

    def _push(self, time: float, kind: int, arg=None):
        heapq.heappush(self.heap, (time, self._tie, kind, arg))
        self._tie += 1

    # -- main loop -----------------------------------------------------------

    def run(self) -> RunResult:
        s = self.s
        self._push(0.0, TICK)
        self._push(0.0, SAMPLE, "obs")
        self._push(0.0, SAMPLE, "access")
        self._push(0.0, SAMPLE, "coarse")

        handlers = {
            TICK: self._on_tick,
            CACHE_EXPIRY: self._on_expiry,
            QUERY: self._on_query,
            HOP: self._on_hop,
            SAMPLE: self._on_sample,
        }
        horizon = s.sim_time + 1e-9
        while self.heap:
            time, _, kind, arg = heapq.heappop(self.heap)
            if time > horizon:
                break
            self.clock = time
            handlers[kind](time, arg)
        return self._result()

    def _on_tick(self, t: float, _arg):
        s = self.s
        if self.model is not None and t > 0.0:
            world.step_mobility(self.mob_state, s.mobility_dt, self.model, self.rng_mobility)
            self.rebuild_count += 1
            self.index = netgraph.rebuild(self.mob_state.pos, s.radio_range, s.area_side,
                                          generation=self.rebuild_count)
        if t < s.sim_time:
            dt = min(s.mobility_dt, s.sim_time - t)
            rate = queryapp.lambda_at(s.demand, t)
            non_providers = np.nonzero(~self.provider_mask)[0]
            for q in queryapp.generate_queries(non_providers, rate, dt, self.rng_queries,
                                               t, self.seq_counters):
                self._push(t, QUERY, q)
            nxt = t + s.mobility_dt
            if nxt <= s.sim_time:
                self._push(nxt, TICK)

    # -- queries -------------------------------------------------------------

    def _flood_ball(self, origin: int):
        # On a frozen graph the breadth-first ball of an origin never
        # changes, so it is computed once per origin and reused.
        if self._ball_cache is not None:
            ball = self._ball_cache.get(origin)
            if ball is None:
                ball = netgraph.bfs_hops(self.index, origin, self.s.h_max, self.scratch)
                self._ball_cache[origin] = ball
            return ball
        return netgraph.bfs_hops(self.index, origin, self.s.h_max, self.scratch)

    def _on_query(self, t: float, q: queryapp.Query):
        self.queries_issued += 1
        nodes, hops = self._flood_ball(q.origin)
        sel = self.provider_mask[nodes]
        prov, ph = nodes[sel], hops[sel]
        if prov.size == 0:
            return
        # Every reached provider decides independently whether to reply
        # (probability reply_scale/hops, batched rolls); the querier accepts
        # one of the replies it receives, so each query is served at most
        # once and aggregate service matches aggregate demand.
        p = np.where(ph == 0, 1.0, np.minimum(1.0, self.s.reply_scale / np.maximum(ph, 1)))
        repliers = prov[self.rng_queries.random(prov.size) < p]
        if repliers.size == 0:
            return
        node = int(repliers[self.rng_queries.integers(repliers.size)]) \
            if repliers.size > 1 else int(repliers[0])
        self.served_counts[node] += 1
        holding = self.cached_at.get(node)
        if holding:
            # co-located copies take turns absorbing the node's load
            holding.append(holding.pop(0))
            self.copies[holding[-1]].served_this_period += 1
        self.queries_served += 1

    # -- expiry / adaptation ---------------------------------------------------

    def _on_expiry(self, t: float, copy_id: int):
        copy = self.copies.get(copy_id)
        if copy is None or copy.state != diss.CACHED:
            raise RuntimeError(f"expiry for missing or moving copy {copy_id}")
        holder = copy.holder
        self.stint_counts[holder] += 1
        self._trace(t, copy_id, "expire", holder)

        if self.s.adaptation is None:
            copy.served_this_period = 0
            self._legacy_move(copy, t)
            return

        decision = ad.expiry_decision(copy.served_this_period, self.s.cache_time,
                                      self.s.adaptation, self.mu_ref)
        decision = ad.apply_count_floor(decision, len(self.copies), self.s.c_min)
        copy.served_this_period = 0
        if decision is ad.Decision.DROP:
            self._uncache(copy)
            del self.copies[copy_id]
            self._trace(t, copy_id, "drop", holder)
            effective = "drop"
        elif decision is ad.Decision.HANDOVER:
            self._legacy_move(copy, t)
            effective = "handover"
        else:
            # A replicate can degrade to a plain handover when no second
            # provider can be launched; the ledger records what happened.
            effective = self._replicate(copy, t)
        self.decisions.append((t, effective))

    def _legacy_move(self, copy: diss.InformationCopy, t: float):
        if self.s.policy == "rwd":
            self._rwd_move(copy, t)
        else:
            self._rdd_move(copy, t)

    def _neighbors(self, node: int) -> np.ndarray:
        idx = self.index
        return idx.indices[idx.indptr[node]:idx.indptr[node + 1]]

    def _rwd_move(self, copy: diss.InformationCopy, t: float):
        holder = copy.holder
        target = diss.rwd_move_target(holder, self._neighbors(holder), copy.rng, self.link)
        if target is None:
            copy.expiry = t + self.s.cache_time
            self._push(copy.expiry, CACHE_EXPIRY, copy.copy_id)
            self._trace(t, copy.copy_id, "cache", holder)
            return
        self._uncache(copy)
        copy.state = diss.MOVING
        copy.forwarder = holder
        copy.next_node = target
        self._push(t + self.s.hop_latency, HOP, copy.copy_id)

    def _rdd_move(self, copy: diss.InformationCopy, t: float):
        holder = copy.holder
        self._uncache(copy)
        copy.state = diss.MOVING
        copy.forwarder = holder
        copy.target = diss.rdd_plan_move(self.positions[holder], self.s.area_side,
                                         copy.rng, self.s.move_distance_mean)
        copy.hop_count = 0
        copy.reflections = 0
        self._rdd_step(copy, t)

    def _rdd_step(self, copy: diss.InformationCopy, t: float):
        s = self.s
        hop_guard = 4 * s.n_nodes
        while True:
            fwd = copy.forwarder
            nbrs = self._neighbors(fwd)
            best = diss.rdd_forward(fwd, copy.target, nbrs, self.positions)
            if best is not None and copy.hop_count < hop_guard:
                acked = None
                if diss.handover(copy, fwd, best, self.link):
                    acked = best
                else:
                    for cand in diss.rdd_closer_candidates(fwd, copy.target, nbrs, self.positions):
                        if cand != best and diss.handover(copy, fwd, cand, self.link):
                            acked = cand
                            break
                if acked is None:
                    self._settle(copy, t)  # every closer neighbor nacked
                    return
                copy.next_node = acked
                copy.hop_count += 1
                self._push(t + s.hop_latency, HOP, copy.copy_id)
                return
            new_target = diss.handle_void(copy.target, self.positions[fwd], copy.reflections,
                                          s.radio_range, s.max_reflections, s.area_side)
            if new_target is None or copy.hop_count >= hop_guard:
                self._settle(copy, t)
                return
            copy.target = new_target
            copy.reflections += 1
            self._trace(t, copy.copy_id, "reflect", fwd)

    def _settle(self, copy: diss.InformationCopy, t: float):
        node = copy.forwarder
        self._trace(t, copy.copy_id, "self_elect", node)
        self._cache(copy, node, t)

    def _on_hop(self, t: float, copy_id: int):
        copy = self.copies[copy_id]
        copy.forwarder = copy.next_node
        copy.next_node = None
        self._trace(t, copy_id, "hop", copy.forwarder)
        if self.s.policy == "rwd":
            self._cache(copy, copy.forwarder, t)
        else:
            self._rdd_step(copy, t)

    def _replicate(self, copy: diss.InformationCopy, t: float) -> str:
        """Launch two legacy moves from the holder; returns the effective
        decision ("replicate", or "handover" when only one provider could
        be launched)."""
        s = self.s
        holder = copy.holder
        if s.policy == "rwd":
            nbrs = self._neighbors(holder)
            first = diss.rwd_move_target(holder, nbrs, copy.rng, self.link) if len(nbrs) else None
            if first is None:
                # Degrade to handover-retry semantics: stay one more period.
                copy.expiry = t + s.cache_time
                self._push(copy.expiry, CACHE_EXPIRY, copy.copy_id)
                self._trace(t, copy.copy_id, "cache", holder)
                return "handover"
            second = None
            rest = [int(v) for v in nbrs if int(v) != first]
            if rest:
                second = diss.rwd_move_target(holder, rest, copy.rng, self.link)
            if second is not None:
                self._trace(t, copy.copy_id, "replicate", holder)
            self._uncache(copy)
            copy.state = diss.MOVING
            copy.forwarder = holder
            copy.next_node = first
            self._push(t + s.hop_latency, HOP, copy.copy_id)
            if second is None:
                return "handover"
            twin = self._spawn(holder)
            twin.next_node = second
            self._push(t + s.hop_latency, HOP, twin.copy_id)
            return "replicate"
        self._trace(t, copy.copy_id, "replicate", holder)
        origin_pos = self.positions[holder]
        target_a = diss.rdd_plan_move(origin_pos, s.area_side, copy.rng, s.move_distance_mean)
        target_b = diss.rdd_plan_move(origin_pos, s.area_side, copy.rng, s.move_distance_mean)
        self._uncache(copy)
        copy.state = diss.MOVING
        copy.forwarder = holder
        copy.target = target_a
        copy.hop_count = 0
        copy.reflections = 0
        twin = self._spawn(holder)
        twin.target = target_b
        self._rdd_step(copy, t)
        self._rdd_step(twin, t)
        return "replicate"

    def _spawn(self, holder: int) -> diss.InformationCopy:
        twin = diss.InformationCopy(copy_id=self.next_copy_id, rng=self._copy_stream(self.next_copy_id))
        self.next_copy_id += 1
        self.copies[twin.copy_id] = twin
        twin.state = diss.MOVING
        twin.forwarder = holder
        twin.hop_count = 0
        twin.reflections = 0
        return twin

    # -- metrics ---------------------------------------------------------------

    def _copy_positions(self) -> np.ndarray:
        nodes = [c.holder if c.state == diss.CACHED else c.forwarder for c in self.copies.values()]
        return self.positions[np.asarray(nodes, dtype=np.int64)]

    def _audit(self):
        cached = sum(1 for c in self.copies.values() if c.state == diss.CACHED)
        if int(self.n_cached.sum()) != cached:
            self.duplication_events += 1
            raise RuntimeError("copy accounting out of balance")

    def _on_sample(self, t: float, which: str):
        s = self.s
        if which == "obs":
            self._audit()
            self._t_chi.append(t)
            pos = self._copy_positions()
            samples = analytics.interdistance_samples(pos, s.area_side)
            if samples.size:
                self._chi_spatial.append(analytics.windowed_fit_index(samples, "spatial", s.n_bins))
                ref = self._nodal_ref
                if ref is None and s.n_nodes >= 2:
                    ref = analytics.nodal_reference(self.positions, s.area_side, s.n_bins)
                self._chi_nodal.append(
                    analytics.windowed_fit_index(samples, ref, s.n_bins)
                    if ref is not None else float("nan"))
            else:
                self._chi_spatial.append(float("nan"))
                self._chi_nodal.append(float("nan"))
            self._t_prov.append(t)
            self._c_t.append(len(self.copies))
            if self.mu_ref is not None:
                self._ideal_c.append(ad.ideal_provider_count(
                    s.n_nodes, queryapp.lambda_at(s.demand, min(t, s.sim_time)), self.mu_ref))
            else:
                self._ideal_c.append(float("nan"))
            nxt = t + s.obs_interval
            if nxt <= s.sim_time:
                self._push(nxt, SAMPLE, "obs")
        elif which == "access":
            non_prov = np.nonzero(~self.provider_mask)[0]
            prov_nodes = np.nonzero(self.provider_mask)[0]
            if prov_nodes.size and non_prov.size:
                dist = netgraph.closest_provider_distances(
                    self.positions, non_prov, self.positions[prov_nodes])
                self.access_samples.append((t, dist))
            nxt = t + s.cache_time
            if nxt <= s.sim_time:
                self._push(nxt, SAMPLE, "access")
        else:  # coarse provider count, 1000 s grid
            self._t_coarse.append(t)
            self._c_coarse.append(len(self.copies))
            nxt = t + 1000.0
            if nxt <= s.sim_time:
                self._push(nxt, SAMPLE, "coarse")

    def _result(self) -> RunResult:
        mk = analytics.MetricSeries
        t_chi = np.asarray(self._t_chi)
        series = {
            "chi2_spatial": mk("chi2_spatial", t_chi, np.asarray(self._chi_spatial), self.run_index),
            "chi2_nodal": mk("chi2_nodal", t_chi, np.asarray(self._chi_nodal), self.run_index),
            "providers": mk("providers", np.asarray(self._t_prov), np.asarray(self._c_t, dtype=float), self.run_index),
            "ideal_providers": mk("ideal_providers", np.asarray(self._t_prov), np.asarray(self._ideal_c), self.run_index),
            "providers_coarse": mk("providers_coarse", np.asarray(self._t_coarse), np.asarray(self._c_coarse, dtype=float), self.run_index),
        }
        return RunResult(
            scenario=self.s,
            run_index=self.run_index,
            series=series,
            access_samples=self.access_samples,
            stint_counts=self.stint_counts,
            served_counts=self.served_counts,
            decisions=self.decisions,
            initial_positions=self.initial_positions,
            final_positions=self.positions.copy(),
            effective_mu_ref=self.mu_ref,
            queries_issued=self.queries_issued,
            queries_served=self.queries_served,
            rebuild_count=self.rebuild_count,
            duplication_events=self.duplication_events,
            trace=self.trace,
        )


def run(scenario: Scenario, run_index: int = 0, out_dir: str | None = None,
        collect_trace: bool = False) -> RunResult:
    """Execute one run; optionally write its CSV bundle into out_dir."""
    result = Simulation(scenario, run_index, collect_trace).run()
    if out_dir is not None:
        write_run_csvs(result, out_dir)
    return result


def write_run_csvs(result: RunResult, out_dir: str) -> None:
    os.makedirs(out_dir, exist_ok=True)
    sr = result.series
    analytics.write_series_csv(os.path.join(out_dir, "chi2.csv"),
                               {"chi2_spatial": sr["chi2_spatial"], "chi2_nodal": sr["chi2_nodal"]})
    analytics.write_series_csv(os.path.join(out_dir, "providers.csv"),
                               {"c_t": sr["providers"], "ideal_c": sr["ideal_providers"]})
    analytics.write_series_csv(os.path.join(out_dir, "providers_coarse.csv"),
                               {"c_t": sr["providers_coarse"]})
    n = result.scenario.n_nodes
    analytics.write_csv(os.path.join(out_dir, "provider_time.csv"),
                        ["node", "stints", "tau_hat"],
                        zip(range(n), result.stint_counts, result.provider_times()))
    analytics.write_csv(os.path.join(out_dir, "served.csv"), ["node", "served"],
                        zip(range(n), result.served_counts))
    analytics.write_csv(os.path.join(out_dir, "access_dist.csv"), ["t", "node", "meters"],
                        ((t, i, d) for t, dist in result.access_samples
                         for i, d in enumerate(dist)))
    analytics.write_csv(os.path.join(out_dir, "deployment.csv"), ["node", "x", "y"],
                        ((i, x, y) for i, (x, y) in enumerate(result.initial_positions)))
    if result.trace is not None:
        analytics.write_csv(os.path.join(out_dir, "trace.csv"),
                            ["t", "copy_id", "event", "node", "x", "y"],
                            result.trace)


@dataclass
class BatchResult:
    scenario: Scenario
    results: list
    aggregates: dict      # name -> (times, mean, ci_halfwidth)


def _batch_worker(args) -> RunResult:
    scenario, run_index, out_dir = args
    return run(scenario, run_index, out_dir)


def run_batch(scenario: Scenario, runs: int | None = None, parallelism: int = 1,
              out_dir: str | None = None) -> BatchResult:
    """Execute independent runs 0..runs-1 and aggregate their series.

    Runs derive their streams from (seed, stream, run_index), so the level
    of parallelism cannot change any output.
    """
    scenario = validate_scenario(scenario)
    n_runs = scenario.runs if runs is None else runs
    if n_runs < 1:
        raise ValueError("runs must be at least 1")

    jobs = []
    for i in range(n_runs):
        rd = os.path.join(out_dir, f"run_{i:03d}") if out_dir is not None else None
        jobs.append((scenario, i, rd))

    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        dump_scenario(scenario, os.path.join(out_dir, "scenario.resolved.json"))

    if parallelism > 1 and n_runs > 1:
        with ProcessPoolExecutor(max_workers=parallelism) as pool:
            results = list(pool.map(_batch_worker, jobs))
    else:
        results = [_batch_worker(j) for j in jobs]
    results.sort(key=lambda r: r.run_index)

    aggregates = {}
    for name in ("chi2_spatial", "chi2_nodal", "providers", "providers_coarse"):
        aggregates[name] = analytics.aggregate_runs([r.series[name] for r in results])

    if out_dir is not None:
        agg_dir = os.path.join(out_dir, "aggregate")
        os.makedirs(agg_dir, exist_ok=True)
        for name, (times, mean, half) in aggregates.items():
            analytics.write_csv(os.path.join(agg_dir, f"{name}.csv"),
                                ["t", "mean", "ci95_halfwidth"], zip(times, mean, half))
    return BatchResult(scenario, results, aggregates)
