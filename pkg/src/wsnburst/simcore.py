"""Deterministic simulation engine for ON/OFF sources feeding a tree of queues.

Sources alternate ON bursts (a drawn number of packets emitted at peak
rate) with drawn OFF periods.  Emitted packets drop straight into the
queue of the cluster's attachment node; every relay and the sink is a
FIFO single server with exponential service, re-drawn independently at
each hop.  Within one replication the whole trajectory is a
deterministic function of the seed.

The engine evaluates nodes in child-before-parent order and computes
each FIFO server's departures with the recursion
``d[i] = max(a[i], d[i-1]) + s[i]`` in closed vectorized form
(``d = S + running-max(a - S_shifted)`` with ``S = cumsum(s)``), which
reproduces the exact event-by-event sample path at a fraction of the
cost of a serial event loop.  Statistics are collected from packets
created after the warm-up period; buffers are infinite and overflow is
counted virtually (arrivals that find at least B packets in system).
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Mapping, Optional

import numpy as np

from .dists import ParameterError, sample, sample_array
from .model import EMISSION_POISSON, BulkSizeLaw, SourceParams, bulk_law_for
from .rng import derive_seed, fnv1a64, substream
from .topology import ROLE_RELAY, ROLE_SINK, TopologySpec, validate_topology

_SRC_TAG = fnv1a64("source")
_SVC_TAG = fnv1a64("service")
_SIZE_TAG = fnv1a64("size")

MEAN_PACKET_BYTES = 100.0  # recorded on traces only; service is drawn per hop


@dataclass(frozen=True)
class RunConfig:
    """Per-replication horizon settings (seconds)."""

    horizon_s: float = 90_000.0   # 25 simulated hours
    warmup_s: float = 3_600.0     # statistics exclude the first hour
    trace: bool = False

    def __post_init__(self):
        if not 0.0 <= self.warmup_s < self.horizon_s:
            raise ParameterError(
                f"need 0 <= warmup_s < horizon_s, got {self.warmup_s} / {self.horizon_s}")

    @property
    def window_s(self) -> float:
        return self.horizon_s - self.warmup_s


@dataclass
class NodeState:
    """Post-run per-node trajectory: sorted arrivals, FIFO departures, and
    the creation stamp of each arriving packet."""

    node_id: str
    service_rate: float
    threshold: int
    arrive: np.ndarray
    depart: np.ndarray
    created: np.ndarray
    cluster: np.ndarray            # cluster index of each arrival
    source: Optional[np.ndarray] = None   # trace mode only
    pid: Optional[np.ndarray] = None      # trace mode only

    @property
    def arrivals_total(self) -> int:
        return int(self.arrive.size)

    def departures_by(self, t: float) -> int:
        return int(np.searchsorted(self.depart, t, side="right"))

    def in_system_at(self, t: float) -> int:
        return self.arrivals_total - self.departures_by(t)


@dataclass(frozen=True)
class NodeMetrics:
    mpd_s: float
    throughput_pps: float
    overflow_prob: float
    overflow_defined: bool
    mean_queue_len: float
    packets: int               # post-warm-up arrivals
    arrivals_total: int
    in_system_at_horizon: int
    cluster_throughput_pps: dict[int, float]


@dataclass(frozen=True)
class ClusterMetrics:
    e2e_delay_s: float
    throughput_pps: float      # measured at the cluster's entry queue
    packets: int               # completed post-warm-up packets
    entry_node: str


@dataclass(frozen=True)
class Packet:
    """Trace record: one packet's full hop history."""

    id: int
    source_id: str
    cluster_id: str
    created_at: float
    hops: tuple[tuple[str, float, float], ...]   # (node_id, t_arrive, t_depart)
    size_bytes: float


@dataclass
class ReplicationResult:
    day: int
    seed: int
    horizon_s: float
    warmup_s: float
    saturated: bool
    per_node: dict[str, NodeMetrics]
    per_cluster: dict[str, ClusterMetrics]
    overall_e2e_s: float
    overall_packets: int
    wall_s: float
    states: Optional[dict[str, NodeState]] = None
    trace: Optional[list[Packet]] = None


def source_emit(params: SourceParams, law: BulkSizeLaw, rng: np.random.Generator,
                horizon: float) -> np.ndarray:
    """Emission times of one source over [0, horizon), strictly increasing.

    Each cycle draws a burst size L, emits L packets (evenly spaced
    1/lambda_p apart, or after Exponential(1/lambda_p) gaps in poisson
    mode; either way the burst occupies L slots so the long-run rate is
    exactly K), then stays quiet for an OFF draw.  The source cold-starts
    in an OFF period; bursts cut by the horizon are emitted partially.
    """
    if not horizon > 0.0:
        raise ParameterError(f"horizon must be > 0, got {horizon}")
    lam_p = params.lambda_p
    # bursts longer than the horizon are equivalent once truncated
    span = horizon * lam_p
    cap = int(span + 6.0 * math.sqrt(span) + 64.0)
    cycle = params.on_mean + params.off_mean
    poisson = params.emission_mode == EMISSION_POISSON

    chunks: list[np.ndarray] = []
    t = float(sample(params.off_dist, rng))
    while t < horizon:
        want = int((horizon - t) / cycle * 1.25) + 16
        sizes = law.sample_array(rng, want)
        np.minimum(sizes, cap, out=sizes)
        offs = sample_array(params.off_dist, rng, want)
        first = _exclusive_cumsum_int(sizes)   # index of each burst's first packet
        # per-packet increments; a burst's first packet also absorbs the OFF
        # period that precedes it (a burst occupies one slot/gap per packet,
        # so the long-run rate is exactly K)
        if poisson:
            inc = rng.exponential(1.0 / lam_p, int(sizes.sum()))
        else:
            inc = np.full(int(sizes.sum()), 1.0 / lam_p)
        inc[first[1:]] += offs[:-1]
        if not poisson:
            inc[0] = 0.0      # constant-rate bursts begin with a packet
        emissions = np.cumsum(inc)
        emissions += t
        t = float(emissions[-1] + offs[-1] + (0.0 if poisson else 1.0 / lam_p))
        chunks.append(emissions)
    times = np.concatenate(chunks) if chunks else np.empty(0)
    return times[times < horizon]


def fifo_departures(arrive: np.ndarray, service: np.ndarray) -> np.ndarray:
    """Departure times of a FIFO single server fed the sorted ``arrive``
    stream with per-packet service times ``service``."""
    total = np.cumsum(service)
    slack = arrive - total + service          # a[i] - S[i-1]
    np.maximum.accumulate(slack, out=slack)   # max over j<=i of (a[j] - S[j-1])
    return slack + total


def packets_seen(arrive: np.ndarray, depart: np.ndarray) -> np.ndarray:
    """Packets already in system (queued + in service) found by each arrival."""
    return np.arange(arrive.size, dtype=np.int64) - np.searchsorted(
        depart, arrive, side="right")


def estimate_overflow(state: NodeState, warmup: float, horizon: float) -> tuple[float, bool]:
    """Fraction of post-warm-up arrivals finding >= threshold packets in the
    node.  Buffers are infinite; nothing is dropped.  With no measurable
    arrivals the probability is reported as 0 with a defined=False flag."""
    mask = state.created > warmup
    n = int(mask.sum())
    if n == 0:
        return 0.0, False
    seen = packets_seen(state.arrive, state.depart)
    hits = int(np.count_nonzero(seen[mask] >= state.threshold))
    return hits / n, True


def time_average_in_system(arrive: np.ndarray, depart: np.ndarray,
                           lo: float, hi: float) -> float:
    """Time-averaged number in system over the window (lo, hi]."""
    if arrive.size == 0 or hi <= lo:
        return 0.0
    overlap = np.minimum(depart, hi) - np.maximum(arrive, lo)
    np.clip(overlap, 0.0, None, out=overlap)
    return float(overlap.sum() / (hi - lo))


def run_replication(topo: TopologySpec, sources: Mapping[str, SourceParams],
                    config: RunConfig, seed: int, day: int = 0,
                    keep_states: bool = False) -> ReplicationResult:
    """Execute one replication and collect per-node / per-cluster metrics.

    ``sources`` maps cluster_id to the per-source parameters of that
    cluster (all sources of a cluster are identical).  Identical
    (topology, sources, config, seed) give bitwise-identical results.
    Offered load >= service rate anywhere is allowed but flagged
    ``saturated``.
    """
    t_start = time.perf_counter()
    issues = validate_topology(topo)
    if issues:
        raise ParameterError("invalid topology: " + "; ".join(issues))
    horizon, warmup = config.horizon_s, config.warmup_s
    clusters = list(topo.clusters)
    cluster_index = {c.cluster_id: i for i, c in enumerate(clusters)}

    # per-cluster merged emission streams
    emissions: dict[str, dict] = {}
    for ci, cluster in enumerate(clusters):
        streams = []
        payloads = []
        params = sources[cluster.cluster_id] if cluster.n_sources else None
        law = bulk_law_for(params) if params is not None else None
        for si in range(cluster.n_sources):
            rng = substream(derive_seed(seed, _SRC_TAG, ci, si))
            times = source_emit(params, law, rng, horizon)
            streams.append(times)
            if config.trace:
                payloads.append({
                    "source": np.full(times.size, si, dtype=np.int32),
                    "pid": np.arange(times.size, dtype=np.int64),
                })
        emissions[cluster.cluster_id] = _merge_streams(streams, payloads if config.trace else None)

    saturated = False
    states: dict[str, NodeState] = {}
    consumed: set[str] = set()
    metrics: dict[str, NodeMetrics] = {}
    for node in topo.queue_nodes():
        inputs: list[dict] = []
        for child_id in topo.children_of(node.node_id):
            child = topo.node(child_id)
            if child.role not in (ROLE_RELAY, ROLE_SINK):
                continue
            st = states[child_id]
            mask = st.depart <= horizon    # later departures never reach the parent
            entry = {"times": st.depart[mask], "created": st.created[mask],
                     "cluster": st.cluster[mask]}
            if config.trace:
                entry["source"] = st.source[mask]
                entry["pid"] = st.pid[mask]
            inputs.append(entry)
            consumed.add(child_id)
        for cluster in topo.clusters_at(node.node_id):
            em = emissions[cluster.cluster_id]
            entry = {"times": em["times"], "created": em["times"],
                     "cluster": np.full(em["times"].size, cluster_index[cluster.cluster_id],
                                        dtype=np.int16)}
            if config.trace:
                entry["source"] = em["source"]
                entry["pid"] = em["pid"]
            inputs.append(entry)

        merged = _merge_inputs(inputs)
        arrive = merged.pop("times")
        svc_rng = substream(derive_seed(seed, _SVC_TAG, fnv1a64(node.node_id)))
        service = svc_rng.exponential(1.0 / node.service_rate, arrive.size)
        depart = fifo_departures(arrive, service)
        del service
        state = NodeState(node_id=node.node_id, service_rate=node.service_rate,
                          threshold=node.threshold, arrive=arrive, depart=depart,
                          created=merged["created"], cluster=merged["cluster"],
                          source=merged.get("source"), pid=merged.get("pid"))
        states[node.node_id] = state
        metrics[node.node_id] = _node_metrics(state, warmup, horizon, len(clusters))
        if topo.offered_load(node.node_id) >= node.service_rate * (1.0 - 1e-12):
            saturated = True
        if not keep_states and not config.trace:
            for child_id in list(consumed):
                if child_id in states and child_id != node.node_id:
                    states[child_id] = None  # type: ignore[assignment]
            states = {k: v for k, v in states.items() if v is not None}

    per_cluster, overall_e2e, overall_n = _cluster_metrics(
        topo, clusters, states.get(topo.sink_id), metrics, warmup, horizon)

    trace_rows = None
    if config.trace:
        trace_rows = _assemble_trace(topo, clusters, states, seed)

    return ReplicationResult(
        day=day, seed=seed, horizon_s=horizon, warmup_s=warmup,
        saturated=saturated, per_node=metrics, per_cluster=per_cluster,
        overall_e2e_s=overall_e2e, overall_packets=overall_n,
        wall_s=time.perf_counter() - t_start,
        states=states if (keep_states or config.trace) else None,
        trace=trace_rows)


def _node_metrics(state: NodeState, warmup: float, horizon: float,
                  n_clusters: int) -> NodeMetrics:
    created_mask = state.created > warmup
    window = horizon - warmup
    in_window = state.arrive > warmup   # arrivals never exceed the horizon
    throughput = float(np.count_nonzero(in_window) / window)

    measured = created_mask & (state.depart <= horizon)
    if measured.any():
        mpd = float(np.mean(state.depart[measured] - state.arrive[measured]))
    else:
        mpd = 0.0
    overflow, defined = estimate_overflow(state, warmup, horizon)
    queue_len = time_average_in_system(state.arrive, state.depart, warmup, horizon)

    per_cluster_counts = np.bincount(state.cluster[in_window], minlength=n_clusters)
    cluster_thr = {ci: float(c / window) for ci, c in enumerate(per_cluster_counts)}
    return NodeMetrics(
        mpd_s=mpd, throughput_pps=throughput, overflow_prob=overflow,
        overflow_defined=defined, mean_queue_len=queue_len,
        packets=int(created_mask.sum()), arrivals_total=state.arrivals_total,
        in_system_at_horizon=state.in_system_at(horizon),
        cluster_throughput_pps=cluster_thr)


def _cluster_metrics(topo, clusters, sink_state, node_metrics, warmup, horizon):
    per_cluster: dict[str, ClusterMetrics] = {}
    overall_e2e, overall_n = 0.0, 0
    if sink_state is not None and sink_state.arrive.size:
        measured = (sink_state.created > warmup) & (sink_state.depart <= horizon)
        e2e = sink_state.depart[measured] - sink_state.created[measured]
        idx = sink_state.cluster[measured]
        sums = np.bincount(idx, weights=e2e, minlength=len(clusters))
        counts = np.bincount(idx, minlength=len(clusters))
        overall_n = int(counts.sum())
        overall_e2e = float(sums.sum() / overall_n) if overall_n else 0.0
    else:
        sums = np.zeros(len(clusters))
        counts = np.zeros(len(clusters), dtype=np.int64)
    for ci, cluster in enumerate(clusters):
        entry = cluster.attach
        thr = node_metrics[entry].cluster_throughput_pps.get(ci, 0.0)
        n = int(counts[ci])
        per_cluster[cluster.cluster_id] = ClusterMetrics(
            e2e_delay_s=float(sums[ci] / n) if n else 0.0,
            throughput_pps=thr, packets=n, entry_node=entry)
    return per_cluster, overall_e2e, overall_n


def collect_metrics(results: list[ReplicationResult]) -> "AggregatedReport":
    """Aggregate replications: the per-day rows are preserved (the
    day-to-day fluctuation view) and every metric gets mean/min/max and
    coefficient of variation across days."""
    if not results:
        raise ParameterError("collect_metrics needs at least one replication")
    days: list[DayRow] = []
    for res in results:
        for node_id, nm in res.per_node.items():
            days.append(DayRow(day=res.day, entity=node_id, metrics={
                "mpd_s": nm.mpd_s, "throughput_pps": nm.throughput_pps,
                "overflow_prob": nm.overflow_prob,
                "mean_queue_len": nm.mean_queue_len, "packets": float(nm.packets)}))
        for cluster_id, cm in res.per_cluster.items():
            days.append(DayRow(day=res.day, entity=cluster_id, metrics={
                "e2e_delay_s": cm.e2e_delay_s, "throughput_pps": cm.throughput_pps,
                "packets": float(cm.packets)}))
    summary: dict[str, dict[str, Stat]] = {}
    entities = {row.entity for row in days}
    for entity in sorted(entities):
        rows = [r for r in days if r.entity == entity]
        metric_names = rows[0].metrics.keys()
        summary[entity] = {name: _stat([r.metrics[name] for r in rows])
                           for name in metric_names}
    return AggregatedReport(days=days, summary=summary)


@dataclass(frozen=True)
class DayRow:
    day: int
    entity: str
    metrics: dict[str, float]


@dataclass(frozen=True)
class Stat:
    mean: float
    min: float
    max: float
    cv: float


@dataclass(frozen=True)
class AggregatedReport:
    days: list[DayRow]
    summary: dict[str, dict[str, Stat]]


def _stat(values: list[float]) -> Stat:
    arr = np.asarray(values, dtype=float)
    mean = float(arr.mean())
    std = float(arr.std())   # population; a single day has zero spread
    return Stat(mean=mean, min=float(arr.min()), max=float(arr.max()),
                cv=std / abs(mean) if mean != 0.0 else 0.0)


def _exclusive_cumsum(x: np.ndarray) -> np.ndarray:
    out = np.empty(x.size, dtype=float)
    out[0] = 0.0
    np.cumsum(x[:-1], out=out[1:])
    return out


def _exclusive_cumsum_int(x: np.ndarray) -> np.ndarray:
    out = np.empty(x.size, dtype=np.int64)
    out[0] = 0
    np.cumsum(x[:-1], out=out[1:])
    return out


def _merge_streams(streams: list[np.ndarray], payloads: Optional[list[dict]]) -> dict:
    """Merge per-source emission streams of one cluster into one sorted
    stream.  Ties keep source order (stable)."""
    if not streams:
        out = {"times": np.empty(0)}
        if payloads is not None:
            out["source"] = np.empty(0, dtype=np.int32)
            out["pid"] = np.empty(0, dtype=np.int64)
        return out
    entries = []
    for i, times in enumerate(streams):
        entry = {"times": times}
        if payloads is not None:
            entry.update(payloads[i])
        entries.append(entry)
    return _merge_inputs(entries)


def _merge_inputs(inputs: list[dict]) -> dict:
    """Fold sorted input streams into one sorted stream, stable across the
    given input order (the simultaneous-event tie-break)."""
    if not inputs:
        return {"times": np.empty(0), "created": np.empty(0),
                "cluster": np.empty(0, dtype=np.int16)}
    merged = inputs[0]
    for nxt in inputs[1:]:
        merged = _merge_two(merged, nxt)
    return merged


def _merge_two(a: dict, b: dict) -> dict:
    """Linear-time stable merge of two sorted streams (a wins ties)."""
    ta, tb = a["times"], b["times"]
    n, m = ta.size, tb.size
    if m == 0:
        return a
    if n == 0:
        return b
    pos_a = np.searchsorted(tb, ta, side="left") + np.arange(n, dtype=np.int64)
    pos_b = np.searchsorted(ta, tb, side="right") + np.arange(m, dtype=np.int64)
    out: dict = {}
    for key in a:
        dest = np.empty(n + m, dtype=a[key].dtype)
        dest[pos_a] = a[key]
        dest[pos_b] = b[key]
        out[key] = dest
    return out


def _assemble_trace(topo: TopologySpec, clusters, states: dict[str, NodeState],
                    seed: int) -> list[Packet]:
    """Reconstruct per-packet hop histories (small runs only)."""
    hops: dict[tuple[int, int, int], list[tuple[str, float, float]]] = {}
    created_at: dict[tuple[int, int, int], float] = {}
    for node in topo.queue_nodes():
        st = states.get(node.node_id)
        if st is None or st.source is None:
            continue
        for i in range(st.arrive.size):
            key = (int(st.cluster[i]), int(st.source[i]), int(st.pid[i]))
            hops.setdefault(key, []).append(
                (node.node_id, float(st.arrive[i]), float(st.depart[i])))
            created_at[key] = float(st.created[i])
    size_rngs: dict[tuple[int, int], np.random.Generator] = {}
    sizes: dict[tuple[int, int], np.ndarray] = {}
    packets = []
    for key in sorted(hops):
        ci, si, pid = key
        if (ci, si) not in sizes:
            rng = substream(derive_seed(seed, _SIZE_TAG, ci, si))
            count = max(p for c, s, p in hops if (c, s) == (ci, si)) + 1
            sizes[(ci, si)] = rng.exponential(MEAN_PACKET_BYTES, count)
        packets.append(Packet(
            id=pid, source_id=f"c{ci + 1}s{si}",
            cluster_id=clusters[ci].cluster_id,
            created_at=created_at[key],
            hops=tuple(sorted(hops[key], key=lambda h: h[1])),
            size_bytes=float(sizes[(ci, si)][pid])))
    return packets


def write_trace_csv(packets: list[Packet], path) -> None:
    """Per-packet trace dump: one row per hop."""
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["packet_id", "source_id", "cluster_id", "created_at",
                         "hop_node", "arrive", "depart", "size_bytes"])
        for p in packets:
            for node_id, t_arr, t_dep in p.hops:
                writer.writerow([p.id, p.source_id, p.cluster_id,
                                 repr(p.created_at), node_id,
                                 repr(t_arr), repr(t_dep), repr(p.size_bytes)])
