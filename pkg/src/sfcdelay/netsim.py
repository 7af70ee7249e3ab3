"""Discrete-event simulation of open networks of multi-server FCFS queues.

Stages are multi-server stations with infinite buffers; customers enter at a
single ingress, walk a (possibly branching) acyclic route, and leave from a
sink. Each completed customer yields one record holding the queue-length
vector it saw on entry and its end-to-end delay, the raw material for both
training and evaluating delay predictors.

Time is normalized so the ingress stage's aggregate service rate is 1; the
four catalog topologies ship with that normalization built in.
"""

from __future__ import annotations

import heapq
import json
import math
import random
import warnings
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

__all__ = [
    "ConfigError",
    "UnknownTopologyError",
    "DatasetFormatError",
    "RunawayQueueError",
    "ServiceModel",
    "StageSpec",
    "RoutingDag",
    "GammaRenewal",
    "Nhpp",
    "Mmpp",
    "ArrivalModel",
    "NetworkSpec",
    "CustomerRecord",
    "SimulationResult",
    "DroppedCustomer",
    "ArrivalProcess",
    "TOPOLOGY_PRESETS",
    "build_topology",
    "sample_interarrival",
    "run_simulation",
    "simulate_detailed",
    "run_replications",
    "write_dataset",
    "read_dataset",
]

DEFAULT_QUEUE_CAP = 1_000_000


class ConfigError(ValueError):
    """A network or arrival configuration violates one of its invariants."""


class UnknownTopologyError(ConfigError):
    """Topology name is neither a catalog preset nor a readable config file."""


class DatasetFormatError(ValueError):
    """Malformed dataset file; ``line`` is the offending 1-based line number."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class RunawayQueueError(RuntimeError):
    """A buffer blew past the runaway cap; the configuration is likely unstable."""


# ---------------------------------------------------------------------------
# Domain types

@dataclass(frozen=True)
class ServiceModel:
    """Service-time distribution of one stage: Gamma or Exponential."""

    family: str  # "gamma" | "exponential"
    mean: float  # 1 / mu_n, in normalized time units
    scv: float = 1.0  # squared coefficient of variation

    def __post_init__(self):
        if self.family not in ("gamma", "exponential"):
            raise ConfigError(f"unknown service family {self.family!r}")
        if not self.mean > 0.0:
            raise ConfigError("service mean must be > 0")
        if not self.scv > 0.0:
            raise ConfigError("service scv must be > 0")
        if self.family == "exponential" and abs(self.scv - 1.0) > 1e-12:
            raise ConfigError("exponential service requires scv == 1")

    @property
    def rate(self) -> float:
        return 1.0 / self.mean

    @property
    def variance(self) -> float:
        return self.scv * self.mean * self.mean


@dataclass(frozen=True)
class StageSpec:
    """One queueing stage: server count plus its service-time model."""

    servers: int
    service: ServiceModel

    def __post_init__(self):
        if not (isinstance(self.servers, int) and self.servers >= 1):
            raise ConfigError("servers must be an integer >= 1")

    @property
    def rate(self) -> float:
        return self.service.rate


@dataclass(frozen=True)
class GammaRenewal:
    """Renewal arrivals with Gamma gaps; scv = 1 is the Poisson special case."""

    rate: float
    scv: float = 1.0

    def __post_init__(self):
        if not self.rate > 0.0:
            raise ConfigError("arrival rate must be > 0")
        if not self.scv > 0.0:
            raise ConfigError("arrival scv must be > 0")


@dataclass(frozen=True)
class Nhpp:
    """Poisson arrivals with sinusoidal rate mean_rate*(1 + a*sin(2*pi*t/T))."""

    mean_rate: float
    relative_amplitude: float
    period: float

    def __post_init__(self):
        if not self.mean_rate > 0.0:
            raise ConfigError("mean_rate must be > 0")
        if not 0.0 <= self.relative_amplitude < 1.0:
            raise ConfigError("relative_amplitude must lie in [0, 1)")
        if not self.period > 0.0:
            raise ConfigError("period must be > 0")

    def rate_at(self, t: float) -> float:
        return self.mean_rate * (
            1.0 + self.relative_amplitude * math.sin(2.0 * math.pi * t / self.period)
        )


@dataclass(frozen=True)
class Mmpp:
    """Markov-modulated Poisson arrivals: on/off chain stepped once per time unit.

    The off state emits nothing; the on-state rate is mean_rate divided by the
    chain's stationary on-probability, so the long-run rate equals mean_rate.
    """

    mean_rate: float
    p_on_to_off: float
    p_off_to_on: float

    def __post_init__(self):
        if not self.mean_rate > 0.0:
            raise ConfigError("mean_rate must be > 0")
        for name in ("p_on_to_off", "p_off_to_on"):
            p = getattr(self, name)
            if not 0.0 < p < 1.0:
                raise ConfigError(f"{name} must lie in (0, 1)")

    @property
    def stationary_on(self) -> float:
        return self.p_off_to_on / (self.p_on_to_off + self.p_off_to_on)

    @property
    def on_rate(self) -> float:
        return self.mean_rate / self.stationary_on


ArrivalModel = Union[GammaRenewal, Nhpp, Mmpp]


@dataclass(frozen=True)
class RoutingDag:
    """Acyclic routing graph: (from, to, probability) edges over stage indices.

    A tandem network is the single-chain special case with all probabilities 1.
    """

    nodes: tuple[int, ...]
    edges: tuple[tuple[int, int, float], ...]
    source: int
    sinks: tuple[int, ...]

    def __post_init__(self):
        n = len(self.nodes)
        if set(self.nodes) != set(range(n)):
            raise ConfigError("routing nodes must be the stage indices 0..N-1")
        out: dict[int, list[tuple[int, float]]] = {i: [] for i in self.nodes}
        for frm, to, p in self.edges:
            if frm not in out or to not in out:
                raise ConfigError(f"edge ({frm}, {to}) references an unknown node")
            if not 0.0 < p <= 1.0:
                raise ConfigError(f"edge ({frm}, {to}) probability {p} outside (0, 1]")
            out[frm].append((to, p))
        for node, succ in out.items():
            if succ:
                total = math.fsum(p for _, p in succ)
                if abs(total - 1.0) > 1e-9:
                    raise ConfigError(
                        f"outgoing probabilities of node {node} sum to {total!r}, expected 1"
                    )
        terminal = {node for node, succ in out.items() if not succ}
        if set(self.sinks) != terminal:
            raise ConfigError(
                f"declared sinks {sorted(self.sinks)} do not match terminal nodes {sorted(terminal)}"
            )
        # acyclicity and reachability in one DFS from the source; a single
        # stage (source == sink, no edges) is a valid degenerate network
        seen: set[int] = set()
        onstack: set[int] = set()

        def visit(node: int):
            seen.add(node)
            onstack.add(node)
            for to, _ in out[node]:
                if to in onstack:
                    raise ConfigError("routing graph contains a cycle")
                if to not in seen:
                    visit(to)
            onstack.discard(node)

        visit(self.source)
        if seen != set(self.nodes):
            missing = sorted(set(self.nodes) - seen)
            raise ConfigError(f"nodes {missing} unreachable from source {self.source}")

    def out_edges(self, node: int) -> list[tuple[int, float]]:
        return [(to, p) for frm, to, p in self.edges if frm == node]

    def enumerate_paths(self) -> list[tuple[tuple[int, ...], float]]:
        """All source->sink walks with their branch-probability products.

        Order is deterministic: depth-first following edge declaration order.
        """
        sinks = set(self.sinks)
        paths: list[tuple[tuple[int, ...], float]] = []

        def walk(node: int, prefix: list[int], prob: float):
            if node in sinks:
                paths.append((tuple(prefix), prob))
                return
            for to, p in self.out_edges(node):
                walk(to, prefix + [to], prob * p)

        walk(self.source, [self.source], 1.0)
        return paths

    @staticmethod
    def tandem(num_stages: int) -> "RoutingDag":
        edges = tuple((i, i + 1, 1.0) for i in range(num_stages - 1))
        return RoutingDag(
            nodes=tuple(range(num_stages)),
            edges=edges,
            source=0,
            sinks=(num_stages - 1,),
        )


@dataclass(frozen=True)
class NetworkSpec:
    """Ground truth the simulator executes: stages, routing, arrival model."""

    stages: tuple[StageSpec, ...]
    routing: RoutingDag
    arrivals: ArrivalModel

    def __post_init__(self):
        if not self.stages:
            raise ConfigError("network needs at least one stage")
        if len(self.stages) != len(self.routing.nodes):
            raise ConfigError(
                f"{len(self.stages)} stages but routing declares {len(self.routing.nodes)} nodes"
            )
        ingress = self.stages[self.routing.source]
        agg = ingress.servers * ingress.rate
        if abs(agg - 1.0) > 0.02:
            warnings.warn(
                f"ingress aggregate service rate c*mu = {agg:.4f}; times are "
                "conventionally normalized so it equals 1",
                stacklevel=2,
            )

    @property
    def num_stages(self) -> int:
        return len(self.stages)

    def paths(self) -> list[tuple[tuple[int, ...], float]]:
        return self.routing.enumerate_paths()


@dataclass(frozen=True)
class CustomerRecord:
    """One observation: entry snapshot, route taken, and realized delay."""

    id: int
    arrival_time: float
    b: tuple[int, ...]
    path: tuple[int, ...]
    path_id: int
    stage_sojourns: tuple[float, ...]
    delay: float


@dataclass(frozen=True)
class DroppedCustomer:
    """An arrival the admission gate refused; it never entered any queue."""

    id: int
    arrival_time: float
    b: tuple[int, ...]
    path_id: int


@dataclass
class SimulationResult:
    """Records plus bookkeeping needed by the CLI and the admission experiment."""

    records: list[CustomerRecord]
    dropped: list[DroppedCustomer]
    stage_arrivals: list[int]
    stage_departures: list[int]
    stage_busy_time: list[float]
    makespan: float
    horizon: int
    warmup: int


# ---------------------------------------------------------------------------
# Topology catalog

def _gamma_stage(servers: int, rate: float, scv: float = 0.8) -> StageSpec:
    return StageSpec(servers, ServiceModel("gamma", 1.0 / rate, scv))


def _tandem1() -> NetworkSpec:
    rates = [0.2, 1.0 / 3.0, 0.5]
    return NetworkSpec(
        stages=tuple(_gamma_stage(c, r) for c, r in zip([5, 3, 2], rates)),
        routing=RoutingDag.tandem(3),
        arrivals=GammaRenewal(rate=0.95, scv=0.7),
    )


def _tandem2() -> NetworkSpec:
    r = 1.0 / 3.0
    return NetworkSpec(
        stages=tuple(_gamma_stage(c, r) for c in [3, 3, 5, 5, 4, 4]),
        routing=RoutingDag.tandem(6),
        arrivals=Nhpp(mean_rate=0.95, relative_amplitude=0.5, period=144.0),
    )


def _acyclic1() -> NetworkSpec:
    # Fork after the ingress into two parallel branches that rejoin at the
    # egress. The branch split is not published for this catalog entry; an
    # even split is the default and user configs may override it.
    rates = [0.2, 2.0 / 9.0, 1.0 / 9.0, 0.5]
    routing = RoutingDag(
        nodes=(0, 1, 2, 3),
        edges=((0, 1, 0.5), (0, 2, 0.5), (1, 3, 1.0), (2, 3, 1.0)),
        source=0,
        sinks=(3,),
    )
    return NetworkSpec(
        stages=tuple(_gamma_stage(c, r) for c, r in zip([5, 3, 3, 2], rates)),
        routing=routing,
        arrivals=GammaRenewal(rate=0.95, scv=0.7),
    )


def _acyclic2() -> NetworkSpec:
    rates = [1.0, 4.0 / 9.0, 1.0 / 3.0, 2.0 / 9.0, 1.0]
    routing = RoutingDag(
        nodes=(0, 1, 2, 3, 4),
        edges=(
            (0, 1, 4.0 / 9.0),
            (0, 2, 1.0 / 3.0),
            (0, 3, 2.0 / 9.0),
            (1, 4, 1.0),
            (2, 4, 1.0),
            (3, 4, 1.0),
        ),
        source=0,
        sinks=(4,),
    )
    return NetworkSpec(
        stages=tuple(_gamma_stage(1, r) for r in rates),
        routing=routing,
        arrivals=Mmpp(mean_rate=0.95, p_on_to_off=0.4, p_off_to_on=0.1),
    )


TOPOLOGY_PRESETS: dict[str, Callable[[], NetworkSpec]] = {
    "tandem1": _tandem1,
    "tandem2": _tandem2,
    "acyclic1": _acyclic1,
    "acyclic2": _acyclic2,
}


def build_topology(name: str) -> NetworkSpec:
    """Resolve a catalog preset name or a JSON config file into a NetworkSpec."""
    if name in TOPOLOGY_PRESETS:
        return TOPOLOGY_PRESETS[name]()
    try:
        with open(name) as fh:
            raw = fh.read()
    except OSError:
        raise UnknownTopologyError(
            f"unknown topology {name!r}; presets are {sorted(TOPOLOGY_PRESETS)} "
            "(or pass a config file path)"
        ) from None
    return _spec_from_config(raw, name)


def _spec_from_config(raw: str, origin: str) -> NetworkSpec:
    try:
        cfg = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{origin}: not valid JSON ({exc})") from None
    try:
        servers = [int(c) for c in cfg["servers"]]
        rates = [float(r) for r in cfg["service_rates"]]
    except KeyError as exc:
        raise ConfigError(f"{origin}: missing required key {exc}") from None
    if len(servers) != len(rates):
        raise ConfigError(f"{origin}: servers and service_rates lengths differ")
    scv = cfg.get("service_scv", 1.0)
    scvs = [float(s) for s in scv] if isinstance(scv, list) else [float(scv)] * len(servers)
    if len(scvs) != len(servers):
        raise ConfigError(f"{origin}: service_scv list length mismatch")
    family = cfg.get("service_family", "gamma")
    stages = tuple(
        StageSpec(c, ServiceModel(family, 1.0 / r, s))
        for c, r, s in zip(servers, rates, scvs)
    )
    if "edges" in cfg:
        edges = tuple((int(f), int(t), float(p)) for f, t, p in cfg["edges"])
        routing = RoutingDag(
            nodes=tuple(range(len(servers))),
            edges=edges,
            source=int(cfg.get("source", 0)),
            sinks=tuple(int(s) for s in cfg.get("sinks", [len(servers) - 1])),
        )
    else:
        routing = RoutingDag.tandem(len(servers))
    arr = cfg.get("arrival")
    if not isinstance(arr, dict) or "kind" not in arr:
        raise ConfigError(f"{origin}: arrival must be an object with a 'kind'")
    kind = arr["kind"]
    try:
        if kind == "gamma":
            arrivals: ArrivalModel = GammaRenewal(float(arr["rate"]), float(arr.get("scv", 1.0)))
        elif kind == "nhpp":
            arrivals = Nhpp(
                float(arr["mean_rate"]),
                float(arr["relative_amplitude"]),
                float(arr["period"]),
            )
        elif kind == "mmpp":
            arrivals = Mmpp(
                float(arr["mean_rate"]),
                float(arr["p_on_to_off"]),
                float(arr["p_off_to_on"]),
            )
        else:
            raise ConfigError(f"{origin}: unknown arrival kind {kind!r}")
    except KeyError as exc:
        raise ConfigError(f"{origin}: arrival missing key {exc}") from None
    return NetworkSpec(stages=stages, routing=routing, arrivals=arrivals)


# ---------------------------------------------------------------------------
# Arrival sampling

class ArrivalProcess:
    """Stateful generator of successive interarrival gaps for one replication.

    Gamma-renewal and sinusoidal-Poisson gaps depend only on the current time;
    the Markov-modulated model additionally carries its on/off chain, extended
    lazily one unit-time slot at a time.
    """

    def __init__(self, model: ArrivalModel, rng: random.Random):
        self.model = model
        self.rng = rng
        if isinstance(model, Mmpp):
            # stationary start so the process has no transient
            self._slots = [rng.random() < model.stationary_on]

    def _slot_state(self, k: int) -> bool:
        slots = self._slots
        model, rng = self.model, self.rng
        while len(slots) <= k:
            if slots[-1]:
                slots.append(rng.random() >= model.p_on_to_off)
            else:
                slots.append(rng.random() < model.p_off_to_on)
        return slots[k]

    def next_gap(self, now: float) -> float:
        model = self.model
        rng = self.rng
        if isinstance(model, GammaRenewal):
            if model.scv == 1.0:
                return rng.expovariate(model.rate)
            shape = 1.0 / model.scv
            scale = model.scv / model.rate
            return rng.gammavariate(shape, scale)
        if isinstance(model, Nhpp):
            # thinning against the constant envelope mean_rate * (1 + amplitude)
            env = model.mean_rate * (1.0 + model.relative_amplitude)
            t = now
            while True:
                t += rng.expovariate(env)
                if rng.random() * env <= model.rate_at(t):
                    return t - now
        # Mmpp: walk unit slots; within an "on" slot arrivals are Poisson
        t = now
        while True:
            slot = int(t)
            if self._slot_state(slot):
                dt = rng.expovariate(model.on_rate)
                if t + dt < slot + 1.0:
                    return t + dt - now
            t = float(slot + 1)


def sample_interarrival(model: ArrivalModel, now: float, rng: random.Random) -> float:
    """One next-arrival gap from ``now``.

    For Markov-modulated arrivals this draws a fresh stationary modulating
    chain per call; use :class:`ArrivalProcess` when successive gaps must
    share one chain (as the simulator does).
    """
    if now < 0.0:
        raise ValueError("now must be >= 0")
    return ArrivalProcess(model, rng).next_gap(now)


def _service_sampler(model: ServiceModel, rng: random.Random) -> Callable[[], float]:
    if model.family == "exponential" or model.scv == 1.0:
        return lambda: rng.expovariate(model.rate)
    shape = 1.0 / model.scv
    scale = model.mean * model.scv
    return lambda: rng.gammavariate(shape, scale)


def _substream(seed: int, k: int) -> random.Random:
    # fixed integer mixing keeps streams reproducible across processes
    return random.Random((seed * 0x9E3779B97F4A7C15 + k) % (2**63))


# ---------------------------------------------------------------------------
# Event engine

class _Cust:
    __slots__ = ("id", "arrival_time", "b", "path", "path_id", "hop", "entry", "sojourns")

    def __init__(self, cid, t, b, path, path_id):
        self.id = cid
        self.arrival_time = t
        self.b = b
        self.path = path
        self.path_id = path_id
        self.hop = 0
        self.entry = t
        self.sojourns: list[float] = []


def _simulate_core(
    servers: Sequence[int],
    service_fns: Sequence[Callable[[], float]],
    gap_fn: Callable[[float], float],
    path_fn: Callable[[], tuple[tuple[int, ...], int]],
    horizon: int,
    warmup: int,
    queue_cap: int,
    gate: Optional[Callable[[tuple[int, ...], float, int], bool]] = None,
) -> SimulationResult:
    num_stages = len(servers)
    queues: list[deque] = [deque() for _ in range(num_stages)]
    busy = [0] * num_stages
    busy_time = [0.0] * num_stages
    st_arr = [0] * num_stages
    st_dep = [0] * num_stages
    records: list[CustomerRecord] = []
    dropped: list[DroppedCustomer] = []

    heap: list = []
    push = heapq.heappush
    pop = heapq.heappop
    seq = 0
    n_arrived = 0
    t_end = 0.0

    # stage == -1 marks a network arrival; otherwise a service completion
    push(heap, (gap_fn(0.0), seq, -1, None))
    seq += 1

    while heap:
        t, _, stage, cust = pop(heap)
        t_end = t
        if stage == -1:
            cid = n_arrived
            n_arrived += 1
            if n_arrived < horizon:
                push(heap, (t + gap_fn(t), seq, -1, None))
                seq += 1
            b = tuple(len(q) for q in queues)
            path, path_id = path_fn()
            if gate is not None and not gate(b, t, cid):
                dropped.append(DroppedCustomer(cid, t, b, path_id))
                continue
            cust = _Cust(cid, t, b, path, path_id)
            s = path[0]
            st_arr[s] += 1
            if busy[s] < servers[s]:
                busy[s] += 1
                d = service_fns[s]()
                busy_time[s] += d
                push(heap, (t + d, seq, s, cust))
                seq += 1
            else:
                q = queues[s]
                q.append(cust)
                if len(q) > queue_cap:
                    raise RunawayQueueError(
                        f"buffer of stage {s} exceeded {queue_cap} customers at t={t:.1f}"
                    )
        else:
            s = stage
            st_dep[s] += 1
            q = queues[s]
            if q:
                nxt = q.popleft()
                d = service_fns[s]()
                busy_time[s] += d
                push(heap, (t + d, seq, s, nxt))
                seq += 1
            else:
                busy[s] -= 1
            cust.sojourns.append(t - cust.entry)
            cust.hop += 1
            if cust.hop < len(cust.path):
                s2 = cust.path[cust.hop]
                st_arr[s2] += 1
                cust.entry = t
                if busy[s2] < servers[s2]:
                    busy[s2] += 1
                    d = service_fns[s2]()
                    busy_time[s2] += d
                    push(heap, (t + d, seq, s2, cust))
                    seq += 1
                else:
                    q2 = queues[s2]
                    q2.append(cust)
                    if len(q2) > queue_cap:
                        raise RunawayQueueError(
                            f"buffer of stage {s2} exceeded {queue_cap} customers at t={t:.1f}"
                        )
            elif cust.id >= warmup:
                records.append(
                    CustomerRecord(
                        id=cust.id,
                        arrival_time=cust.arrival_time,
                        b=cust.b,
                        path=cust.path,
                        path_id=cust.path_id,
                        stage_sojourns=tuple(cust.sojourns),
                        delay=t - cust.arrival_time,
                    )
                )

    return SimulationResult(
        records=records,
        dropped=dropped,
        stage_arrivals=st_arr,
        stage_departures=st_dep,
        stage_busy_time=busy_time,
        makespan=t_end,
        horizon=horizon,
        warmup=warmup,
    )


def _default_warmup(horizon: int) -> int:
    return horizon // 10


def simulate_detailed(
    spec: NetworkSpec,
    horizon: int,
    warmup: Optional[int] = None,
    seed: int = 0,
    queue_cap: int = DEFAULT_QUEUE_CAP,
    gate: Optional[Callable[[tuple[int, ...], float, int], bool]] = None,
) -> SimulationResult:
    """Run one replication and keep per-stage counters and any gated drops.

    The arrival stream (gaps, modulating chain, and route choices) draws from
    random substreams separate from the service times, so two runs of the same
    (spec, seed) that differ only in the admission gate see identical offered
    traffic.
    """
    if horizon <= 0:
        raise ValueError("horizon must be > 0")
    if warmup is None:
        warmup = _default_warmup(horizon)
    if not 0 <= warmup < horizon:
        raise ValueError("need horizon > warmup >= 0")

    arrival_rng = _substream(seed, 1)
    route_rng = _substream(seed, 2)
    process = ArrivalProcess(spec.arrivals, arrival_rng)

    paths = spec.paths()
    path_ids = {p: i for i, (p, _) in enumerate(paths)}
    out_edges = {node: spec.routing.out_edges(node) for node in spec.routing.nodes}
    sinks = set(spec.routing.sinks)
    source = spec.routing.source

    if len(paths) == 1:
        only = (paths[0][0], 0)

        def path_fn():
            return only

    else:

        def path_fn():
            node = source
            walk = [node]
            while node not in sinks:
                succ = out_edges[node]
                if len(succ) == 1:
                    node = succ[0][0]
                else:
                    u = route_rng.random()
                    acc = 0.0
                    node = succ[-1][0]
                    for to, p in succ:
                        acc += p
                        if u < acc:
                            node = to
                            break
                walk.append(node)
            tup = tuple(walk)
            return tup, path_ids[tup]

    service_fns = [
        _service_sampler(st.service, _substream(seed, 10 + i))
        for i, st in enumerate(spec.stages)
    ]
    return _simulate_core(
        servers=[st.servers for st in spec.stages],
        service_fns=service_fns,
        gap_fn=process.next_gap,
        path_fn=path_fn,
        horizon=horizon,
        warmup=warmup,
        queue_cap=queue_cap,
        gate=gate,
    )


def run_simulation(
    spec: NetworkSpec,
    horizon: int,
    warmup: Optional[int] = None,
    seed: int = 0,
    queue_cap: int = DEFAULT_QUEUE_CAP,
) -> list[CustomerRecord]:
    """Simulate ``horizon`` customers; return records for those after warmup.

    Identical (spec, horizon, warmup, seed) yields an identical record stream.
    Warmup defaults to 10% of the horizon.
    """
    return simulate_detailed(spec, horizon, warmup, seed, queue_cap).records


def _replicate(args) -> tuple[int, list[CustomerRecord]]:
    spec, horizon, warmup, seed, queue_cap = args
    return seed, run_simulation(spec, horizon, warmup, seed, queue_cap)


def run_replications(
    spec: NetworkSpec,
    horizon: int,
    seeds: Sequence[int],
    warmup: Optional[int] = None,
    queue_cap: int = DEFAULT_QUEUE_CAP,
    max_workers: Optional[int] = None,
) -> list[tuple[int, CustomerRecord]]:
    """Independent replications in parallel, merged and ordered by (seed, id)."""
    jobs = [(spec, horizon, warmup, seed, queue_cap) for seed in seeds]
    if max_workers == 1 or len(jobs) == 1:
        results = [_replicate(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=max_workers) as pool:
            results = list(pool.map(_replicate, jobs))
    merged = [(seed, rec) for seed, recs in results for rec in recs]
    merged.sort(key=lambda sr: (sr[0], sr[1].id))
    return merged


# ---------------------------------------------------------------------------
# Dataset files: columnar text, one row per customer.

def _header_columns(num_stages: int) -> list[str]:
    return ["arrival_time"] + [f"b{i + 1}" for i in range(num_stages)] + ["path_id", "delay"]


def write_dataset(records: Sequence[CustomerRecord], path) -> None:
    """Write records as columnar text: arrival_time, b_1..b_N, path_id, delay."""
    num_stages = len(records[0].b) if records else 0
    with open(path, "w") as fh:
        fh.write("# end-to-end delay dataset; one row per customer\n")
        fh.write(",".join(_header_columns(num_stages)) + "\n")
        for rec in records:
            if len(rec.b) != num_stages:
                raise ValueError("records disagree on stage count")
            fields = [repr(rec.arrival_time)]
            fields += [str(x) for x in rec.b]
            fields += [str(rec.path_id), repr(rec.delay)]
            fh.write(",".join(fields) + "\n")


def read_dataset(path) -> list[CustomerRecord]:
    """Read a dataset file back; ids are assigned by row order.

    Only the serialized fields (arrival_time, b, path_id, delay) are
    populated; per-stage sojourns and the expanded path are not stored in
    this format.
    """
    records: list[CustomerRecord] = []
    with open(path) as fh:
        header: Optional[list[str]] = None
        for lineno, line in enumerate(fh, start=1):
            body = line.strip()
            if not body or body.startswith("#"):
                continue
            if header is None:
                header = body.split(",")
                if (
                    len(header) < 3
                    or header[0] != "arrival_time"
                    or header[-2:] != ["path_id", "delay"]
                ):
                    raise DatasetFormatError(lineno, f"unrecognized header {body!r}")
                continue
            fields = body.split(",")
            if len(fields) != len(header):
                raise DatasetFormatError(
                    lineno, f"expected {len(header)} fields, got {len(fields)}"
                )
            try:
                arrival = float(fields[0])
                b = tuple(int(x) for x in fields[1:-2])
                path_id = int(fields[-2])
                delay = float(fields[-1])
            except ValueError:
                raise DatasetFormatError(lineno, f"non-numeric field in {body!r}") from None
            if any(x < 0 for x in b):
                raise DatasetFormatError(lineno, "queue lengths must be >= 0")
            if not delay > 0.0:
                raise DatasetFormatError(lineno, f"delay must be > 0, got {delay}")
            if path_id < 0:
                raise DatasetFormatError(lineno, "path_id must be >= 0")
            records.append(
                CustomerRecord(
                    id=len(records),
                    arrival_time=arrival,
                    b=b,
                    path=(),
                    path_id=path_id,
                    stage_sojourns=(),
                    delay=delay,
                )
            )
    if header is None:
        raise DatasetFormatError(1, "empty file: missing header row")
    return records
