"""Deadline-aware admission control driven by a predicted delay distribution.

On every network entry the controller predicts the delay mixture from the
observed queue lengths, computes the probability of missing the end-to-end
deadline, and drops the packet when that probability reaches the threshold.
The experiment runner replays the identical arrival stream with and without
the controller so throughput effects are directly comparable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

from . import mixstats
from .mdn import as_predictor
from .netsim import NetworkSpec, simulate_detailed

__all__ = [
    "AdmissionPolicy",
    "AdmissionDecision",
    "PacketOutcome",
    "ThroughputReport",
    "admit",
    "run_admission_experiment",
    "write_report",
    "write_packet_log",
]


@dataclass
class AdmissionPolicy:
    """Drop a packet when P(delay > deadline) >= drop_threshold at entry."""

    predictor: object  # MdnModel or callable b -> GaussianMixture
    deadline: float = 80.0
    drop_threshold: float = 0.95

    def __post_init__(self):
        if not self.deadline > 0.0:
            raise ValueError("deadline must be > 0")
        if not 0.0 < self.drop_threshold <= 1.0:
            raise ValueError("drop_threshold must lie in (0, 1]")
        self._predict = as_predictor(self.predictor)
        self._cache: dict[tuple[int, ...], tuple[bool, float]] = {}

    def decide(self, b: tuple[int, ...]) -> tuple[bool, float]:
        """(admit?, miss probability); memoized on the integer vector b."""
        hit = self._cache.get(b)
        if hit is None:
            p_miss = 1.0 - mixstats.cdf(self._predict(b), self.deadline)
            hit = (p_miss < self.drop_threshold, p_miss)
            self._cache[b] = hit
        return hit


@dataclass(frozen=True)
class AdmissionDecision:
    admit: bool
    p_miss: float


def admit(policy: AdmissionPolicy, b: Sequence[int]) -> AdmissionDecision:
    """Evaluate the policy for one queue-length observation."""
    ok, p_miss = policy.decide(tuple(int(x) for x in b))
    return AdmissionDecision(admit=ok, p_miss=p_miss)


@dataclass(frozen=True)
class PacketOutcome:
    id: int
    arrival_time: float
    b: tuple[int, ...]
    path_id: int
    admitted: bool
    delay: float  # nan when the packet was dropped


@dataclass
class ThroughputReport:
    """Deadline throughput of one run; dropped packets count as failures."""

    deadline: float
    offered: int
    admitted: int
    dropped: int
    delivered_in_deadline: int
    log: list[PacketOutcome] = field(repr=False, default_factory=list)

    @property
    def throughput(self) -> float:
        return self.delivered_in_deadline / self.offered if self.offered else 0.0

    def validate(self) -> None:
        assert self.offered == self.admitted + self.dropped
        assert self.delivered_in_deadline <= self.admitted <= self.offered


def _build_report(result, deadline: float, warmup: int) -> ThroughputReport:
    outcomes = []
    for rec in result.records:
        outcomes.append(
            PacketOutcome(rec.id, rec.arrival_time, rec.b, rec.path_id, True, rec.delay)
        )
    for drop in result.dropped:
        if drop.id >= warmup:
            outcomes.append(
                PacketOutcome(drop.id, drop.arrival_time, drop.b, drop.path_id, False, math.nan)
            )
    outcomes.sort(key=lambda o: o.id)
    admitted = sum(1 for o in outcomes if o.admitted)
    delivered = sum(1 for o in outcomes if o.admitted and o.delay <= deadline)
    report = ThroughputReport(
        deadline=deadline,
        offered=len(outcomes),
        admitted=admitted,
        dropped=len(outcomes) - admitted,
        delivered_in_deadline=delivered,
        log=outcomes,
    )
    report.validate()
    return report


def run_admission_experiment(
    spec: NetworkSpec,
    policy: AdmissionPolicy,
    horizon: int,
    seed: int = 0,
    warmup: Optional[int] = None,
) -> tuple[ThroughputReport, ThroughputReport]:
    """(baseline report, controlled report) over the same arrival stream.

    The gate acts from time zero so the controlled system's state reflects
    the policy throughout, but both reports count post-warmup packets only.
    """
    if warmup is None:
        warmup = horizon // 10
    baseline = simulate_detailed(spec, horizon, warmup, seed)

    def gate(b: tuple[int, ...], _t: float, _cid: int) -> bool:
        return policy.decide(b)[0]

    controlled = simulate_detailed(spec, horizon, warmup, seed, gate=gate)
    return (
        _build_report(baseline, policy.deadline, warmup),
        _build_report(controlled, policy.deadline, warmup),
    )


def write_report(report: ThroughputReport, path) -> None:
    with open(path, "w") as fh:
        fh.write("# admission throughput report\n")
        fh.write(f"deadline {report.deadline!r}\n")
        fh.write(f"offered {report.offered}\n")
        fh.write(f"admitted {report.admitted}\n")
        fh.write(f"dropped {report.dropped}\n")
        fh.write(f"delivered_in_deadline {report.delivered_in_deadline}\n")
        fh.write(f"throughput {report.throughput!r}\n")


def write_packet_log(report: ThroughputReport, path) -> None:
    """Dataset-format per-packet log with an extra admission decision column."""
    if report.log:
        num_stages = len(report.log[0].b)
    else:
        num_stages = 0
    cols = ["arrival_time"] + [f"b{i + 1}" for i in range(num_stages)]
    cols += ["path_id", "decision", "delay"]
    with open(path, "w") as fh:
        fh.write("# per-packet admission log; delay is nan for dropped packets\n")
        fh.write(",".join(cols) + "\n")
        for o in report.log:
            fields = [repr(o.arrival_time)]
            fields += [str(x) for x in o.b]
            fields += [str(o.path_id), "admit" if o.admitted else "drop", repr(o.delay)]
            fh.write(",".join(fields) + "\n")
