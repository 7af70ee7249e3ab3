"""Closed-form approximation of the conditional end-to-end delay.

Given the queue-length vector b observed when a customer enters the network,
this module estimates the queue lengths the customer will actually encounter
at each successive stage (a heavy-traffic propagation), converts them into
conditional delay moments, and assembles one Gaussian component per route
into a mixture weighted by the branch probabilities.

All functions are pure; they are safe to call concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .mixstats import GaussianMixture
from .netsim import NetworkSpec, StageSpec

__all__ = [
    "DelayMoments",
    "propagate_queue_lengths",
    "delay_moments",
    "scv_bound",
    "gmm_approximation",
]

# guards against products like 3 * (1/3) * 12 landing just under an integer
_FLOOR_EPS = 1e-9


def _floor(x: float) -> int:
    return math.floor(x + _FLOOR_EPS)


@dataclass(frozen=True)
class DelayMoments:
    """Conditional mean and variance of the end-to-end delay along one path."""

    mean: float
    variance: float


def _check_path(stages: Sequence[StageSpec], q: Sequence[int], name: str = "b") -> None:
    if len(q) != len(stages):
        raise ValueError(f"{name} has length {len(q)}, path has {len(stages)} stages")
    if any(x < 0 for x in q):
        raise ValueError(f"{name} entries must be >= 0")


def propagate_queue_lengths(stages: Sequence[StageSpec], b: Sequence[int]) -> tuple[int, ...]:
    """Queue lengths the tagged customer meets at each stage of one path.

    Starting from the entry snapshot b, one update step is applied per hop:
    the stage being entered absorbs everything that was ahead of the customer
    upstream (queue plus occupied servers) and sheds floor(c*mu*T) departures,
    where T is the customer's estimated sojourn at the stage it just left;
    stages further downstream exchange floor(c*mu*T) departures likewise.
    Counts clamp at zero.
    """
    _check_path(stages, b)
    q = [int(x) for x in b]
    n = len(q)
    for tau in range(n - 1):
        cur = stages[tau]
        # estimated sojourn at the stage just left, from its updated queue
        sojourn = (q[tau] + 1) / (cur.servers * cur.rate) + 1.0 / cur.rate
        nxt = stages[tau + 1]
        q[tau + 1] = max(
            0, q[tau + 1] + q[tau] + cur.servers - _floor(nxt.servers * nxt.rate * sojourn)
        )
        for i in range(tau + 2, n):
            up = stages[i - 1]
            here = stages[i]
            gain = _floor(up.servers * up.rate * sojourn)
            loss = _floor(here.servers * here.rate * sojourn)
            q[i] = max(0, q[i] + gain - loss)
    return tuple(q)


def delay_moments(stages: Sequence[StageSpec], q: Sequence[int]) -> DelayMoments:
    """Conditional delay moments given the seen queue vector q.

    mean = sum_n ((q_n + 1) / c_n + 1) * E[S_n]
    var  = sum_n ((q_n + 1) / c_n^2 + 1) * Var[S_n]
    """
    _check_path(stages, q, name="q")
    mean = 0.0
    var = 0.0
    for st, qn in zip(stages, q):
        mean += ((qn + 1) / st.servers + 1.0) * st.service.mean
        var += ((qn + 1) / st.servers**2 + 1.0) * st.service.variance
    return DelayMoments(mean=mean, variance=var)


def scv_bound(stages: Sequence[StageSpec], q: Sequence[int]) -> tuple[float, float]:
    """Exact squared coefficient of variation of D(q) and a dominating bound.

    With Q = sum(q_n + 1) and N stages, the bound is
    (Q*beta1 + N*beta2) / (Q*beta3 + N*beta4)^2 where beta1/beta2 are the
    worst-case per-stage variance terms and beta3/beta4 the best-case mean
    terms. It always dominates the exact SCV and both vanish as Q grows.
    """
    mom = delay_moments(stages, q)
    scv = mom.variance / mom.mean**2
    n = len(stages)
    big_q = sum(x + 1 for x in q)
    beta1 = max(st.service.variance / st.servers**2 for st in stages)
    beta2 = max(st.service.variance for st in stages)
    beta3 = min(st.service.mean / st.servers for st in stages)
    beta4 = min(st.service.mean for st in stages)
    bound = (big_q * beta1 + n * beta2) / (big_q * beta3 + n * beta4) ** 2
    return scv, bound


def gmm_approximation(spec: NetworkSpec, b: Sequence[int]) -> GaussianMixture:
    """Conditional delay distribution as one Gaussian component per route.

    Component weights are the products of branch probabilities along each
    source-to-sink path; means and variances come from propagating b along
    the path and applying the moment formulas. A tandem network yields a
    single component of weight 1.
    """
    if len(b) != spec.num_stages:
        raise ValueError(f"b has length {len(b)}, network has {spec.num_stages} stages")
    components = []
    for path, prob in spec.paths():
        stages = [spec.stages[i] for i in path]
        b_path = [b[i] for i in path]
        q = propagate_queue_lengths(stages, b_path)
        mom = delay_moments(stages, q)
        components.append((prob, mom.mean, mom.variance))
    return GaussianMixture(components)
