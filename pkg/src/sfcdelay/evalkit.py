"""Quantitative evaluation of delay predictors against simulation records.

Covers point-prediction error (MSE), empirical violation rates of the
probabilistic bounds, confidence-interval coverage, and a distribution-match
check that compares a predicted mixture CDF with the empirical CDF of
records whose entry snapshot lies near a probe vector.
"""

from __future__ import annotations

import numpy as np

from . import mixstats
from .mdn import as_predictor
from .netsim import CustomerRecord

__all__ = [
    "InsufficientMatchesError",
    "mse",
    "violation_rates",
    "ci_coverage",
    "matched_delays",
    "conditional_distribution_match",
    "ks_distance",
    "write_xy",
    "write_metric_report",
]


class InsufficientMatchesError(ValueError):
    """Too few records near the probe; carries the count found."""

    def __init__(self, count: int, needed: int, radius: int):
        super().__init__(
            f"only {count} records within L1 radius {radius} of the probe; need {needed}"
        )
        self.count = count


def mse(predictions, truths) -> float:
    """Mean squared prediction error."""
    p = np.asarray(predictions, dtype=float)
    t = np.asarray(truths, dtype=float)
    if p.shape != t.shape or p.size == 0:
        raise ValueError("predictions and truths must be nonempty and aligned")
    return float(np.mean((p - t) ** 2))


def violation_rates(d_ubs, d_lbs, delays) -> tuple[float, float]:
    """(fraction with D > d_ub, fraction with D < d_lb), one bound pair per record."""
    ub = np.asarray(d_ubs, dtype=float)
    lb = np.asarray(d_lbs, dtype=float)
    d = np.asarray(delays, dtype=float)
    if not (ub.shape == lb.shape == d.shape) or d.size == 0:
        raise ValueError("bounds and delays must be nonempty and aligned")
    return float(np.mean(d > ub)), float(np.mean(d < lb))


def ci_coverage(mmse_values, half_widths, delays) -> float:
    """Fraction of records whose delay falls strictly inside mmse +/- x."""
    m = np.asarray(mmse_values, dtype=float)
    x = np.asarray(half_widths, dtype=float)
    d = np.asarray(delays, dtype=float)
    if not (m.shape == x.shape == d.shape) or d.size == 0:
        raise ValueError("inputs must be nonempty and aligned")
    return float(np.mean(np.abs(d - m) < x))


def matched_delays(
    records: list[CustomerRecord],
    probe_b,
    radius: int | None = None,
    min_matches: int = 200,
) -> tuple[np.ndarray, int]:
    """Delays of records whose b lies within an L1 ball around the probe.

    With radius=None the ball widens from 0 until at least ``min_matches``
    records fall inside; an explicit radius is used as given. Returns the
    matched delays and the radius used.
    """
    probe = np.asarray(probe_b, dtype=float)
    bs = np.array([rec.b for rec in records], dtype=float)
    if bs.ndim != 2 or bs.shape[1] != len(probe):
        raise ValueError("records and probe disagree on stage count")
    dist = np.abs(bs - probe).sum(axis=1)
    if radius is not None:
        sel = dist <= radius
        if sel.sum() < min_matches:
            raise InsufficientMatchesError(int(sel.sum()), min_matches, radius)
        return np.array([records[i].delay for i in np.flatnonzero(sel)]), radius
    max_radius = int(dist.max())
    for r in range(max_radius + 1):
        sel = dist <= r
        if sel.sum() >= min_matches:
            return np.array([records[i].delay for i in np.flatnonzero(sel)]), r
    raise InsufficientMatchesError(len(records), min_matches, max_radius)


def ks_distance(mix: mixstats.GaussianMixture, samples: np.ndarray) -> float:
    """One-sample Kolmogorov-Smirnov distance of samples from the mixture CDF."""
    s = np.sort(np.asarray(samples, dtype=float))
    n = len(s)
    if n == 0:
        raise ValueError("need at least one sample")
    f = mixstats.cdf(mix, s)
    grid = np.arange(1, n + 1) / n
    return float(max(np.max(grid - f), np.max(f - (grid - 1.0 / n))))


def conditional_distribution_match(
    predictor,
    records: list[CustomerRecord],
    probe_b,
    radius: int | None = None,
    min_matches: int = 200,
) -> float:
    """KS distance between the predicted CDF at the probe and the empirical
    CDF of nearby records' delays."""
    predict = as_predictor(predictor)
    delays, _ = matched_delays(records, probe_b, radius, min_matches)
    return ks_distance(predict(probe_b), delays)


def write_xy(path, xs, ys, header: str = "x y") -> None:
    """Two-column plot data consumable by any plotting tool."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.shape != ys.shape:
        raise ValueError("x and y series must be aligned")
    with open(path, "w") as fh:
        fh.write(f"# {header}\n")
        for x, y in zip(xs, ys):
            fh.write(f"{x!r} {y!r}\n")


def write_metric_report(path, metrics: dict) -> None:
    """Flat key/value metric report as structured text."""
    with open(path, "w") as fh:
        fh.write("# evaluation metrics\n")
        for key, value in metrics.items():
            fh.write(f"{key} {value!r}\n")
