"""Statistics of Gaussian mixtures: density, CDF, quantile bounds, intervals.

Every delay predictor in this package (the analytic approximation and the
mixture density network) emits a :class:`GaussianMixture`; the functions here
turn one into actionable numbers: probabilistic upper/lower delay bounds at a
target violation probability, a centered confidence interval, and the MMSE
point prediction (the mixture mean).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.special import ndtr

__all__ = [
    "GaussianMixture",
    "DelayBounds",
    "pdf",
    "cdf",
    "mmse",
    "upper_bound",
    "lower_bound",
    "confidence_interval",
    "delay_bounds",
    "sample",
    "write_mixture",
    "read_mixture",
    "mixture_to_text",
    "mixture_from_text",
    "quantiles_batch",
    "ci_half_widths_batch",
]

_WEIGHT_TOL = 1e-9
_BISECT_TOL = 1e-8


class GaussianMixture:
    """Weighted sum of univariate normal densities.

    Components are (weight, mean, variance) triples; weights must sum to 1
    within 1e-9 and variances must be strictly positive.
    """

    __slots__ = ("weights", "means", "variances")

    def __init__(self, components: Iterable[tuple[float, float, float]]):
        comps = [(float(w), float(m), float(v)) for w, m, v in components]
        if not comps:
            raise ValueError("mixture needs at least one component")
        w = np.array([c[0] for c in comps])
        m = np.array([c[1] for c in comps])
        v = np.array([c[2] for c in comps])
        if np.any(w <= 0.0) or np.any(w > 1.0):
            raise ValueError("component weights must lie in (0, 1]")
        if abs(w.sum() - 1.0) > _WEIGHT_TOL:
            raise ValueError(f"component weights sum to {w.sum()!r}, expected 1")
        if np.any(v <= 0.0):
            raise ValueError("component variances must be > 0")
        self.weights = w
        self.means = m
        self.variances = v

    @property
    def components(self) -> list[tuple[float, float, float]]:
        return list(zip(self.weights.tolist(), self.means.tolist(), self.variances.tolist()))

    def __len__(self) -> int:
        return len(self.weights)

    def __repr__(self) -> str:
        parts = ", ".join(f"({w:.4g}, {m:.4g}, {v:.4g})" for w, m, v in self.components)
        return f"GaussianMixture([{parts}])"

    def __eq__(self, other) -> bool:
        if not isinstance(other, GaussianMixture):
            return NotImplemented
        return (
            np.array_equal(self.weights, other.weights)
            and np.array_equal(self.means, other.means)
            and np.array_equal(self.variances, other.variances)
        )


@dataclass(frozen=True)
class DelayBounds:
    """Bound summary for one predicted delay distribution."""

    d_lb: float
    d_ub: float
    eps_lb: float
    eps_ub: float
    mmse: float
    ci_half_width: float
    p_cl: float


def pdf(mix: GaussianMixture, d):
    """Mixture density at ``d`` (scalar or array)."""
    d = np.asarray(d, dtype=float)
    z = (d[..., None] - mix.means) ** 2 / (2.0 * mix.variances)
    dens = np.exp(-z) / np.sqrt(2.0 * math.pi * mix.variances)
    out = dens @ mix.weights
    return float(out) if out.ndim == 0 else out


def cdf(mix: GaussianMixture, d):
    """Mixture CDF at ``d`` (scalar or array)."""
    d = np.asarray(d, dtype=float)
    z = (d[..., None] - mix.means) / np.sqrt(mix.variances)
    out = ndtr(z) @ mix.weights
    return float(out) if out.ndim == 0 else out


def mmse(mix: GaussianMixture) -> float:
    """Mixture mean: the minimum-mean-square-error point prediction."""
    return float(np.dot(mix.weights, mix.means))


def _bracket(mix: GaussianMixture) -> tuple[float, float]:
    # Mixture mass outside mean +/- 10 sigma is < 1e-20 per component.
    sd = np.sqrt(mix.variances)
    return float(np.min(mix.means - 10.0 * sd)), float(np.max(mix.means + 10.0 * sd))


def upper_bound(mix: GaussianMixture, eps_ub: float) -> float:
    """Smallest d with P(D > d) <= eps_ub, i.e. the (1 - eps_ub) quantile."""
    if not 0.0 < eps_ub < 1.0:
        raise ValueError("eps_ub must lie in (0, 1)")
    return _quantile(mix, 1.0 - eps_ub)


def lower_bound(mix: GaussianMixture, eps_lb: float) -> float:
    """Largest d with P(D < d) <= eps_lb, i.e. the eps_lb quantile."""
    if not 0.0 < eps_lb < 1.0:
        raise ValueError("eps_lb must lie in (0, 1)")
    return _quantile(mix, eps_lb)


def _quantile(mix: GaussianMixture, p: float) -> float:
    lo, hi = _bracket(mix)
    while hi - lo > _BISECT_TOL:
        mid = 0.5 * (lo + hi)
        if cdf(mix, mid) >= p:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def confidence_interval(mix: GaussianMixture, p_cl: float) -> float:
    """Smallest half-width x with P(mmse - x < D < mmse + x) >= p_cl.

    Coverage is nondecreasing in x, so bisection applies.
    """
    if not 0.0 < p_cl < 1.0:
        raise ValueError("p_cl must lie in (0, 1)")
    center = mmse(mix)
    blo, bhi = _bracket(mix)
    lo, hi = 0.0, max(bhi - center, center - blo)
    while hi - lo > _BISECT_TOL:
        mid = 0.5 * (lo + hi)
        if cdf(mix, center + mid) - cdf(mix, center - mid) >= p_cl:
            hi = mid
        else:
            lo = mid
    return hi


def delay_bounds(
    mix: GaussianMixture,
    eps_lb: float = 0.05,
    eps_ub: float = 0.05,
    p_cl: float = 0.95,
) -> DelayBounds:
    """All bound statistics of one predicted mixture in a single record."""
    return DelayBounds(
        d_lb=lower_bound(mix, eps_lb),
        d_ub=upper_bound(mix, eps_ub),
        eps_lb=eps_lb,
        eps_ub=eps_ub,
        mmse=mmse(mix),
        ci_half_width=confidence_interval(mix, p_cl),
        p_cl=p_cl,
    )


def sample(mix: GaussianMixture, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw n values from the mixture (component choice then normal draw)."""
    idx = rng.choice(len(mix.weights), size=n, p=mix.weights)
    return rng.normal(mix.means[idx], np.sqrt(mix.variances[idx]))


# ---------------------------------------------------------------------------
# Batch versions over many mixtures at once (used when bounding every record
# of a dataset). weights/means/variances are (n, K) arrays, one row per
# predicted mixture.

def _cdf_rows(weights, means, variances, d):
    z = (d[:, None] - means) / np.sqrt(variances)
    return np.einsum("nk,nk->n", ndtr(z), weights)


def quantiles_batch(weights, means, variances, p: float) -> np.ndarray:
    """Per-row p-quantile of n mixtures by vectorized bisection."""
    weights = np.asarray(weights, dtype=float)
    means = np.asarray(means, dtype=float)
    variances = np.asarray(variances, dtype=float)
    sd = np.sqrt(variances)
    lo = (means - 10.0 * sd).min(axis=1)
    hi = (means + 10.0 * sd).max(axis=1)
    while float(np.max(hi - lo)) > _BISECT_TOL:
        mid = 0.5 * (lo + hi)
        above = _cdf_rows(weights, means, variances, mid) >= p
        hi = np.where(above, mid, hi)
        lo = np.where(above, lo, mid)
    return 0.5 * (lo + hi)


def ci_half_widths_batch(weights, means, variances, p_cl: float) -> np.ndarray:
    """Per-row smallest x with coverage of (mean - x, mean + x) >= p_cl."""
    weights = np.asarray(weights, dtype=float)
    means = np.asarray(means, dtype=float)
    variances = np.asarray(variances, dtype=float)
    center = np.einsum("nk,nk->n", weights, means)
    sd = np.sqrt(variances)
    lo = np.zeros(len(center))
    hi = np.maximum(
        (means + 10.0 * sd).max(axis=1) - center,
        center - (means - 10.0 * sd).min(axis=1),
    )
    while float(np.max(hi - lo)) > _BISECT_TOL:
        mid = 0.5 * (lo + hi)
        cover = _cdf_rows(weights, means, variances, center + mid) - _cdf_rows(
            weights, means, variances, center - mid
        )
        ok = cover >= p_cl
        hi = np.where(ok, mid, hi)
        lo = np.where(ok, lo, mid)
    return hi


# ---------------------------------------------------------------------------
# Serialization: one "weight mean variance" row per component. The format is
# shared by the analytic approximation and the MDN tooling.

def mixture_to_text(mix: GaussianMixture) -> str:
    lines = ["# gaussian mixture: weight mean variance"]
    for w, m, v in mix.components:
        lines.append(f"{w!r} {m!r} {v!r}")
    return "\n".join(lines) + "\n"


def mixture_from_text(text: str) -> GaussianMixture:
    comps = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.strip()
        if not body or body.startswith("#"):
            continue
        fields = body.split()
        if len(fields) != 3:
            raise ValueError(f"line {lineno}: expected 3 fields, got {len(fields)}")
        try:
            comps.append(tuple(float(f) for f in fields))
        except ValueError:
            raise ValueError(f"line {lineno}: non-numeric component field") from None
    return GaussianMixture(comps)


def write_mixture(mix: GaussianMixture, path) -> None:
    with open(path, "w") as fh:
        fh.write(mixture_to_text(mix))


def read_mixture(path) -> GaussianMixture:
    with open(path) as fh:
        return mixture_from_text(fh.read())
