"""Venue liquidity models: zero-inflated truncated power law and two-point spikes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Rng


@dataclass(frozen=True)
class ZbplParams:
    """Zero bin + truncated power law: 0 w.p. p0, else P(k) ~ k^-beta on 1..cap."""

    zero_prob: float  # p0
    exponent: float  # beta, > 1
    cap: int  # largest liquidity value

    def __post_init__(self) -> None:
        if not 0.0 <= self.zero_prob <= 1.0:
            raise ValueError(f"zero_prob must lie in [0, 1], got {self.zero_prob}")
        if self.exponent <= 1.0:
            raise ValueError(f"exponent must exceed 1, got {self.exponent}")
        if self.cap < 1:
            raise ValueError(f"cap must be >= 1, got {self.cap}")


def power_law_pmf(exponent: float, cap: int) -> np.ndarray:
    """Normalized masses proportional to k^-exponent over k = 1..cap."""
    k = np.arange(1, cap + 1, dtype=float)
    masses = k**-exponent
    return masses / masses.sum()


def zbpl_pmf(params: ZbplParams) -> np.ndarray:
    """P(s = v) for v = 0..cap."""
    pmf = np.empty(params.cap + 1)
    pmf[0] = params.zero_prob
    pmf[1:] = (1.0 - params.zero_prob) * power_law_pmf(params.exponent, params.cap)
    return pmf


def zbpl_tail(params: ZbplParams, depth: int | None = None) -> np.ndarray:
    """P(s >= v) for v = 1..depth (zero beyond the cap)."""
    if depth is None:
        depth = params.cap
    pmf = zbpl_pmf(params)
    suffix = np.cumsum(pmf[::-1])[::-1]  # suffix[v] = P(s >= v)
    tail = np.zeros(depth)
    upto = min(depth, params.cap)
    tail[:upto] = suffix[1 : upto + 1]
    return tail


def zbpl_mean(params: ZbplParams) -> float:
    pmf = zbpl_pmf(params)
    return float(pmf @ np.arange(params.cap + 1))


def zbpl_sample(params: ZbplParams, rng: Rng, size: int | None = None):
    """Draw liquidities: 0 with probability p0, else power-law distributed."""
    pmf = power_law_pmf(params.exponent, params.cap)
    if size is None:
        if rng.random() < params.zero_prob:
            return 0
        return int(rng.choice(params.cap, p=pmf)) + 1
    zeros = rng.random(size) < params.zero_prob
    values = rng.choice(params.cap, p=pmf, size=size) + 1
    values[zeros] = 0
    return values


@dataclass(frozen=True)
class TwoPointParams:
    """All-or-nothing liquidity: ``top`` with probability ``top_prob``, else 0."""

    top: int
    top_prob: float

    def __post_init__(self) -> None:
        if self.top < 1:
            raise ValueError(f"top must be >= 1, got {self.top}")
        if not 0.0 <= self.top_prob <= 1.0:
            raise ValueError(f"top_prob must lie in [0, 1], got {self.top_prob}")


def two_point_mean(params: TwoPointParams) -> float:
    return params.top * params.top_prob


def two_point_sample(params: TwoPointParams, rng: Rng, size: int | None = None):
    if size is None:
        return params.top if rng.random() < params.top_prob else 0
    return np.where(rng.random(size) < params.top_prob, params.top, 0)


LiquidityParams = ZbplParams | TwoPointParams


def sample_liquidity(params: LiquidityParams, rng: Rng, size: int | None = None):
    if isinstance(params, ZbplParams):
        return zbpl_sample(params, rng, size)
    return two_point_sample(params, rng, size)


def mean_liquidity(params: LiquidityParams) -> float:
    if isinstance(params, ZbplParams):
        return zbpl_mean(params)
    return two_point_mean(params)
