"""Reconstructed comparison allocators: optimistic Kaplan-Meier and
parametric maximum likelihood over the zero-bin power-law model, plus a
uniform allocator for calibration.

Both estimators consume censored observations (allocated, consumed): a venue
that consumed less than it was allocated reveals its liquidity exactly, while
a full fill only reveals a lower bound. Allocation is greedy unit by unit on
the estimated tail probabilities, which is optimal because tails are
nonincreasing in depth.

The optimism convention: survival mass beyond the deepest level ever probed
is retained rather than zeroed, so unexplored depths look maximally
attractive. The power law is normalized over {1..cap} as P(s=k) ~ k^-beta,
the same family the simulator draws from.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import IntegralAllocation
from .liquidity import ZbplParams, zbpl_tail

#: Search bracket for the power-law exponent.
EXPONENT_BRACKET = (1.01, 5.0)

#: Exponent used when the data cannot identify one: the heaviest tail in the
#: bracket. Resolving the unidentified case optimistically keeps unexplored
#: depths attractive, the same convention the optimistic product-limit
#: estimator uses beyond its frontier; a middling default would silently trap
#: venues at one unit forever (their samples stay censored at one, which
#: never identifies the exponent).
DEFAULT_EXPONENT = EXPONENT_BRACKET[0]


@dataclass(frozen=True)
class CensoredSample:
    """One venue-round observation. Full fills are right-censored."""

    allocated: int
    consumed: int

    def __post_init__(self) -> None:
        if self.consumed > self.allocated:
            raise ValueError("consumed cannot exceed allocated")
        if self.consumed < 0:
            raise ValueError("consumed must be nonnegative")

    @property
    def exact(self) -> bool:
        """True when the liquidity was observed exactly (partial fill)."""
        return self.consumed < self.allocated


@dataclass(frozen=True)
class TailEstimate:
    """Estimated P(liquidity >= s) for s = 1..depth."""

    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", values)
        if np.any(values < -1e-12) or np.any(values > 1.0 + 1e-12):
            raise ValueError("tail values must lie in [0, 1]")
        if np.any(np.diff(values) > 1e-12):
            raise ValueError("tail values must be nonincreasing")


def survival_from_counts(deaths: np.ndarray, censored: np.ndarray) -> np.ndarray:
    """Product-limit survival curves from event counts, optimistic beyond data.

    ``deaths[..., v]`` counts exact observations of liquidity v and
    ``censored[..., v]`` counts full fills at allocation v, for v = 0..depth.
    Returns P(s >= v) for v = 1..depth along the last axis. Where the risk set
    is empty (beyond the exploration frontier) the hazard is taken to be zero,
    which is what keeps unexplored depths attractive.
    """
    deaths = np.asarray(deaths, dtype=float)
    censored = np.asarray(censored, dtype=float)
    at_risk = np.cumsum((deaths + censored)[..., ::-1], axis=-1)[..., ::-1]
    with np.errstate(invalid="ignore", divide="ignore"):
        hazard = np.where(at_risk > 0, deaths / np.where(at_risk > 0, at_risk, 1.0), 0.0)
    factors = 1.0 - hazard
    return np.cumprod(factors[..., :-1], axis=-1)


def km_update(history: Sequence[CensoredSample], depth: int) -> TailEstimate:
    """Optimistic product-limit estimate over a venue's censored history."""
    deaths = np.zeros(depth + 1)
    censored = np.zeros(depth + 1)
    for sample in history:
        if sample.exact:
            deaths[min(sample.consumed, depth)] += 1
        elif sample.allocated >= 1:
            # A full fill at zero allocation says nothing about the venue.
            censored[min(sample.allocated, depth)] += 1
    return TailEstimate(survival_from_counts(deaths, censored))


def greedy_allocate(tails, volume: int) -> IntegralAllocation:
    """Assign units one at a time to the venue with the best marginal tail.

    Equivalent one-shot form: take the ``volume`` largest entries of the
    stacked (venue, depth) tail table; a stable sort on the venue-major layout
    reproduces the lowest-venue-index tie rule. Exact because per-venue gains
    are nonincreasing in depth.
    """
    if isinstance(tails, (list, tuple)):
        table = np.stack([t.values if isinstance(t, TailEstimate) else t for t in tails])
    else:
        table = np.asarray(tails, dtype=float)
    n_venues, depth = table.shape
    if volume > n_venues * depth:
        raise ValueError(f"cannot place {volume} units with depth {depth} tables")
    if volume == 0:
        return IntegralAllocation(np.zeros(n_venues, dtype=np.int64), 0)
    flat = table.reshape(-1)
    if volume >= flat.size:
        picked = np.arange(flat.size)
    else:
        # Partial selection with the stable tie rule: everything strictly
        # above the cut always enters; cut-value ties fill the remaining
        # slots in venue-major order, i.e. lowest venue index first.
        cut = -np.partition(-flat, volume - 1)[volume - 1]
        above = np.flatnonzero(flat > cut)
        ties = np.flatnonzero(flat == cut)[: volume - len(above)]
        picked = np.concatenate([above, ties])
    shares = np.bincount(picked // depth, minlength=n_venues)
    return IntegralAllocation(shares, volume)


def _censored_stats(
    history: Sequence[CensoredSample], depth: int
) -> tuple[int, int, float, np.ndarray]:
    """(zero count, positive-exact count, sum of logs, censor histogram)."""
    n_zero = 0
    n_pos = 0
    sum_log = 0.0
    cens = np.zeros(depth + 1)
    for sample in history:
        if sample.exact:
            if sample.consumed == 0:
                n_zero += 1
            else:
                n_pos += 1
                sum_log += math.log(sample.consumed)
        elif sample.allocated >= 1:
            cens[min(sample.allocated, depth)] += 1
        # A censored zero-allocation round carries no information.
    return n_zero, n_pos, sum_log, cens


def fit_power_law_exponents(
    sum_log: np.ndarray,
    n_pos: np.ndarray,
    censored: np.ndarray,
    cap: int,
    bracket: tuple[float, float] = EXPONENT_BRACKET,
    tol: float = 1e-4,
) -> np.ndarray:
    """Vectorized golden-section MLE of the power-law exponent per venue.

    ``censored[..., a]`` counts full fills at level a; levels beyond the cap
    are folded onto it. Venues whose data cannot move the likelihood (no
    positive exact sample and no censoring above level 1) get the default.
    """
    sum_log = np.atleast_1d(np.asarray(sum_log, dtype=float))
    n_pos = np.atleast_1d(np.asarray(n_pos, dtype=float))
    censored = np.atleast_2d(np.asarray(censored, dtype=float))
    if censored.shape[1] > cap + 1:
        folded = censored[:, : cap + 1].copy()
        folded[:, cap] += censored[:, cap + 1 :].sum(axis=1)
        censored = folded
    log_k = np.log(np.arange(1, cap + 1, dtype=float))

    def neg_loglik(beta: np.ndarray) -> np.ndarray:
        masses = np.exp(-beta[:, None] * log_k[None, :])
        z = masses.sum(axis=1)
        tails = np.cumsum(masses[:, ::-1], axis=1)[:, ::-1] / z[:, None]
        cens_term = (censored[:, 1:] * np.log(tails[:, : censored.shape[1] - 1])).sum(
            axis=1
        )
        return beta * sum_log + n_pos * np.log(z) - cens_term

    lo, hi = bracket
    a = np.full(sum_log.shape, lo)
    b = np.full(sum_log.shape, hi)
    shrink = (math.sqrt(5.0) - 1.0) / 2.0
    n_iters = math.ceil(math.log(tol / (hi - lo)) / math.log(shrink))
    c = b - shrink * (b - a)
    d = a + shrink * (b - a)
    fc = neg_loglik(c)
    fd = neg_loglik(d)
    for _ in range(n_iters - 1):
        move_up = fc > fd  # minimum sits in [c, b]
        a = np.where(move_up, c, a)
        b = np.where(move_up, b, d)
        c = b - shrink * (b - a)
        d = a + shrink * (b - a)
        # Golden sections nest: the surviving interior point is the new c
        # (moving up) or the new d (moving down), so one evaluation suffices.
        fresh = neg_loglik(np.where(move_up, d, c))
        fc, fd = np.where(move_up, fd, fresh), np.where(move_up, fresh, fc)
    beta = (a + b) / 2.0
    informative = (n_pos > 0) | (censored[:, 2:].sum(axis=1) > 0)
    return np.where(informative, beta, DEFAULT_EXPONENT)


def parml_fit(
    history: Sequence[CensoredSample],
    cap: int,
    bracket: tuple[float, float] = EXPONENT_BRACKET,
) -> ZbplParams:
    """Censored-data MLE of the zero-bin power-law model.

    Exact samples contribute point masses and full fills contribute tail
    masses. The zero-bin probability is the zero share among all samples known
    to be zero or known to be positive; the exponent comes from a
    one-dimensional golden-section search.
    """
    n_zero, n_pos, sum_log, cens = _censored_stats(history, cap)
    informative = n_zero + n_pos + int(cens[1:].sum())
    if informative == 0:
        return ZbplParams(zero_prob=0.5, exponent=DEFAULT_EXPONENT, cap=cap)
    zero_prob = n_zero / informative
    beta = float(
        fit_power_law_exponents(
            np.array([sum_log]),
            np.array([n_pos]),
            cens[None, :],
            cap,
            bracket,
        )[0]
    )
    return ZbplParams(zero_prob=zero_prob, exponent=beta, cap=cap)


def parml_tails(params_per_venue: Sequence[ZbplParams], depth: int) -> np.ndarray:
    """Stacked parametric tails P(s >= v), v = 1..depth, one row per venue."""
    return np.stack([zbpl_tail(p, depth) for p in params_per_venue])


def zbpl_tail_table(
    zero_probs: np.ndarray, exponents: np.ndarray, cap: int, depth: int
) -> np.ndarray:
    """Vectorized ``parml_tails`` over per-venue parameter vectors."""
    log_k = np.log(np.arange(1, cap + 1, dtype=float))
    masses = np.exp(-np.outer(np.asarray(exponents, dtype=float), log_k))
    suffix = np.cumsum(masses[:, ::-1], axis=1)[:, ::-1] / masses.sum(axis=1)[:, None]
    tails = np.zeros((len(exponents), depth))
    upto = min(depth, cap)
    tails[:, :upto] = suffix[:, :upto]
    return (1.0 - np.asarray(zero_probs, dtype=float))[:, None] * tails


def parml_allocate(
    params_per_venue: Sequence[ZbplParams], volume: int, depth: int
) -> IntegralAllocation:
    """Greedy allocation on the tails implied by the fitted parameters."""
    return greedy_allocate(parml_tails(params_per_venue, depth), volume)


def uniform_allocate(volume: int, n_venues: int) -> IntegralAllocation:
    """Split the volume as evenly as possible, leftovers to the lowest indices."""
    base, extra = divmod(volume, n_venues)
    shares = np.full(n_venues, base, dtype=np.int64)
    shares[:extra] += 1
    return IntegralAllocation(shares, volume)
