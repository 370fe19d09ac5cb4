"""Integer-valued allocations by randomized rounding of the EG recommendation.

The continuous recommendation is split into floors plus fractional parts; a
fixed-size subset drawn with the (exploration-mixed) fractional parts as
inclusion marginals decides which venues receive one extra unit. Feedback is
turned into a per-(unit, venue) gradient estimate whose conditional
expectation over the rounding equals the censored subgradient, using
importance weights 1/q_bar on the event that the extra unit was played.

Every indicator the estimator needs is reconstructed from the played
allocation and the consumed amounts alone; the hidden liquidity field of the
outcome is never read.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .core import (
    FractionalAllocation,
    IntegralAllocation,
    ProblemDims,
    Rng,
    RoundOutcome,
    WeightMatrix,
    censor_feedback,
)
from .rounding import MarginalVector, mix_exploration, sample_subset

#: Fractional parts closer than this to an integer are snapped onto it.
SNAP_ATOL = 1e-9


@dataclass(frozen=True)
class Exp3State:
    weights: WeightMatrix
    eta: float
    gamma: float
    delta: float | None = None
    variance_corrected: bool = False


@dataclass(frozen=True)
class RoundingPlan:
    """Everything the gradient estimator needs to know about one rounding."""

    floors: np.ndarray  # (K,) integer part of the recommendation
    fractions: np.ndarray  # (K,) fractional parts, in [0, 1)
    mixed: np.ndarray  # (K,) exploration-mixed inclusion probabilities
    size: int  # number of venues receiving the extra unit
    covered_units: np.ndarray  # (K,) unit rows fully inside the floor
    ceil_played: np.ndarray  # (K,) bool, drew the extra unit
    volume: int


def decompose(alloc: FractionalAllocation) -> tuple[np.ndarray, MarginalVector]:
    """Floors and fractional parts; the parts sum to an integer by construction."""
    shares = np.asarray(alloc.shares, dtype=float)
    floors = np.floor(shares).astype(np.int64)
    fractions = shares - floors
    nearly_whole = fractions > 1.0 - SNAP_ATOL
    floors[nearly_whole] += 1
    fractions[nearly_whole] = 0.0
    fractions[fractions < SNAP_ATOL] = 0.0
    size = alloc.round_volume - int(floors.sum())
    if abs(float(fractions.sum()) - size) > 1e-7:
        raise ValueError(
            f"fractional parts sum to {fractions.sum()!r}, expected {size}"
        )
    return floors, MarginalVector(fractions=fractions, size=size)


def floor_covered_units(
    weights: WeightMatrix, floors: np.ndarray, volume: int
) -> np.ndarray:
    """Per venue, the largest unit index whose cumulative weight the floor covers.

    Cumulative weights are compared with a small slack so a prefix that lands
    exactly on the floor (up to float noise) counts as covered; the largest
    qualifying index wins.
    """
    prefix = np.cumsum(weights.rows[:volume], axis=0)
    return (prefix <= floors[None, :] + SNAP_ATOL).sum(axis=0)


def propose(
    state: Exp3State, volume: int, rng: Rng
) -> tuple[IntegralAllocation, RoundingPlan]:
    """Round the continuous recommendation to whole shares for one round."""
    weights = state.weights
    if not 0 <= volume <= weights.max_volume:
        raise ValueError(f"volume {volume} outside [0, {weights.max_volume}]")
    alloc = FractionalAllocation(weights.allocation(volume), volume)
    floors, fractions = decompose(alloc)
    mixed = mix_exploration(fractions, state.gamma)
    ceil_played = np.zeros(weights.n_venues, dtype=bool)
    if mixed.size > 0:
        ceil_played[sample_subset(mixed, rng)] = True
    plan = RoundingPlan(
        floors=floors,
        fractions=fractions.fractions,
        mixed=mixed.fractions,
        size=mixed.size,
        covered_units=floor_covered_units(weights, floors, volume),
        ceil_played=ceil_played,
        volume=volume,
    )
    played = IntegralAllocation(floors + ceil_played, volume)
    return played, plan


def estimate_gradient(outcome: RoundOutcome, plan: RoundingPlan) -> np.ndarray:
    """Per-(unit, venue) gradient estimate, shape (volume, n_venues).

    Unit rows the floor covers get 1(s >= floor) minus the importance-weighted
    indicator of landing exactly on the floor; rows above get the
    importance-weighted indicator of full consumption. Both are measurable
    from feedback: with the extra unit played, consumed = min(floor+1, s)
    pins down every indicator; without it, any term carrying the extra-unit
    indicator vanishes and 1(s >= floor) is just "the floor filled".
    """
    floors = plan.floors
    ceil = plan.ceil_played
    consumed = np.rint(outcome.consumed).astype(np.int64)
    qbar = np.where(plan.mixed > 0.0, plan.mixed, 1.0)
    at_least_floor = (consumed >= floors).astype(float)
    exactly_floor = (consumed == floors).astype(float)
    lower = np.where(ceil, at_least_floor - exactly_floor / qbar, exactly_floor)
    upper = np.where(ceil, (consumed == floors + 1) / qbar, 0.0)
    units = np.arange(1, plan.volume + 1)[:, None]
    return np.where(units <= plan.covered_units[None, :], lower, upper)


def variance_correct(
    grad: np.ndarray,
    mixed: np.ndarray,
    gamma: float,
    n_venues: int,
    delta: float,
) -> np.ndarray:
    """Add the optimism term 10 gamma / (K q_bar_i) * sqrt(ln(1/delta)).

    The shift is constant across unit rows for each venue. Venues that took
    no part in the rounding (q_bar = 0) are left untouched.
    """
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    scale = 10.0 * gamma / n_venues * math.sqrt(math.log(1.0 / delta))
    bump = np.where(mixed > 0.0, scale / np.where(mixed > 0.0, mixed, 1.0), 0.0)
    return grad + bump[None, :]


def tuning_bound(
    dims: ProblemDims, eta: float, gamma: float
) -> float:
    """The regret expression the default parameters minimize."""
    v, k, t = dims.max_volume, dims.n_venues, dims.horizon
    ln_k = math.log(k)
    return (
        v * ln_k / eta
        + 2.0 * eta * (t * v + t * v * k / gamma + t * k)
        + gamma * t * k
    )


def default_parameters(
    dims: ProblemDims, correction_max: float = 0.0, grid_size: int = 64
) -> tuple[float, float]:
    """Horizon-tuned (eta, gamma).

    eta is (V ln^2 K / (K T^2))^(1/3), clamped so that eta times the largest
    possible estimate magnitude (1 + K/gamma plus any variance-correction
    ceiling) stays at most 1. gamma comes from minimizing the regret
    expression over a log-spaced grid in (0, 1/2].
    """
    v, k, t = dims.max_volume, dims.n_venues, dims.horizon
    eta_raw = (v * math.log(k) ** 2 / (k * t**2)) ** (1.0 / 3.0)
    best: tuple[float, float, float] | None = None
    for gamma in np.geomspace(1e-6, 0.5, grid_size):
        gamma = float(gamma)
        eta = min(eta_raw, 1.0 / (1.0 + k / gamma + correction_max))
        bound = tuning_bound(dims, eta, gamma)
        if best is None or bound < best[0]:
            best = (bound, eta, gamma)
    assert best is not None
    return best[1], best[2]


def init(
    dims: ProblemDims,
    eta: float | None = None,
    gamma: float | None = None,
    variance_corrected: bool = False,
    delta: float | None = None,
) -> Exp3State:
    if variance_corrected and delta is None:
        delta = 1.0 / dims.horizon
    correction_max = (
        10.0 * math.sqrt(math.log(1.0 / delta)) if variance_corrected else 0.0
    )
    if eta is None or gamma is None:
        eta_default, gamma_default = default_parameters(dims, correction_max)
        eta = eta_default if eta is None else eta
        gamma = gamma_default if gamma is None else gamma
    if not 0.0 < gamma <= 0.5:
        raise ValueError(f"gamma must lie in (0, 1/2], got {gamma}")
    magnitude = 1.0 + dims.n_venues / gamma + correction_max
    if eta * magnitude > 1.0 + 1e-9:
        raise ValueError(
            f"eta {eta} too large: eta * (1 + K/gamma + correction) = "
            f"{eta * magnitude:.3f} exceeds 1"
        )
    return Exp3State(
        weights=WeightMatrix.uniform(dims),
        eta=eta,
        gamma=gamma,
        delta=delta,
        variance_corrected=variance_corrected,
    )


def update(state: Exp3State, plan: RoundingPlan, outcome: RoundOutcome) -> Exp3State:
    """Exponentiated-gradient step on the estimated gradient."""
    if plan.volume == 0:
        return state
    grad = estimate_gradient(outcome, plan)
    if state.variance_corrected:
        assert state.delta is not None
        grad = variance_correct(
            grad, plan.mixed, state.gamma, state.weights.n_venues, state.delta
        )
    return replace(state, weights=state.weights.exp_reweighted(state.eta * grad))


def step(
    state: Exp3State,
    volume: int,
    environment: Callable[[IntegralAllocation], np.ndarray],
    rng: Rng,
) -> tuple[Exp3State, RoundOutcome]:
    """One full round: round, play, observe censored feedback, update."""
    played, plan = propose(state, volume, rng)
    liquidities = environment(played)
    outcome = censor_feedback(played, liquidities)
    return update(state, plan, outcome), outcome
