"""Shared domain types, censored feedback, and deterministic randomness."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

#: Seedable deterministic pseudo-random stream. Identical seed, identical stream.
Rng = np.random.Generator

#: Absolute tolerance when comparing real-valued allocations with consumed
#: amounts. Allocations are sums of floats, so exact equality is too strict.
CONSUMED_ATOL = 1e-9

#: Tolerance for "a vector of probabilities sums to one".
ROW_SUM_ATOL = 1e-9


def make_rng(seed: int | np.random.SeedSequence) -> Rng:
    return np.random.default_rng(seed)


def substream(seed: int, *key: int) -> Rng:
    """Independent stream addressed by an integer path under a master seed."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(key)))


def trial_streams(seed: int, trial: int) -> tuple[Rng, Rng]:
    """(algorithm, environment) streams for one trial.

    The two streams are derived independently so that algorithm randomness
    never perturbs an oblivious adversary's sequence.
    """
    return substream(seed, trial, 0), substream(seed, trial, 1)


@dataclass(frozen=True)
class ProblemDims:
    """Problem size: venues, per-round volume cap, and horizon."""

    n_venues: int
    max_volume: int
    horizon: int

    def __post_init__(self) -> None:
        if self.n_venues < 2:
            raise ValueError(f"need at least 2 venues, got {self.n_venues}")
        if self.max_volume < 1:
            raise ValueError(f"volume bound must be >= 1, got {self.max_volume}")
        if self.horizon < 1:
            raise ValueError(f"horizon must be >= 1, got {self.horizon}")


@dataclass(frozen=True, eq=False)
class WeightMatrix:
    """One probability vector over venues per unit of volume.

    Rows are stored as normalized log-probabilities: after 1e5+ multiplicative
    updates a linear-domain representation underflows, while log domain with
    max-subtraction stays exact. Every row sums to one and every entry is
    strictly positive (finite log-weights).
    """

    log_rows: np.ndarray  # (max_volume, n_venues)

    @classmethod
    def uniform(cls, dims: ProblemDims) -> "WeightMatrix":
        log_rows = np.full(
            (dims.max_volume, dims.n_venues), -math.log(dims.n_venues)
        )
        return cls(log_rows)

    @property
    def max_volume(self) -> int:
        return self.log_rows.shape[0]

    @property
    def n_venues(self) -> int:
        return self.log_rows.shape[1]

    @cached_property
    def rows(self) -> np.ndarray:
        """Row-stochastic matrix of per-unit venue probabilities."""
        return np.exp(self.log_rows)

    def allocation(self, volume: int) -> np.ndarray:
        """Per-venue share totals from the first ``volume`` unit rows."""
        return self.rows[:volume].sum(axis=0)

    def exp_reweighted(self, step: np.ndarray) -> "WeightMatrix":
        """Multiply the first ``step.shape[0]`` rows by exp(step), renormalize.

        Rows beyond the step are returned untouched. Pure: the receiver is
        never modified.
        """
        step = np.atleast_2d(step)
        n = step.shape[0]
        new_rows = self.log_rows.copy()
        bumped = new_rows[:n] + step
        bumped -= bumped.max(axis=1, keepdims=True)
        bumped -= np.log(np.exp(bumped).sum(axis=1, keepdims=True))
        new_rows[:n] = bumped
        return WeightMatrix(new_rows)

    def validate(self) -> None:
        rows = self.rows
        if not np.all(np.isfinite(self.log_rows)):
            raise ValueError("log-weights must be finite (entries strictly positive)")
        err = np.abs(rows.sum(axis=1) - 1.0).max()
        if err > ROW_SUM_ATOL:
            raise ValueError(f"row sums deviate from 1 by {err:.3e}")


def _as_shares(alloc, n_expected: int | None = None) -> tuple[np.ndarray, int | None]:
    """Extract (shares array, round volume) from an allocation of any flavor."""
    if isinstance(alloc, (FractionalAllocation, IntegralAllocation)):
        shares, volume = np.asarray(alloc.shares, dtype=float), alloc.round_volume
    else:
        shares, volume = np.asarray(alloc, dtype=float), None
    if n_expected is not None and shares.shape != (n_expected,):
        raise ValueError(
            f"allocation has {shares.shape} entries, expected {n_expected}"
        )
    return shares, volume


@dataclass(frozen=True)
class FractionalAllocation:
    """Real-valued share recommendation summing to the round volume."""

    shares: np.ndarray
    round_volume: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "shares", np.asarray(self.shares, dtype=float))
        if np.any(self.shares < -CONSUMED_ATOL):
            raise ValueError("allocations must be nonnegative")
        total = float(self.shares.sum())
        if abs(total - self.round_volume) > ROW_SUM_ATOL:
            raise ValueError(
                f"allocation sums to {total!r}, expected {self.round_volume}"
            )


@dataclass(frozen=True)
class IntegralAllocation:
    """Whole-share allocation summing exactly to the round volume."""

    shares: np.ndarray
    round_volume: int

    def __post_init__(self) -> None:
        shares = np.asarray(self.shares)
        if not np.issubdtype(shares.dtype, np.integer):
            rounded = np.rint(shares).astype(np.int64)
            if np.abs(shares - rounded).max() > 0:
                raise ValueError("integral allocation has non-integer entries")
            shares = rounded
        object.__setattr__(self, "shares", shares)
        if np.any(shares < 0):
            raise ValueError("allocations must be nonnegative")
        if int(shares.sum()) != self.round_volume:
            raise ValueError(
                f"allocation sums to {int(shares.sum())}, expected {self.round_volume}"
            )


@dataclass(frozen=True)
class RoundOutcome:
    """Everything one round produced.

    ``liquidities`` is ground truth that only the environment and the harness
    may inspect; learning code must restrict itself to the played allocation,
    the consumed amounts, and the censor bits.
    """

    volume: int
    liquidities: np.ndarray
    allocation: np.ndarray
    consumed: np.ndarray
    censor_bits: np.ndarray

    def validate(self) -> None:
        if np.any(self.consumed > self.allocation + CONSUMED_ATOL):
            raise ValueError("consumed exceeds allocation")
        if np.any(self.consumed > self.liquidities + CONSUMED_ATOL):
            raise ValueError("consumed exceeds liquidity")
        expected = self.consumed >= self.allocation - CONSUMED_ATOL
        if np.any(expected != (self.censor_bits == 1)):
            raise ValueError("censor bits inconsistent with consumed amounts")


def censor_feedback(alloc, liquidities) -> RoundOutcome:
    """Consume min(allocation, liquidity) per venue and flag full fills.

    ``alloc`` may be a FractionalAllocation, an IntegralAllocation, or a raw
    array of shares. The censor bit is 1 exactly when the venue consumed the
    whole allocation, which is the only case where the true liquidity stays
    hidden.
    """
    liquidities = np.asarray(liquidities)
    if np.any(liquidities < 0):
        raise ValueError("liquidities must be nonnegative")
    shares, volume = _as_shares(alloc, len(liquidities))
    consumed = np.minimum(shares, liquidities)
    bits = (consumed >= shares - CONSUMED_ATOL).astype(np.int8)
    if volume is None:
        volume = int(round(float(shares.sum())))
    return RoundOutcome(
        volume=volume,
        liquidities=liquidities,
        allocation=shares,
        consumed=consumed,
        censor_bits=bits,
    )


def subgradient_bits(outcome: RoundOutcome) -> np.ndarray:
    """0/1 vector with 1 where the allocation was fully consumed.

    Constructible purely from observed feedback; equals an element of the
    subgradient of sum_i min(alloc_i, s_i) at the played allocation.
    """
    return (outcome.consumed >= outcome.allocation - CONSUMED_ATOL).astype(np.int8)
