"""Online policy adapters with a uniform propose/observe surface.

The harness drives every algorithm through the same loop: ``propose`` returns
the allocation for the round, the environment censors it, and ``observe``
receives nothing but the RoundOutcome. Estimator-internal state (counts,
weights, pending rounding plans) lives inside the adapter.
"""

from __future__ import annotations

import numpy as np

from . import exp3int, expgrad
from .baselines import (
    fit_power_law_exponents,
    greedy_allocate,
    survival_from_counts,
    uniform_allocate,
    zbpl_tail_table,
)
from .core import FractionalAllocation, ProblemDims, Rng, RoundOutcome, subgradient_bits


class ExpGradPolicy:
    """Continuous allocations from the exponentiated-gradient state.

    While every round carries the same volume, all touched unit rows receive
    identical updates and stay equal, so a single log-weight row represents
    the whole matrix; the full per-unit state is materialized only if the
    volume ever changes. Outputs are identical either way.
    """

    name = "expgrad"
    continuous = True

    def __init__(self, dims: ProblemDims, rng: Rng | None = None,
                 eta: float | None = None):
        self.dims = dims
        self.eta = expgrad.default_eta(dims) if eta is None else eta
        if not 0.0 < self.eta <= 1.0:
            raise ValueError(f"eta must lie in (0, 1], got {eta}")
        self._row = np.full(dims.n_venues, -np.log(dims.n_venues))
        self._row_volume: int | None = None  # constant volume seen so far
        self.state: expgrad.EgState | None = None  # set once volumes vary

    def _materialize(self) -> expgrad.EgState:
        state = expgrad.init(self.dims, self.eta)
        log_rows = state.weights.log_rows.copy()
        if self._row_volume:
            log_rows[: self._row_volume] = self._row
        return expgrad.EgState(
            weights=expgrad.WeightMatrix(log_rows), eta=self.eta
        )

    def propose(self, volume: int):
        if self.state is not None:
            return expgrad.allocate(self.state, volume)
        if self._row_volume in (None, volume):
            self._row_volume = volume
            return FractionalAllocation(volume * np.exp(self._row), volume)
        self.state = self._materialize()
        return expgrad.allocate(self.state, volume)

    def observe(self, outcome: RoundOutcome) -> None:
        if outcome.volume == 0:
            return
        bits = subgradient_bits(outcome)
        if self.state is not None:
            self.state = expgrad.update(self.state, bits, outcome.volume)
            return
        row = self._row + self.eta * bits
        row -= row.max()
        self._row = row - np.log(np.exp(row).sum())


class Exp3IntPolicy:
    """Integral allocations via randomized rounding plus bandit estimates."""

    continuous = False

    def __init__(
        self,
        dims: ProblemDims,
        rng: Rng,
        variance_corrected: bool = False,
        eta: float | None = None,
        gamma: float | None = None,
    ):
        self.name = "exp3int_hp" if variance_corrected else "exp3int"
        self.state = exp3int.init(
            dims, eta=eta, gamma=gamma, variance_corrected=variance_corrected
        )
        self.rng = rng
        self._plan: exp3int.RoundingPlan | None = None

    def propose(self, volume: int):
        played, self._plan = exp3int.propose(self.state, volume, self.rng)
        return played

    def observe(self, outcome: RoundOutcome) -> None:
        assert self._plan is not None, "observe() before propose()"
        self.state = exp3int.update(self.state, self._plan, outcome)
        self._plan = None


class OptKmPolicy:
    """Optimistic product-limit tails, greedy allocation.

    Keeps per-venue event counts instead of raw histories; the survival curve
    is recomputed from counts every round, which is exactly the batch
    estimator applied to the accumulated history.
    """

    name = "optkm"
    continuous = False

    def __init__(self, dims: ProblemDims, rng: Rng | None = None):
        depth = dims.max_volume
        self.deaths = np.zeros((dims.n_venues, depth + 1))
        self.censored = np.zeros((dims.n_venues, depth + 1))
        self._tails = survival_from_counts(self.deaths, self.censored)

    def propose(self, volume: int):
        return greedy_allocate(self._tails, volume)

    def observe(self, outcome: RoundOutcome) -> None:
        allocated = np.rint(outcome.allocation).astype(np.int64)
        consumed = np.rint(outcome.consumed).astype(np.int64)
        exact = consumed < allocated
        venues = np.flatnonzero(exact)
        self.deaths[venues, consumed[venues]] += 1
        censored = np.flatnonzero(~exact & (allocated >= 1))
        self.censored[censored, np.minimum(allocated[censored], self.censored.shape[1] - 1)] += 1
        # Survival rows are independent across venues; refresh the touched ones.
        touched = np.concatenate([venues, censored])
        if touched.size:
            self._tails[touched] = survival_from_counts(
                self.deaths[touched], self.censored[touched]
            )


class ParMlPolicy:
    """Zero-bin power-law MLE per venue, greedy allocation on model tails.

    The fit is a MAP estimate: every venue starts from ``prior_weight``
    pseudo-samples drawn at the middle of the liquidity-parameter regime the
    model is designed for, and the real censored observations are pooled on
    top. The prior is what keeps the allocator sane where data is thin. A bare
    MLE retires a venue forever after one observed zero, and a venue pinned at
    a one-unit allocation only ever produces full fills at one, which no
    exponent can explain better than another, so its tail estimate would stay
    frozen at whatever a handful of early samples said. With the prior those
    venues keep a plausible regime tail, stay competitive at the margin, and
    get re-measured whenever the fitted field around them weakens.

    Sufficient statistics are updated every round; the exponent search is
    refit every round while young and periodically afterwards, since the MAP
    barely moves per sample and the search dominates the cost.
    """

    name = "parml"
    continuous = False

    def __init__(
        self,
        dims: ProblemDims,
        rng: Rng | None = None,
        cap: int | None = None,
        prior: tuple[float, float] = (0.6, 1.85),
        prior_weight: float = 16.0,
        warmup: int = 50,
        refit_interval: int = 50,
    ):
        self.depth = dims.max_volume
        self.cap = cap if cap is not None else 2 * dims.max_volume
        self.prior_zero, self.prior_exponent = prior
        self.prior_weight = prior_weight
        units = np.arange(1, self.cap + 1, dtype=float)
        masses = units**-self.prior_exponent
        # Mean log-liquidity of a positive draw at the prior exponent; makes
        # the pseudo-samples ask the exponent search for the prior back.
        self._prior_mean_log = float((np.log(units) * masses).sum() / masses.sum())
        k = dims.n_venues
        self.n_zero = np.zeros(k)
        self.n_pos = np.zeros(k)
        self.sum_log = np.zeros(k)
        self.cens = np.zeros((k, self.depth + 1))
        self.warmup = warmup
        self.refit_interval = refit_interval
        self.rounds_seen = 0
        self._alloc_cache: dict[int, object] = {}
        self._tails = self._fit()

    def _fit(self) -> np.ndarray:
        pseudo_zero = self.prior_weight * self.prior_zero
        pseudo_pos = self.prior_weight * (1.0 - self.prior_zero)
        n_zero = self.n_zero + pseudo_zero
        n_pos = self.n_pos + pseudo_pos
        sum_log = self.sum_log + pseudo_pos * self._prior_mean_log
        informative = n_zero + n_pos + self.cens[:, 1:].sum(axis=1)
        zero_prob = n_zero / informative
        exponents = fit_power_law_exponents(sum_log, n_pos, self.cens, self.cap)
        self._alloc_cache = {}
        return zbpl_tail_table(zero_prob, exponents, self.cap, self.depth)

    def propose(self, volume: int):
        # Tails only move at refits, so the greedy result is reusable.
        cached = self._alloc_cache.get(volume)
        if cached is None:
            cached = greedy_allocate(self._tails, volume)
            self._alloc_cache[volume] = cached
        return cached

    def observe(self, outcome: RoundOutcome) -> None:
        allocated = np.rint(outcome.allocation).astype(np.int64)
        consumed = np.rint(outcome.consumed).astype(np.int64)
        exact = consumed < allocated
        self.n_zero += exact & (consumed == 0)
        positive = exact & (consumed > 0)
        self.n_pos += positive
        self.sum_log += np.where(positive, np.log(np.maximum(consumed, 1)), 0.0)
        venues = np.flatnonzero(~exact & (allocated >= 1))
        self.cens[venues, np.minimum(allocated[venues], self.depth)] += 1
        self.rounds_seen += 1
        if self.rounds_seen <= self.warmup or self.rounds_seen % self.refit_interval == 0:
            self._tails = self._fit()


class UniformPolicy:
    """Evenly split allocation; the calibration baseline."""

    name = "uniform"
    continuous = False

    def __init__(self, dims: ProblemDims, rng: Rng | None = None):
        self.n_venues = dims.n_venues

    def propose(self, volume: int):
        return uniform_allocate(volume, self.n_venues)

    def observe(self, outcome: RoundOutcome) -> None:
        pass


ALGORITHMS = {
    "expgrad": ExpGradPolicy,
    "exp3int": Exp3IntPolicy,
    "exp3int_hp": lambda dims, rng: Exp3IntPolicy(dims, rng, variance_corrected=True),
    "optkm": OptKmPolicy,
    "parml": ParMlPolicy,
    "uniform": UniformPolicy,
}


def make_policy(algorithm: str, dims: ProblemDims, rng: Rng):
    try:
        factory = ALGORITHMS[algorithm]
    except KeyError:
        raise ValueError(
            f"unknown algorithm {algorithm!r}; choose from {sorted(ALGORITHMS)}"
        ) from None
    return factory(dims, rng)
