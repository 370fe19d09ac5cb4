"""Fixed-size subset sampling with prescribed inclusion marginals.

Given fractions q_1..q_K in [0,1) whose sum is an integer m, `sample_subset`
draws an m-element subset with P(i in subset) = q_i exactly, by pairwise
pivotal rounding: two fractional coordinates exchange probability mass until
one of them settles at 0 or 1, with the transfer direction randomized so that
each coordinate's expectation never moves. At most K-1 exchanges settle
everything.

`greedy_distribution` instead builds the distribution explicitly: a sparse
convex combination of m-subsets whose marginals approach q, grown one vertex
at a time (best subset for the current residual, exact line search on the
squared residual).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Rng

#: How far the fraction sum may sit from an integer before we refuse to snap.
SUM_ATOL = 1e-7


@dataclass(frozen=True)
class MarginalVector:
    """Fractional inclusion probabilities with an integer total."""

    fractions: np.ndarray
    size: int  # integer value of fractions.sum()

    @classmethod
    def from_fractions(cls, fractions, atol: float = SUM_ATOL) -> "MarginalVector":
        fractions = np.asarray(fractions, dtype=float)
        if np.any(fractions < 0.0) or np.any(fractions >= 1.0):
            raise ValueError("fractions must lie in [0, 1)")
        total = float(fractions.sum())
        size = int(round(total))
        if abs(total - size) > atol:
            raise ValueError(
                f"fraction sum {total!r} is {abs(total - size):.2e} from an integer"
            )
        return cls(fractions=fractions, size=size)


def sample_subset(marginals: MarginalVector, rng: Rng) -> np.ndarray:
    """Draw a subset of exactly ``marginals.size`` venue indices.

    Inclusion probabilities match ``marginals.fractions`` exactly; a zero
    fraction is never sampled. Size zero returns the empty set without
    consuming randomness.
    """
    m = marginals.size
    if m == 0:
        return np.empty(0, dtype=np.int64)
    p = marginals.fractions.tolist()
    # Exact zeros are settled already; everything else is in (0, 1). The
    # pending list is consumed lowest index first, which keeps the exchange
    # order deterministic under a fixed stream.
    pending = [i for i, v in enumerate(p) if v > 0.0]
    uniform = rng.random(max(len(pending) - 1, 0))
    n_draws = 0
    i = pending[0] if pending else -1
    cursor = 1
    while cursor < len(pending):
        j = pending[cursor]
        cursor += 1
        pi, pj = p[i], p[j]
        up = min(1.0 - pi, pj)  # raise i / lower j by this much
        down = min(pi, 1.0 - pj)  # lower i / raise j by this much
        if uniform[n_draws] * (up + down) < down:
            # Raise i with probability down/(up+down) so E[p_i] never moves.
            if 1.0 - pi <= pj:
                p[i], p[j] = 1.0, pj - (1.0 - pi)
            else:
                p[i], p[j] = pi + pj, 0.0
        else:
            if pi <= 1.0 - pj:
                p[i], p[j] = 0.0, pj + pi
            else:
                p[i], p[j] = pi - (1.0 - pj), 1.0
        n_draws += 1
        # Carry forward whichever of the pair is still fractional.
        if 0.0 < p[i] < 1.0:
            pass
        elif 0.0 < p[j] < 1.0:
            i = j
        elif cursor < len(pending):
            i = pending[cursor]
            cursor += 1
    if i >= 0 and 0.0 < p[i] < 1.0:
        # Float dust: the conserved sum forces the lone leftover to be within
        # rounding error of 0 or 1.
        p[i] = float(round(p[i]))
    chosen = np.flatnonzero(np.asarray(p) > 0.5)
    if len(chosen) != m:
        raise RuntimeError(
            f"pivotal rounding settled {len(chosen)} coordinates, expected {m}"
        )
    return chosen


def mix_exploration(
    marginals: MarginalVector, gamma: float, n_venues: int | None = None
) -> MarginalVector:
    """Blend towards the uniform size-m marginals: (1-g) q_i + g m/K.

    Keeps the integer total exactly, and with gamma > 0 and m >= 1 bounds
    every entry below by gamma m / K, which is what keeps importance weights
    finite downstream.
    """
    if not 0.0 <= gamma <= 0.5:
        raise ValueError(f"gamma must lie in [0, 1/2], got {gamma}")
    if n_venues is None:
        n_venues = len(marginals.fractions)
    mixed = (1.0 - gamma) * marginals.fractions + gamma * marginals.size / n_venues
    return MarginalVector(fractions=mixed, size=marginals.size)


@dataclass(frozen=True)
class SubsetDistribution:
    """Sparse distribution over m-subsets plus its marginal error."""

    atoms: tuple[tuple[tuple[int, ...], float], ...]
    residual: np.ndarray  # achieved marginals minus requested, per element

    def marginals(self) -> np.ndarray:
        k = len(self.residual)
        out = np.zeros(k)
        for subset, prob in self.atoms:
            out[list(subset)] += prob
        return out


def greedy_distribution(
    marginals: MarginalVector, max_atoms: int, tol: float = 1e-12
) -> SubsetDistribution:
    """Grow a convex combination of m-subsets matching the marginals.

    Each step adds (or reinforces) the single best subset for the current
    residual, which is just the m largest residual coordinates, then takes the
    exact line-search step on the squared marginal error. The error norm after
    n steps is at most 2 sqrt(2m / n), so ``max_atoms`` bounds both the
    support size and the residual. Best effort: never raises on slow progress.
    """
    if max_atoms < 1:
        raise ValueError("max_atoms must be >= 1")
    q = marginals.fractions
    m = marginals.size
    k = len(q)
    if m == 0:
        dist = SubsetDistribution(atoms=(((), 1.0),), residual=np.zeros(k) - q)
        return dist
    weights: dict[tuple[int, ...], float] = {}
    achieved = np.zeros(k)
    for _ in range(max_atoms):
        gap = q - achieved
        if float(np.sqrt(gap @ gap)) <= tol and weights:
            break
        # Ties break toward the lowest index: stable sort on the negated gap.
        order = np.argsort(-gap, kind="stable")[:m]
        subset = tuple(sorted(int(i) for i in order))
        vertex = np.zeros(k)
        vertex[list(subset)] = 1.0
        direction = vertex - achieved
        denom = float(direction @ direction)
        if denom == 0.0:
            weights = {subset: 1.0}
            achieved = vertex
            break
        step = float(np.clip((gap @ direction) / denom, 0.0, 1.0))
        if not weights:
            step = 1.0
        for key in weights:
            weights[key] *= 1.0 - step
        weights[subset] = weights.get(subset, 0.0) + step
        achieved = (1.0 - step) * achieved + step * vertex
    total = sum(weights.values())
    atoms = tuple(
        (subset, prob / total)
        for subset, prob in sorted(weights.items())
        if prob / total > 0.0
    )
    exact = np.zeros(k)
    for subset, prob in atoms:
        exact[list(subset)] += prob
    return SubsetDistribution(atoms=atoms, residual=exact - q)
