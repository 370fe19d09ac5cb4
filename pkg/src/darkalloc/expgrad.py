"""Exponentiated gradient over a product of per-unit simplices.

Each unit of volume carries its own distribution over venues; the round's
allocation to venue i is the sum of that venue's probabilities over the first
V_t unit rows. Feedback is the censor bit per venue, broadcast to every active
unit row and applied multiplicatively: x <- x * exp(eta * g), renormalized.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .core import FractionalAllocation, ProblemDims, WeightMatrix


@dataclass(frozen=True)
class EgState:
    weights: WeightMatrix
    eta: float


def default_eta(dims: ProblemDims) -> float:
    """Horizon-tuned learning rate sqrt(ln K / ((e-2) T)), capped at 1."""
    raw = math.sqrt(math.log(dims.n_venues) / ((math.e - 2.0) * dims.horizon))
    return min(1.0, raw)


def init(dims: ProblemDims, eta: float | None = None) -> EgState:
    """Uniform 1/K start for every unit row."""
    if eta is None:
        eta = default_eta(dims)
    if not 0.0 < eta <= 1.0:
        raise ValueError(f"eta must lie in (0, 1], got {eta}")
    return EgState(weights=WeightMatrix.uniform(dims), eta=eta)


def allocate(state: EgState, volume: int) -> FractionalAllocation:
    """Sum the first ``volume`` unit rows into a per-venue share vector."""
    if not 0 <= volume <= state.weights.max_volume:
        raise ValueError(
            f"volume {volume} outside [0, {state.weights.max_volume}]"
        )
    return FractionalAllocation(state.weights.allocation(volume), volume)


def update(state: EgState, censor_bits: np.ndarray, volume: int) -> EgState:
    """Reweight the first ``volume`` rows by exp(eta * bit), renormalize.

    Rows beyond the round volume would receive a zero gradient, so they are
    simply left untouched. A zero-volume round is a no-op.
    """
    if volume == 0:
        return state
    bits = np.asarray(censor_bits, dtype=float)
    step = np.broadcast_to(state.eta * bits, (volume, state.weights.n_venues))
    return replace(state, weights=state.weights.exp_reweighted(step))
