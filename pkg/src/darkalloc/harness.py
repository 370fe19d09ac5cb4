"""Experiment runner: multi-trial execution, hindsight comparator, CSV and plots.

The harness is the only component that ever sees the uncensored liquidity
table. Algorithms receive RoundOutcome objects and nothing else; regret is
computed after the fact against the best fixed unit-to-venue assignment for
the realized environment.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from joblib import Parallel, delayed

from .core import ProblemDims, censor_feedback, substream
from .policies import ALGORITHMS, make_policy
from .simulator import EnvironmentStream, Scenario


@dataclass(frozen=True)
class ComparatorValue:
    """Best fixed unit-to-venue assignment for one realized environment."""

    assignment: np.ndarray  # (max_volume,) 0-based venue per unit slot
    value: float

    def unit_counts(self, n_venues: int) -> np.ndarray:
        return np.bincount(self.assignment, minlength=n_venues)


def hindsight_comparator(
    liquidities: np.ndarray, volumes: np.ndarray
) -> ComparatorValue:
    """Optimal fixed unit-to-venue assignment on the full (uncensored) trace.

    With a constant volume sequence only the per-venue unit counts matter and
    the objective is separable and concave in them, so the greedy rule (give
    the next unit to the largest marginal tail count, ties to the lowest
    venue) is exact. With varying volumes the slot positions matter too; the
    problem is then solved exactly as a maximum-weight assignment between
    slots and (venue, depth) pairs, whose weight kernel makes the monotone
    slot/depth pairing optimal within each venue.
    """
    liquidities = np.asarray(liquidities)
    volumes = np.asarray(volumes, dtype=np.int64)
    if liquidities.ndim != 2 or liquidities.shape[0] != len(volumes):
        raise ValueError("need a (rounds, venues) liquidity table matching volumes")
    if np.all(volumes == volumes[0]):
        return _greedy_comparator(liquidities, int(volumes[0]))
    return _matching_comparator(liquidities, volumes)


def _greedy_comparator(liquidities: np.ndarray, volume: int) -> ComparatorValue:
    k = liquidities.shape[1]
    clipped = np.minimum(liquidities, volume).astype(np.int64)
    hist = np.zeros((k, volume + 1), dtype=np.int64)
    np.add.at(hist, (np.arange(k)[:, None], clipped.T), 1)
    suffix = np.cumsum(hist[:, ::-1], axis=1)[:, ::-1]
    gains = suffix[:, 1:]  # gains[i, u-1] = #{t: s_i >= u}, nonincreasing in u
    flat = gains.reshape(-1)
    picks = np.argsort(-flat, kind="stable")[:volume]
    assignment = picks // volume
    value = float(flat[picks].sum())
    return ComparatorValue(assignment=assignment, value=value)


def _matching_comparator(
    liquidities: np.ndarray, volumes: np.ndarray
) -> ComparatorValue:
    from scipy.optimize import linear_sum_assignment

    t, k = liquidities.shape
    max_volume = int(volumes.max())
    clipped = np.minimum(liquidities, max_volume).astype(np.int64)
    # weights[i, v-1, u-1] = #{rounds: volume >= v and liquidity_i >= u}
    hist = np.zeros((k, max_volume + 1, max_volume + 1), dtype=np.int64)
    np.add.at(
        hist,
        (np.arange(k)[None, :], volumes[:, None], clipped),
        1,
    )
    suffix = hist[:, ::-1, :].cumsum(axis=1)[:, ::-1, :]
    suffix = suffix[:, :, ::-1].cumsum(axis=2)[:, :, ::-1]
    weights = suffix[:, 1:, 1:]
    # Rows: slots v = 1..V. Columns: (venue, depth) pairs.
    profit = weights.transpose(1, 0, 2).reshape(max_volume, k * max_volume)
    rows, cols = linear_sum_assignment(-profit)
    assignment = np.zeros(max_volume, dtype=np.int64)
    for slot, col in zip(rows, cols):
        assignment[slot] = col // max_volume
    value = float(assignment_round_rewards(assignment, liquidities, volumes).sum())
    return ComparatorValue(assignment=assignment, value=value)


def assignment_round_rewards(
    assignment: np.ndarray, liquidities: np.ndarray, volumes: np.ndarray
) -> np.ndarray:
    """Per-round reward of a fixed assignment, honoring the volume prefix."""
    liquidities = np.asarray(liquidities)
    volumes = np.asarray(volumes, dtype=np.int64)
    k = liquidities.shape[1]
    prefix = np.zeros((len(assignment) + 1, k), dtype=np.int64)
    for v, venue in enumerate(assignment, start=1):
        prefix[v] = prefix[v - 1]
        prefix[v, venue] += 1
    per_round_counts = prefix[volumes]
    return np.minimum(per_round_counts, liquidities).sum(axis=1)


def brute_force_comparator(
    liquidities: np.ndarray, volumes: np.ndarray
) -> ComparatorValue:
    """Exhaustive search over all K^V fixed assignments. Test oracle only."""
    liquidities = np.asarray(liquidities)
    volumes = np.asarray(volumes, dtype=np.int64)
    k = liquidities.shape[1]
    max_volume = int(volumes.max())
    best_value = -np.inf
    best_assignment = None
    for code in range(k**max_volume):
        assignment = np.empty(max_volume, dtype=np.int64)
        rem = code
        for v in range(max_volume):
            assignment[v] = rem % k
            rem //= k
        value = float(assignment_round_rewards(assignment, liquidities, volumes).sum())
        if value > best_value:
            best_value = value
            best_assignment = assignment
    assert best_assignment is not None
    return ComparatorValue(assignment=best_assignment, value=best_value)


@dataclass
class Trace:
    """Per-round, per-trial record plus cross-trial aggregates."""

    algorithm: str
    rounds: np.ndarray  # (T,) 1-based round numbers
    cum_rewards: np.ndarray  # (trials, T)
    alloc_mean: np.ndarray  # (T, K) mean allocation across trials
    regret: np.ndarray | None = None  # (trials, T)
    comparator_values: np.ndarray | None = None  # (trials,)

    @property
    def n_trials(self) -> int:
        return self.cum_rewards.shape[0]

    @property
    def mean_cum(self) -> np.ndarray:
        return self.cum_rewards.mean(axis=0)

    @property
    def stderr(self) -> np.ndarray:
        if self.n_trials < 2:
            return np.zeros(self.cum_rewards.shape[1])
        return self.cum_rewards.std(axis=0, ddof=1) / np.sqrt(self.n_trials)


def run_policy_on_stream(policy, stream: EnvironmentStream):
    """Drive one policy through one environment stream.

    Returns (rewards, allocations): per-round consumed totals and the played
    allocation snapshots. Only RoundOutcome objects cross into the policy.
    """
    if not stream.integer_valued and not getattr(policy, "continuous", False):
        raise ValueError(
            f"{policy.name} plays integral allocations; this stream is continuous-only"
        )
    t = stream.dims.horizon
    k = stream.dims.n_venues
    rewards = np.zeros(t)
    allocations = np.zeros((t, k))
    for i in range(t):
        volume = int(stream.volumes[i])
        alloc = policy.propose(volume)
        liquidities = stream.liquidities(i, alloc.shares)
        outcome = censor_feedback(alloc, liquidities)
        policy.observe(outcome)
        rewards[i] = float(outcome.consumed.sum())
        allocations[i] = outcome.allocation
    return rewards, allocations


def _run_trial(
    algorithm: str,
    scenario: Scenario,
    master_seed: int,
    trial: int,
    track_regret: bool,
):
    algo_rng = substream(master_seed, trial, 0)
    stream = scenario.environment_stream(trial)
    policy = make_policy(algorithm, scenario.dims, algo_rng)
    rewards, allocations = run_policy_on_stream(policy, stream)
    cum = np.cumsum(rewards)
    regret = None
    comp_value = np.nan
    if track_regret:
        comparator = hindsight_comparator(stream.table, stream.volumes)
        comp_rewards = assignment_round_rewards(
            comparator.assignment, stream.table, stream.volumes
        )
        regret = np.cumsum(comp_rewards) - cum
        comp_value = comparator.value
    return cum, allocations, regret, comp_value


#: Trials per parallel work item. Fixed so that the floating-point reduction
#: order, and therefore the output bytes, never depend on the worker count.
TRIAL_BLOCK = 25


def _run_trial_block(
    algorithm: str,
    scenario: Scenario,
    master_seed: int,
    trials: range,
    track_regret: bool,
):
    cum_block = []
    regret_block = []
    comp_values = []
    alloc_sum = np.zeros((scenario.dims.horizon, scenario.dims.n_venues))
    for trial in trials:
        cum, allocations, regret, comp_value = _run_trial(
            algorithm, scenario, master_seed, trial, track_regret
        )
        cum_block.append(cum)
        alloc_sum += allocations
        if track_regret:
            regret_block.append(regret)
            comp_values.append(comp_value)
    return np.array(cum_block), alloc_sum, np.array(regret_block), np.array(comp_values)


def run_experiment(
    algorithm: str,
    scenario: Scenario,
    trials: int,
    seed: int,
    n_jobs: int = 1,
    track_regret: bool = True,
) -> Trace:
    """Run ``trials`` independent trials and aggregate them in trial order.

    Environment streams derive from the scenario seed plus the trial counter,
    algorithm streams from the master seed plus the trial counter, and
    aggregation runs over fixed-size trial blocks in index order, so the
    result is a pure function of (algorithm, scenario, trials, seed)
    regardless of worker count.
    """
    if algorithm not in ALGORITHMS:
        raise ValueError(
            f"unknown algorithm {algorithm!r}; choose from {sorted(ALGORITHMS)}"
        )
    if trials < 1:
        raise ValueError("need at least one trial")
    blocks = [
        range(start, min(start + TRIAL_BLOCK, trials))
        for start in range(0, trials, TRIAL_BLOCK)
    ]
    if n_jobs == 1 or len(blocks) == 1:
        results = [
            _run_trial_block(algorithm, scenario, seed, block, track_regret)
            for block in blocks
        ]
    else:
        results = Parallel(n_jobs=n_jobs)(
            delayed(_run_trial_block)(algorithm, scenario, seed, block, track_regret)
            for block in blocks
        )
    t = scenario.dims.horizon
    k = scenario.dims.n_venues
    cum_rewards = np.concatenate([r[0] for r in results], axis=0)
    alloc_sum = np.zeros((t, k))
    for r in results:
        alloc_sum += r[1]
    regrets = None
    comp_values = None
    if track_regret:
        regrets = np.concatenate([r[2] for r in results], axis=0)
        comp_values = np.concatenate([r[3] for r in results])
    return Trace(
        algorithm=algorithm,
        rounds=np.arange(1, t + 1),
        cum_rewards=cum_rewards,
        alloc_mean=alloc_sum / trials,
        regret=regrets,
        comparator_values=comp_values,
    )


# ---------------------------------------------------------------------------
# Emission


def emit_csv(trace: Trace, path: str | Path) -> None:
    """Schema: round,algorithm,mean_cum_reward,stderr,mean_alloc_venue_1..K.

    Floats are written in shortest round-trip form, so re-importing the file
    reproduces the aggregates exactly and repeated runs are byte identical.
    """
    path = Path(path)
    k = trace.alloc_mean.shape[1]
    mean_cum = trace.mean_cum
    stderr = trace.stderr
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            ["round", "algorithm", "mean_cum_reward", "stderr"]
            + [f"mean_alloc_venue_{i + 1}" for i in range(k)]
        )
        for idx, round_no in enumerate(trace.rounds):
            writer.writerow(
                [int(round_no), trace.algorithm, repr(float(mean_cum[idx])),
                 repr(float(stderr[idx]))]
                + [repr(float(v)) for v in trace.alloc_mean[idx]]
            )


def read_csv(path: str | Path) -> dict[str, np.ndarray | list[str]]:
    """Load an emitted CSV back into arrays (used by tests and plotting)."""
    with Path(path).open() as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = list(reader)
    columns: dict[str, np.ndarray | list[str]] = {}
    for j, name in enumerate(header):
        values = [row[j] for row in rows]
        if name == "algorithm":
            columns[name] = values
        elif name == "round":
            columns[name] = np.array([int(v) for v in values])
        else:
            columns[name] = np.array([float(v) for v in values])
    return columns


def emit_plot(traces, path: str | Path, title: str | None = None) -> None:
    """Cumulative mean reward per algorithm with error bars every T/20 rounds."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    if isinstance(traces, Trace):
        traces = [traces]
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for trace in traces:
        t = len(trace.rounds)
        marks = np.arange(0, t, max(1, t // 20))
        ax.plot(trace.rounds, trace.mean_cum, label=trace.algorithm)
        ax.errorbar(
            trace.rounds[marks],
            trace.mean_cum[marks],
            yerr=trace.stderr[marks],
            fmt="none",
            capsize=2,
        )
    ax.set_xlabel("round")
    ax.set_ylabel("mean cumulative reward (shares)")
    if title:
        ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
