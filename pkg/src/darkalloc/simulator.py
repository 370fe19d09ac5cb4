"""Environment generation: liquidity scenarios and per-trial streams.

A Scenario is a reproducible description of the adversary: problem dimensions,
the per-round volume sequence, and per-venue piecewise-constant liquidity
models. Oblivious streams pre-draw the whole liquidity table from an
environment stream derived only from the scenario seed; adaptive streams
compute liquidities from the allocation just played.

Scenario files are line oriented: ``key = value`` pairs for the header and
one ``[segment]`` block per venue segment. See the README for the grammar.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .core import ProblemDims, Rng, make_rng, substream
from .liquidity import (
    LiquidityParams,
    TwoPointParams,
    ZbplParams,
    sample_liquidity,
    zbpl_sample,  # noqa: F401  (re-exported: the sampling surface of this module)
)


@dataclass(frozen=True)
class Segment:
    """One stretch of rounds governed by a single liquidity model."""

    start: int  # 1-based, inclusive
    end: int  # inclusive
    params: LiquidityParams

    def __post_init__(self) -> None:
        if self.start < 1 or self.end < self.start:
            raise ValueError(f"bad segment bounds [{self.start}, {self.end}]")


@dataclass(frozen=True)
class Scenario:
    dims: ProblemDims
    volumes: np.ndarray  # (horizon,)
    schedules: tuple[tuple[Segment, ...], ...]  # per venue
    kind: str  # iid | switching | lower_bound
    seed: int

    def __post_init__(self) -> None:
        volumes = np.asarray(self.volumes, dtype=np.int64)
        object.__setattr__(self, "volumes", volumes)
        t = self.dims.horizon
        if volumes.shape != (t,):
            raise ValueError(f"volume sequence must have length {t}")
        if np.any(volumes < 1) or np.any(volumes > self.dims.max_volume):
            raise ValueError("volumes must lie in [1, max_volume]")
        if len(self.schedules) != self.dims.n_venues:
            raise ValueError("need one schedule per venue")
        for venue, segments in enumerate(self.schedules):
            cursor = 1
            for seg in segments:
                if seg.start != cursor:
                    raise ValueError(
                        f"venue {venue + 1}: segment starts at {seg.start}, "
                        f"expected {cursor}"
                    )
                cursor = seg.end + 1
            if cursor != t + 1:
                raise ValueError(f"venue {venue + 1}: schedule does not cover 1..{t}")

    def params_at(self, venue: int, t: int) -> LiquidityParams:
        """Liquidity model for 1-based round ``t`` at 0-based ``venue``."""
        for seg in self.schedules[venue]:
            if seg.start <= t <= seg.end:
                return seg.params
        raise IndexError(f"round {t} outside the schedule")

    def draw_liquidities(self, rng: Rng) -> np.ndarray:
        """Pre-draw the full (horizon, venues) liquidity table.

        Draw order is fixed (venue-major, then segment order) so a given
        stream always yields the same table.
        """
        table = np.zeros((self.dims.horizon, self.dims.n_venues), dtype=np.int64)
        for venue, segments in enumerate(self.schedules):
            for seg in segments:
                n = seg.end - seg.start + 1
                table[seg.start - 1 : seg.end, venue] = sample_liquidity(
                    seg.params, rng, size=n
                )
        return table

    def environment_stream(self, trial: int) -> "EnvironmentStream":
        """Oblivious stream for one trial; depends only on the scenario seed."""
        env_rng = substream(self.seed, trial, 1)
        return EnvironmentStream(
            dims=self.dims,
            volumes=self.volumes,
            table=self.draw_liquidities(env_rng),
        )


@dataclass
class EnvironmentStream:
    """Per-trial source of (volume, liquidity) pairs.

    Oblivious streams carry a pre-drawn table and ignore the played
    allocation; adaptive streams compute liquidities from it.
    """

    dims: ProblemDims
    volumes: np.ndarray
    table: np.ndarray | None = None
    callback: Callable[[int, np.ndarray], np.ndarray] | None = None
    integer_valued: bool = True

    @property
    def mode(self) -> str:
        return "oblivious" if self.table is not None else "adaptive"

    def liquidities(self, t: int, played_shares: np.ndarray) -> np.ndarray:
        if self.table is not None:
            return self.table[t]
        assert self.callback is not None
        return self.callback(t, played_shares)


def _constant_volumes(dims: ProblemDims) -> np.ndarray:
    return np.full(dims.horizon, dims.max_volume, dtype=np.int64)


def _whole_run(dims: ProblemDims, params: LiquidityParams) -> tuple[Segment, ...]:
    return (Segment(1, dims.horizon, params),)


def make_iid48(
    seed: int, max_volume: int = 80, horizon: int = 2000, n_venues: int = 48
) -> Scenario:
    """Stationary benchmark: many venues, parameters drawn once per venue.

    Zero-bin probabilities land in [0.3, 0.9] and exponents in [1.2, 2.5];
    the cap is twice the volume bound; the volume sequence is constant.
    """
    dims = ProblemDims(n_venues=n_venues, max_volume=max_volume, horizon=horizon)
    rng = make_rng(np.random.SeedSequence(seed, spawn_key=(0,)))
    schedules = []
    for _ in range(n_venues):
        params = ZbplParams(
            zero_prob=float(rng.uniform(0.3, 0.9)),
            exponent=float(rng.uniform(1.2, 2.5)),
            cap=2 * max_volume,
        )
        schedules.append(_whole_run(dims, params))
    return Scenario(
        dims=dims,
        volumes=_constant_volumes(dims),
        schedules=tuple(schedules),
        kind="iid",
        seed=seed,
    )


#: Parameter pairs (zero_prob, exponent) used by the switching scenarios.
FAVORABLE = (0.2, 1.3)
UNFAVORABLE = (0.85, 3.5)


def make_two_venue_switch(
    seed: int,
    max_volume: int = 20,
    horizon: int = 25000,
    switch_at: int = 12500,
) -> Scenario:
    """Two venues whose good/bad roles swap after ``switch_at`` rounds."""
    dims = ProblemDims(n_venues=2, max_volume=max_volume, horizon=horizon)
    cap = 2 * max_volume
    good = ZbplParams(FAVORABLE[0], FAVORABLE[1], cap)
    bad = ZbplParams(UNFAVORABLE[0], UNFAVORABLE[1], cap)
    first = Segment(1, switch_at, good), Segment(switch_at + 1, horizon, bad)
    second = Segment(1, switch_at, bad), Segment(switch_at + 1, horizon, good)
    return Scenario(
        dims=dims,
        volumes=_constant_volumes(dims),
        schedules=(first, second),
        kind="switching",
        seed=seed,
    )


def make_five_venue(
    seed: int,
    volume: int = 200,
    horizon: int = 10000,
    period: int = 2500,
) -> Scenario:
    """Five venues with oscillating exponents.

    Venues 1 and 5 swing between extreme exponents in opposite phase; venues
    2..4 swing between milder values with alternating starting phases. The
    zero-bin probability stays fixed so only the tail weight moves.
    """
    dims = ProblemDims(n_venues=5, max_volume=volume, horizon=horizon)
    cap = 2 * volume
    extreme = (1.1, 3.5)
    mild = (1.6, 2.4)
    zero_prob = 0.3

    def oscillating(values: tuple[float, float], phase: int) -> tuple[Segment, ...]:
        segments = []
        start = 1
        block = phase
        while start <= horizon:
            end = min(start + period - 1, horizon)
            beta = values[block % 2]
            segments.append(Segment(start, end, ZbplParams(zero_prob, beta, cap)))
            start = end + 1
            block += 1
        return tuple(segments)

    schedules = (
        oscillating(extreme, 0),
        oscillating(mild, 0),
        oscillating(mild, 1),
        oscillating(mild, 0),
        oscillating(extreme, 1),
    )
    return Scenario(
        dims=dims,
        volumes=_constant_volumes(dims),
        schedules=schedules,
        kind="switching",
        seed=seed,
    )


def default_lower_bound_epsilon(n_venues: int, max_volume: int, horizon: int) -> float:
    """The advantage that makes the family hardest: c sqrt(K/(TV)) with c = 1/4."""
    return 0.25 * math.sqrt(n_venues / (horizon * max_volume))


def make_lower_bound(
    n_venues: int,
    max_volume: int,
    horizon: int,
    epsilon: float | None = None,
    seed: int = 0,
) -> Scenario:
    """All-or-nothing venues: liquidity V with probability 1/2, except one
    uniformly chosen favored venue where it is 1/2 + epsilon."""
    if epsilon is None:
        epsilon = default_lower_bound_epsilon(n_venues, max_volume, horizon)
    if not 0.0 <= epsilon < 0.5:
        raise ValueError(f"epsilon must lie in [0, 1/2), got {epsilon}")
    dims = ProblemDims(n_venues=n_venues, max_volume=max_volume, horizon=horizon)
    rng = make_rng(np.random.SeedSequence(seed, spawn_key=(0,)))
    favored = int(rng.integers(n_venues))
    schedules = []
    for venue in range(n_venues):
        prob = 0.5 + epsilon if venue == favored else 0.5
        schedules.append(_whole_run(dims, TwoPointParams(top=max_volume, top_prob=prob)))
    return Scenario(
        dims=dims,
        volumes=_constant_volumes(dims),
        schedules=tuple(schedules),
        kind="lower_bound",
        seed=seed,
    )


def make_two_armed(
    seed: int, means: tuple[float, float] = (0.5, 0.6), horizon: int = 50000
) -> Scenario:
    """Unit-volume two-venue problem with Bernoulli liquidities."""
    dims = ProblemDims(n_venues=2, max_volume=1, horizon=horizon)
    schedules = tuple(
        _whole_run(dims, TwoPointParams(top=1, top_prob=float(mean))) for mean in means
    )
    return Scenario(
        dims=dims,
        volumes=_constant_volumes(dims),
        schedules=schedules,
        kind="iid",
        seed=seed,
    )


def make_experts_reduction(rewards: np.ndarray, max_volume: int) -> EnvironmentStream:
    """Adaptive stream that makes full-information reward vectors look like
    liquidities: s_i = reward_i * allocation_i, rewards scaled to [0, 1].

    Liquidities here are real valued, so the stream is only meaningful for
    continuous-allocation algorithms; integral ones must reject it.
    """
    rewards = np.asarray(rewards, dtype=float)
    if rewards.ndim != 2 or rewards.shape[1] < 2:
        raise ValueError("rewards must be (rounds, venues) with >= 2 venues")
    if np.any(rewards < 0.0) or np.any(rewards > 1.0):
        raise ValueError("rewards must lie in [0, 1]")
    horizon, n_venues = rewards.shape
    dims = ProblemDims(n_venues=n_venues, max_volume=max_volume, horizon=horizon)

    def liquidity(t: int, played_shares: np.ndarray) -> np.ndarray:
        return rewards[t] * played_shares

    return EnvironmentStream(
        dims=dims,
        volumes=_constant_volumes(dims),
        callback=liquidity,
        integer_valued=False,
    )


# ---------------------------------------------------------------------------
# Scenario config files


def _params_lines(params: LiquidityParams) -> list[str]:
    if isinstance(params, ZbplParams):
        return [
            "model = zbpl",
            f"zero_prob = {params.zero_prob!r}",
            f"exponent = {params.exponent!r}",
            f"cap = {params.cap}",
        ]
    return [
        "model = two_point",
        f"top = {params.top}",
        f"top_prob = {params.top_prob!r}",
    ]


def scenario_to_config(scenario: Scenario) -> str:
    lines = [
        f"kind = {scenario.kind}",
        f"seed = {scenario.seed}",
        f"venues = {scenario.dims.n_venues}",
        f"max_volume = {scenario.dims.max_volume}",
        f"horizon = {scenario.dims.horizon}",
    ]
    volumes = scenario.volumes
    if np.all(volumes == volumes[0]):
        lines.append(f"volume = {int(volumes[0])}")
    else:
        lines.append("volumes = " + ",".join(str(int(v)) for v in volumes))
    for venue, segments in enumerate(scenario.schedules):
        for seg in segments:
            lines.append("")
            lines.append("[segment]")
            lines.append(f"venue = {venue + 1}")
            lines.append(f"start = {seg.start}")
            lines.append(f"end = {seg.end}")
            lines.extend(_params_lines(seg.params))
    return "\n".join(lines) + "\n"


def _parse_blocks(text: str) -> tuple[dict, list[dict]]:
    header: dict = {}
    blocks: list[dict] = []
    current = header
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line == "[segment]":
            current = {}
            blocks.append(current)
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key in current:
            raise ValueError(f"line {lineno}: duplicate key {key!r}")
        current[key] = value
    return header, blocks


def _segment_from_block(block: dict) -> tuple[int, Segment]:
    venue = int(block["venue"])
    model = block.get("model", "zbpl")
    if model == "zbpl":
        params: LiquidityParams = ZbplParams(
            zero_prob=float(block["zero_prob"]),
            exponent=float(block["exponent"]),
            cap=int(block["cap"]),
        )
    elif model == "two_point":
        params = TwoPointParams(top=int(block["top"]), top_prob=float(block["top_prob"]))
    else:
        raise ValueError(f"unknown liquidity model {model!r}")
    return venue - 1, Segment(int(block["start"]), int(block["end"]), params)


def scenario_from_config(text: str) -> Scenario:
    header, blocks = _parse_blocks(text)
    try:
        dims = ProblemDims(
            n_venues=int(header["venues"]),
            max_volume=int(header["max_volume"]),
            horizon=int(header["horizon"]),
        )
        kind = header.get("kind", "iid")
        seed = int(header.get("seed", 0))
        if "volumes" in header:
            volumes = np.array([int(v) for v in header["volumes"].split(",")])
        else:
            volumes = np.full(dims.horizon, int(header["volume"]), dtype=np.int64)
    except KeyError as missing:
        raise ValueError(f"scenario header is missing {missing}") from None
    per_venue: list[list[Segment]] = [[] for _ in range(dims.n_venues)]
    for block in blocks:
        venue, segment = _segment_from_block(block)
        if not 0 <= venue < dims.n_venues:
            raise ValueError(f"segment names venue {venue + 1}, have {dims.n_venues}")
        per_venue[venue].append(segment)
    schedules = tuple(
        tuple(sorted(segments, key=lambda s: s.start)) for segments in per_venue
    )
    return Scenario(dims=dims, volumes=volumes, schedules=schedules, kind=kind, seed=seed)


def save_scenario(scenario: Scenario, path: str | Path) -> None:
    Path(path).write_text(scenario_to_config(scenario))


def load_scenario(path: str | Path) -> Scenario:
    return scenario_from_config(Path(path).read_text())


#: Builtin scenarios reachable by name from the CLI; each takes the master seed.
BUILTIN_SCENARIOS: dict[str, Callable[[int], Scenario]] = {
    "iid48": make_iid48,
    "two_venue_switch": make_two_venue_switch,
    "five_venue": make_five_venue,
    "five_venue_v400": lambda seed: make_five_venue(seed, volume=400),
    "lower_bound": lambda seed: make_lower_bound(4, 4, 20000, seed=seed),
    "two_armed": make_two_armed,
}


def resolve_scenario(spec: str, seed: int) -> Scenario:
    """A builtin name gets built with the given seed; otherwise load a file."""
    if spec in BUILTIN_SCENARIOS:
        return BUILTIN_SCENARIOS[spec](seed)
    path = Path(spec)
    if path.exists():
        return load_scenario(path)
    raise ValueError(
        f"unknown scenario {spec!r}: not a builtin "
        f"({', '.join(sorted(BUILTIN_SCENARIOS))}) and no such file"
    )
