"""Seeded round-by-round sampling of one experimenter's records.

Quantum theory assigns no joint distribution to (r, z, x, w), so a
trajectory only ever records the outcomes of one reference view.  W is the
default and the only view whose record can meet the halting criterion.

Each trajectory gets its own PCG64 stream derived from ``(seed, index)``,
so batches are reproducible and can be split across workers freely.
"""
from __future__ import annotations

from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .protocol import VIEWS, ProtocolSpec, check_distribution, view_distribution

DEFAULT_MAX_ROUNDS = 10_000
MAX_ROUNDS_LIMIT = 10_000
_FIRST_BLOCK = 32


def stream(seed: int, index: int = 0) -> np.random.Generator:
    """Independent generator for trajectory ``index`` of a seeded batch."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(index,))))


@dataclass(frozen=True)
class Trajectory:
    rounds: tuple[Any, ...]
    halted_at: int | None
    seed: int
    index: int = 0
    view: str = "W"

    @property
    def halted(self) -> bool:
        return self.halted_at is not None

    def as_dict(self) -> dict[str, Any]:
        return {
            "view": self.view,
            "seed": self.seed,
            "index": self.index,
            "halted_at": self.halted_at,
            "non_halting": not self.halted,
            "rounds": [list(r) if isinstance(r, tuple) else r for r in self.rounds],
        }


class _Sampler:
    """Inverse-CDF sampler over one view's outcome distribution."""

    def __init__(self, spec: ProtocolSpec, view: str) -> None:
        if view not in VIEWS:
            raise ValueError(f"unknown view {view!r}")
        dist = view_distribution(spec, view)
        check_distribution(dist)
        self.view = view
        self.outcomes = list(dist)
        probs = np.array([dist[o] for o in self.outcomes], dtype=float)
        self.cdf = np.cumsum(probs)
        self.cdf[-1] = 1.0
        self.halt_index = (
            self.outcomes.index(spec.halt_pair) if view == "W" and dist[spec.halt_pair] > 0 else -1
        )

    def run(self, seed: int, index: int, max_rounds: int) -> tuple[np.ndarray, int | None]:
        rng = stream(seed, index)
        drawn: list[np.ndarray] = []
        total = 0
        block = _FIRST_BLOCK
        while total < max_rounds:
            size = min(block, max_rounds - total)
            idx = np.searchsorted(self.cdf, rng.random(size), side="right")
            if self.halt_index >= 0:
                hits = np.flatnonzero(idx == self.halt_index)
                if hits.size:
                    drawn.append(idx[: hits[0] + 1])
                    return np.concatenate(drawn), total + int(hits[0])
            drawn.append(idx)
            total += size
            block *= 2
        return np.concatenate(drawn), None


def _check_rounds(max_rounds: int) -> None:
    if not isinstance(max_rounds, (int, np.integer)) or not 1 <= max_rounds <= MAX_ROUNDS_LIMIT:
        raise ValueError(f"max_rounds must be in [1, {MAX_ROUNDS_LIMIT}], got {max_rounds!r}")


def run_trajectory(
    spec: ProtocolSpec,
    seed: int,
    max_rounds: int = DEFAULT_MAX_ROUNDS,
    view: str = "W",
    index: int = 0,
) -> Trajectory:
    """Sample rounds until the halting pair comes up or ``max_rounds`` pass.

    ``halted_at`` is the 0-based index of the halting round.  For F1 and F2 a
    round record is the pair ``(r, outcome)``.
    """
    _check_rounds(max_rounds)
    sampler = _Sampler(spec, view)
    idx, halted_at = sampler.run(seed, index, max_rounds)
    return Trajectory(tuple(sampler.outcomes[i] for i in idx), halted_at, seed, index, view)


@dataclass(frozen=True)
class HaltingStats:
    trials: int
    seed: int
    max_rounds: int
    halted: int
    total_rounds: int
    histogram: dict[int, int] = field(default_factory=dict)
    exact_p: float = float("nan")

    @property
    def non_halting(self) -> int:
        return self.trials - self.halted

    @property
    def empirical_p(self) -> float:
        """Fraction of sampled rounds that met the halting criterion."""
        return self.halted / self.total_rounds if self.total_rounds else float("nan")

    @property
    def mean_halt_round(self) -> float:
        """Mean 1-based round of halting, over trajectories that halted."""
        if not self.halted:
            return float("nan")
        return sum(k * c for k, c in self.histogram.items()) / self.halted

    @property
    def sigma(self) -> float:
        """Binomial standard error of ``empirical_p`` about ``exact_p``."""
        p = self.exact_p
        return float(np.sqrt(p * (1 - p) / self.total_rounds)) if self.total_rounds else float("nan")

    def as_dict(self) -> dict[str, Any]:
        return {
            "trials": self.trials,
            "seed": self.seed,
            "max_rounds": self.max_rounds,
            "halted": self.halted,
            "non_halting": self.non_halting,
            "total_rounds": self.total_rounds,
            "empirical_p": self.empirical_p,
            "exact_p": self.exact_p,
            "sigma": self.sigma,
            "mean_halt_round": self.mean_halt_round,
            "histogram": {str(k): v for k, v in sorted(self.histogram.items())},
        }


def _halting_chunk(spec: ProtocolSpec, seed: int, start: int, stop: int, max_rounds: int) -> tuple[int, int, Counter]:
    sampler = _Sampler(spec, "W")
    halted = total = 0
    hist: Counter = Counter()
    for i in range(start, stop):
        idx, at = sampler.run(seed, i, max_rounds)
        total += len(idx)
        if at is not None:
            halted += 1
            hist[at + 1] += 1
    return halted, total, hist


def halting_stats(
    spec: ProtocolSpec,
    trials: int,
    seed: int,
    max_rounds: int = DEFAULT_MAX_ROUNDS,
    workers: int = 1,
) -> HaltingStats:
    """Run ``trials`` W trajectories and summarise when they halt.

    With ``workers > 1`` index ranges are farmed out to processes and merged
    in index order, so the result does not depend on ``workers``.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    _check_rounds(max_rounds)
    if workers <= 1 or trials < 2 * workers:
        parts = [_halting_chunk(spec, seed, 0, trials, max_rounds)]
    else:
        bounds = np.linspace(0, trials, workers + 1).astype(int)
        with ProcessPoolExecutor(workers) as pool:
            futs = [
                pool.submit(_halting_chunk, spec, seed, int(a), int(b), max_rounds)
                for a, b in zip(bounds[:-1], bounds[1:])
            ]
            parts = [f.result() for f in futs]
    halted = sum(p[0] for p in parts)
    total = sum(p[1] for p in parts)
    hist: Counter = Counter()
    for p in parts:
        hist.update(p[2])
    exact = view_distribution(spec, "W")[spec.halt_pair]
    return HaltingStats(trials, seed, max_rounds, halted, total, dict(sorted(hist.items())), exact)


def outcome_counts(
    spec: ProtocolSpec, view: str, trials: int, seed: int, rounds: int
) -> dict[Any, int]:
    """Outcome histogram over ``trials`` trajectories of exactly ``rounds`` rounds.

    Halting is ignored, so every round is an independent draw from the view's
    distribution.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    _check_rounds(rounds)
    sampler = _Sampler(spec, view)
    sampler.halt_index = -1
    counts = np.zeros(len(sampler.outcomes), dtype=np.int64)
    for i in range(trials):
        idx, _ = sampler.run(seed, i, rounds)
        counts += np.bincount(idx, minlength=len(counts))
    return {o: int(c) for o, c in zip(sampler.outcomes, counts)}
