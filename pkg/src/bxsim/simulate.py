"""Seeded round-by-round simulation of the exchange protocol.

Randomness contract (golden traces depend on it):

* The stream is numpy's PCG64 behind ``np.random.Generator``, seeded from
  ``SimConfig.seed``.
* Each round consumes, in order: one uniform per node (ascending node id)
  for the initiation timers, then one uniform per eligible responder
  (ascending node id) for the response timers.  A uniform is consumed even
  when the node's rate is zero.
* A uniform u in [0, 1) becomes the timer -log(1 - u)/rate, i.e. inverse-CDF
  sampling with U = 1 - u in (0, 1]; rate 0 yields the NEVER sentinel
  (math.inf), which loses every minimum.

Ties in sampled timers (possible in floating point, probability zero in the
model) are broken toward the lowest node id.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Iterator

import numpy as np

from .errors import NegativeRateError, StallError
from .model import Metrics, RoundOutcome, Scenario, StrategyProfile, require_valid

NEVER = math.inf

TRACE_HEADER = ["round", "initiator", "responder", "t_init", "t_resp", "duration"]


def sample_exponential(rate: float, rng: np.random.Generator) -> float:
    """One exponential timer with the given rate.

    Always consumes exactly one uniform so that scalar and vectorized
    sampling walk the stream identically; rate 0 returns NEVER.
    """
    if rate < 0:
        raise NegativeRateError(f"cannot sample a timer at rate {rate}")
    u = rng.random()
    if rate == 0.0:
        return NEVER
    return -math.log1p(-u) / rate


def sample_exponentials(rates: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Vector version of sample_exponential (one uniform per entry)."""
    if np.any(rates < 0):
        raise NegativeRateError("cannot sample timers at negative rates")
    u = rng.random(rates.shape[0])
    with np.errstate(divide="ignore"):
        return np.where(rates > 0.0, -np.log1p(-u) / np.where(rates > 0.0, rates, 1.0), NEVER)


@dataclass(frozen=True)
class SimConfig:
    scenario: Scenario
    profile: StrategyProfile
    rounds: int
    seed: int = 0
    coded: bool = False


class RoundEngine:
    """Precomputed per-scenario machinery for playing rounds quickly."""

    def __init__(self, scenario: Scenario, profile: StrategyProfile, coded: bool):
        require_valid(scenario)
        self.scenario = scenario
        self.coded = coded
        n = scenario.n_nodes
        self.gamma = np.array(profile.gamma, dtype=float)
        if self.gamma.shape != (n,):
            raise ValueError("profile gamma length must match the node count")
        if np.any(self.gamma < 0):
            raise NegativeRateError("profile has a negative initiation rate")
        needs = scenario.needs
        # Per file X: ids of the nodes that possess X, and their response rates.
        self.responders: list[np.ndarray] = []
        self.resp_rates: list[np.ndarray] = []
        self.need_mask: list[np.ndarray] = []
        for x in range(scenario.files):
            ids = np.flatnonzero(needs != x)
            rates = np.array([profile.response_rate(int(m), x) for m in ids])
            if np.any(rates < 0):
                raise NegativeRateError(f"profile has a negative response rate for file {x}")
            self.responders.append(ids)
            self.resp_rates.append(rates)
            self.need_mask.append((needs == x).astype(np.int64))
        self.all_ones = np.ones(n, dtype=np.int64)

    def play(self, rng: np.random.Generator) -> tuple[int, int, float, float]:
        """One round: returns (initiator, responder, t_init, t_resp)."""
        t = sample_exponentials(self.gamma, rng)
        i0 = int(np.argmin(t))
        t_init = float(t[i0])
        if not math.isfinite(t_init):
            raise StallError("no node can initiate: all initiation rates are zero")
        x = int(self.scenario.needs[i0])
        ids = self.responders[x]
        th = sample_exponentials(self.resp_rates[x], rng)
        j = int(np.argmin(th))
        t_resp = float(th[j])
        if not math.isfinite(t_resp):
            raise StallError(f"no eligible responder for file {x} has a positive rate")
        return i0, int(ids[j]), t_init, t_resp

    def downloads_for(self, initiator: int, responder: int) -> np.ndarray:
        """Per-node download counts for a round won by (initiator, responder)."""
        if self.coded:
            return self.all_ones.copy()
        x = int(self.scenario.needs[initiator])
        y = int(self.scenario.needs[responder])
        return self.need_mask[x] + self.need_mask[y]

    def outcome(self, initiator: int, responder: int, t_init: float, t_resp: float) -> RoundOutcome:
        uploads = np.zeros(self.scenario.n_nodes, dtype=np.int64)
        uploads[initiator] += 1
        uploads[responder] += 1
        return RoundOutcome(
            initiator=initiator,
            responder=responder,
            initiation_duration=t_init,
            response_duration=t_resp,
            downloads=self.downloads_for(initiator, responder),
            uploads=uploads,
        )


def run_round(
    s: Scenario, profile: StrategyProfile, coded: bool, rng: np.random.Generator
) -> RoundOutcome:
    """Play a single round; mostly useful for tests and inspection.

    For long runs use run_simulation, which reuses the precomputed engine.
    Both consume the random stream identically.
    """
    engine = RoundEngine(s, profile, coded)
    return engine.outcome(*engine.play(rng))


def iter_rounds(cfg: SimConfig) -> Iterator[RoundOutcome]:
    """Round outcomes of a run, as a generator (one RNG stream per call)."""
    engine = RoundEngine(cfg.scenario, cfg.profile, cfg.coded)
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    for _ in range(cfg.rounds):
        yield engine.outcome(*engine.play(rng))


def run_simulation(cfg: SimConfig, trace_path: str | Path | None = None) -> Metrics:
    """Run the configured number of rounds and accumulate Metrics.

    Identical seeds give identical metrics and traces.  When trace_path is
    given, one CSV row per round is streamed out (columns: round, initiator,
    responder, t_init, t_resp, duration).
    """
    if cfg.rounds < 1:
        raise ValueError("rounds must be >= 1")
    engine = RoundEngine(cfg.scenario, cfg.profile, cfg.coded)
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    metrics = Metrics(cfg.scenario)

    trace_file: IO[str] | None = None
    writer = None
    if trace_path is not None:
        trace_file = open(trace_path, "w", newline="")
        writer = csv.writer(trace_file)
        writer.writerow(TRACE_HEADER)
    try:
        for r in range(cfg.rounds):
            i0, j0, t_init, t_resp = engine.play(rng)
            metrics.downloads += engine.downloads_for(i0, j0)
            metrics.uploads[i0] += 1
            metrics.uploads[j0] += 1
            metrics.elapsed += t_init + t_resp + 2.0
            metrics.rounds += 1
            if writer is not None:
                writer.writerow(
                    [r, i0, j0]
                    + [f"{v:.9g}" for v in (t_init, t_resp, t_init + t_resp + 2.0)]
                )
    finally:
        if trace_file is not None:
            trace_file.close()
    return metrics
