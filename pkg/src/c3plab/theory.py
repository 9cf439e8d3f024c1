"""Closed-form performance predictors and their numeric verifiers.

Everything here is a pure function of helper parameters. The simulation
engine never calls into this module; tests and the verifier battery compare
the two against each other.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

MC_CHUNK_ROWS = 200_000


class TheoryInputError(ValueError):
    """Raised when a predictor is called outside its parameter domain."""


def _check_means(mean_betas) -> list[float]:
    means = [float(b) for b in mean_betas]
    if not means:
        raise TheoryInputError("need at least one helper mean")
    if any(b <= 0 for b in means):
        raise TheoryInputError("mean runtimes must be positive")
    return means


def harmonic_speed(mean_betas) -> float:
    """Aggregate service speed: sum of per-helper rates 1/E[beta]."""
    return sum(1.0 / b for b in _check_means(mean_betas))


def predict_t_c3p(mean_betas, R: int, K: int) -> float:
    """Completion-time approximation for the adaptive collector: R + K
    results drained at the helpers' combined mean speed."""
    if R < 1 or K < 0:
        raise TheoryInputError("need R >= 1 and K >= 0")
    return (R + K) / harmonic_speed(mean_betas)


def predict_r_c3p(mean_betas, R: int, K: int) -> list[float]:
    """Expected per-helper result counts under the same approximation;
    fractional, sums to R + K."""
    if R < 1 or K < 0:
        raise TheoryInputError("need R >= 1 and K >= 0")
    means = _check_means(mean_betas)
    speed = harmonic_speed(means)
    return [(R + K) / (b * speed) for b in means]


def expected_tu(mu: float, a: float, rtt_data: float) -> float:
    """Worst-case mean idle time per packet for one helper.

    The next packet leaves when the previous result lands, so the helper
    idles for the shortfall of the previous runtime below its mean, capped
    by the data round trip. The shift a cancels; only the exponential
    spread matters. Zero round trip means the replacement packet is already
    there, hence zero idle.
    """
    if mu <= 0:
        raise TheoryInputError("mu must be positive")
    if a < 0 or rtt_data < 0:
        raise TheoryInputError("a and rtt_data must be non-negative")
    if rtt_data < 1.0 / mu:
        return (1.0 - math.exp(mu * rtt_data)) / (math.e * mu) + rtt_data
    return 1.0 / (math.e * mu)


def expected_tu_mc(mu: float, a: float, rtt_data: float, samples: int,
                   rng: np.random.Generator) -> float:
    """Monte-Carlo counterpart of expected_tu: draw runtimes, idle for the
    capped shortfall below the mean."""
    if samples < 1:
        raise TheoryInputError("samples must be positive")
    if mu <= 0 or a < 0 or rtt_data < 0:
        raise TheoryInputError("invalid (mu, a, rtt_data)")
    mean_beta = a + 1.0 / mu
    total = 0.0
    left = samples
    while left > 0:
        n = min(left, MC_CHUNK_ROWS * 8)
        beta = a + rng.exponential(1.0 / mu, size=n)
        total += float(np.clip(mean_beta - beta, 0.0, rtt_data).sum())
        left -= n
    return total / samples


def efficiency_theoretical(mu: float, a: float, rtt_data: float) -> float:
    """Worst-case fraction of helper time spent computing: one minus the
    mean idle per packet over the mean runtime."""
    return 1.0 - expected_tu(mu, a, rtt_data) / (a + 1.0 / mu)


def tq_trace(betas, mean_beta: float) -> list[float]:
    """Helper-side queueing waits when packets arrive spaced by the mean
    runtime. Entry i is the wait of packet i+1; the first packet never
    waits. Output has len(betas) + 1 entries."""
    if mean_beta <= 0:
        raise TheoryInputError("mean_beta must be positive")
    tq = [0.0]
    for b in betas:
        tq.append(max(float(b) - mean_beta + tq[-1], 0.0))
    return tq


def tu_model(betas, mean_beta: float, rtt_data: float = math.inf) -> list[float]:
    """Helper idle time before each packet under mean-spaced arrivals.

    Entry i is the idle absorbed just before computing packet i+1: the
    previous runtime's shortfall below the mean, first eaten by any queue
    backlog, then capped by the data round trip. rtt_data=inf gives the
    uncapped worst case."""
    if mean_beta <= 0:
        raise TheoryInputError("mean_beta must be positive")
    if rtt_data < 0:
        raise TheoryInputError("rtt_data must be non-negative")
    tq = tq_trace(betas, mean_beta)
    tu = [0.0]
    for i, b in enumerate(betas):
        gap = max(max(0.0, mean_beta - float(b)) - tq[i], 0.0)
        tu.append(min(gap, rtt_data))
    return tu


def idle_event_check(betas, mean_beta: float) -> bool:
    """Exact condition for the next packet to find the helper idle under
    mean-spaced arrivals: every suffix of the runtimes so far finished
    ahead of its mean-paced budget."""
    if mean_beta <= 0:
        raise TheoryInputError("mean_beta must be positive")
    seq = [float(b) for b in betas]
    if not seq:
        raise TheoryInputError("need at least one runtime")
    acc = 0.0
    for k, b in enumerate(reversed(seq), start=1):
        acc += b
        if acc >= k * mean_beta:
            return False
    return True


def pr_tu_positive_mc(i: int, mu: float, a: float, samples: int,
                      rng: np.random.Generator) -> float:
    """Monte-Carlo probability that packet i+1 finds the helper idle
    (uncapped worst case), evaluated through the exact suffix condition."""
    if i < 1:
        raise TheoryInputError("i must be at least 1")
    if samples < 1:
        raise TheoryInputError("samples must be positive")
    if mu <= 0 or a < 0:
        raise TheoryInputError("invalid (mu, a)")
    mean_beta = a + 1.0 / mu
    budgets = mean_beta * np.arange(1, i + 1)
    hits = 0
    left = samples
    while left > 0:
        n = min(left, max(1, MC_CHUNK_ROWS // i))
        draws = a + rng.exponential(1.0 / mu, size=(n, i))
        suffix = np.cumsum(draws[:, ::-1], axis=1)
        hits += int(np.all(suffix < budgets, axis=1).sum())
        left -= n
    return hits / samples


@dataclass(frozen=True)
class TheoryPrediction:
    """Bundle of closed-form predictions for one helper population."""

    t_static: float
    t_c3p: float
    r_c3p: list[float]
    expected_tu: list[float]
    gamma: list[float]


def predict_bundle(mus, a_values, rtts, R: int, K: int) -> TheoryPrediction:
    if not (len(mus) == len(a_values) == len(rtts)):
        raise TheoryInputError("mus, a_values, rtts must align")
    means = [a + 1.0 / mu for mu, a in zip(mus, a_values)]
    speed = harmonic_speed(means)
    return TheoryPrediction(
        t_static=R / speed,
        t_c3p=predict_t_c3p(means, R, K),
        r_c3p=predict_r_c3p(means, R, K),
        expected_tu=[expected_tu(mu, a, rtt)
                     for mu, a, rtt in zip(mus, a_values, rtts)],
        gamma=[efficiency_theoretical(mu, a, rtt)
               for mu, a, rtt in zip(mus, a_values, rtts)],
    )
