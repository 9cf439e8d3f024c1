"""Helper runtime and channel-delay generation.

Runtimes follow a shifted exponential: Pr(beta < t) = 1 - exp(-mu*(t - a)).
Two scenarios: per-packet i.i.d. draws, or one draw per helper reused for
every packet. Channel rates are Poisson in whole Mbps around a per-helper
mean, floored to avoid division by zero; fixed-rate and zero-delay channels
cover deterministic replays. Units are seconds and bits throughout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MBPS = 1e6

# Scenario labels.
PER_PACKET_IID = "iid"
FIXED_PER_HELPER = "fixed"

# Channel kinds.
CH_POISSON = "poisson"
CH_FIXED = "fixed"
CH_ZERO = "zero"

DEFAULT_RATE_FLOOR = 0.1 * MBPS

# Independent substream tags per (run, helper).
STREAM_BETA = 0
STREAM_PROFILE = 1
STREAM_UP = 2
STREAM_DOWN_RESULT = 3
STREAM_DOWN_ACK = 4
STREAM_CODEC = 5


class WorkloadConfigError(ValueError):
    """Invalid profile, size, or sampling parameter."""


def make_stream(run_seed: int, helper_id: int, tag: int) -> np.random.Generator:
    """One PCG64 stream per (run, helper, purpose); draw order within a
    purpose never shifts across schedulers, which is what couples runs."""
    return np.random.Generator(np.random.PCG64(
        np.random.SeedSequence(entropy=(run_seed, helper_id, tag))))


@dataclass(frozen=True)
class PacketSizes:
    bx: float
    br: float
    back: float

    def __post_init__(self):
        if min(self.bx, self.br, self.back) <= 0:
            raise WorkloadConfigError("packet sizes must be positive bits")


def matched_sizes(R: int) -> PacketSizes:
    """Task packet scales with the row count; result and receipt stay small."""
    return PacketSizes(bx=8.0 * R, br=8.0, back=1.0)


@dataclass
class HelperProfile:
    """Per-helper statistical identity; fixed_beta caches the one draw a
    fixed-runtime helper reuses for every packet."""

    helper_id: int
    a: float
    mu: float
    scenario: str = PER_PACKET_IID
    channel_kind: str = CH_ZERO
    channel_mean_rate: float = 0.0
    rate_floor: float = DEFAULT_RATE_FLOOR
    fixed_beta: float | None = None

    def __post_init__(self):
        if self.a < 0:
            raise WorkloadConfigError("shift a must be >= 0")
        if self.mu <= 0:
            raise WorkloadConfigError("rate mu must be > 0")
        if self.scenario not in (PER_PACKET_IID, FIXED_PER_HELPER):
            raise WorkloadConfigError(f"unknown scenario {self.scenario!r}")
        if self.channel_kind not in (CH_POISSON, CH_FIXED, CH_ZERO):
            raise WorkloadConfigError(f"unknown channel kind {self.channel_kind!r}")
        if self.channel_kind != CH_ZERO and self.channel_mean_rate <= 0:
            raise WorkloadConfigError("channel rate must be > 0 bits/s")

    @property
    def mean_runtime(self) -> float:
        return self.a + 1.0 / self.mu


def sample_runtime(profile: HelperProfile, rng: np.random.Generator) -> float:
    """One compute time; fixed-runtime helpers draw once and replay it."""
    if profile.scenario == FIXED_PER_HELPER:
        if profile.fixed_beta is None:
            profile.fixed_beta = profile.a + rng.exponential(1.0 / profile.mu)
        return profile.fixed_beta
    return profile.a + rng.exponential(1.0 / profile.mu)


def runtime_block(profile: HelperProfile, rng: np.random.Generator,
                  n: int) -> np.ndarray:
    """n runtimes in tape order; equals n sample_runtime draws in law."""
    if profile.scenario == FIXED_PER_HELPER:
        return np.full(n, sample_runtime(profile, rng))
    return profile.a + rng.exponential(1.0 / profile.mu, size=n)


def sample_channel_delay(bits: float, profile: HelperProfile,
                         rng: np.random.Generator) -> float:
    if bits <= 0:
        raise WorkloadConfigError("bits must be positive")
    if profile.channel_kind == CH_ZERO:
        return 0.0
    if profile.channel_kind == CH_FIXED:
        return bits / profile.channel_mean_rate
    c = rng.poisson(profile.channel_mean_rate / MBPS)
    return bits / max(c * MBPS, profile.rate_floor)


def channel_delay_block(bits: float, profile: HelperProfile,
                        rng: np.random.Generator, n: int) -> np.ndarray:
    if bits <= 0:
        raise WorkloadConfigError("bits must be positive")
    if profile.channel_kind == CH_ZERO:
        return np.zeros(n)
    if profile.channel_kind == CH_FIXED:
        return np.full(n, bits / profile.channel_mean_rate)
    c = rng.poisson(profile.channel_mean_rate / MBPS, size=n)
    return bits / np.maximum(c * MBPS, profile.rate_floor)


def rtt_data_true(sizes: PacketSizes, up_rate: float, down_rate: float) -> float:
    """Ground-truth round trip of one task packet and its result."""
    if up_rate <= 0 or down_rate <= 0:
        raise WorkloadConfigError("rates must be positive")
    return sizes.bx / up_rate + sizes.br / down_rate
