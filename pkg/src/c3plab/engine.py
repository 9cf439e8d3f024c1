"""Deterministic discrete-event core: virtual clock, one FIFO compute queue
per helper, channel transit for task packets, receipt ACKs and result
returns, and busy/idle accounting.

Schedulers are pure state machines driven through a small callback contract;
identical (world, scheduler, seed) always reproduces the same trace. Packet
runtimes and channel delays come from per-(helper, purpose) tapes, so two
schedulers run under the same seed consume identical values by index.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from heapq import heappush, heappop
from typing import Any

import numpy as np

from .workload import (
    STREAM_BETA,
    STREAM_DOWN_ACK,
    STREAM_DOWN_RESULT,
    STREAM_UP,
    HelperProfile,
    PacketSizes,
    channel_delay_block,
    make_stream,
    runtime_block,
)

EV_SEND = 0
EV_ARRIVE = 1
EV_ACK = 2
EV_DONE = 3
EV_RESULT = 4
EV_TIMEOUT = 5

EVENT_NAMES = ("send", "arrive", "ack", "done", "result", "timeout")

TAPE_BLOCK = 64
DEFAULT_EVENT_CAP = 100_000_000


class EngineConfigError(ValueError):
    """World is structurally unusable (no helpers, bad cap)."""


class ContractViolationError(RuntimeError):
    """Scheduler broke the callback contract (unknown helper, past send,
    no stop before the event queue drained)."""


class EventBudgetError(RuntimeError):
    """Event count exceeded the configured cap."""


class TapeExhaustedError(RuntimeError):
    """A finite replay tape ran out of values."""


class BetaTape:
    """Per-helper runtime sequence; value i is fixed by the seed alone, so
    peeking ahead never disturbs determinism."""

    def __init__(self, profile: HelperProfile, rng: np.random.Generator | None,
                 fixed: list[float] | None = None):
        self._profile = profile
        self._rng = rng
        self._fixed = None if fixed is None else [float(b) for b in fixed]
        self._values: list[float] = []

    def peek(self, i: int) -> float:
        if self._fixed is not None:
            if i >= len(self._fixed):
                raise TapeExhaustedError(
                    f"helper {self._profile.helper_id} runtime tape ended at {len(self._fixed)}")
            return self._fixed[i]
        while i >= len(self._values):
            grow = max(TAPE_BLOCK, i + 1 - len(self._values))
            self._values.extend(runtime_block(self._profile, self._rng, grow))
        return self._values[i]


class DelayTape:
    """Per-(helper, purpose) channel delays for one fixed packet size."""

    def __init__(self, bits: float, profile: HelperProfile, rng: np.random.Generator):
        self._bits = bits
        self._profile = profile
        self._rng = rng
        self._values: list[float] = []

    def peek(self, i: int) -> float:
        while i >= len(self._values):
            grow = max(TAPE_BLOCK, i + 1 - len(self._values))
            self._values.extend(channel_delay_block(self._bits, self._profile, self._rng, grow))
        return self._values[i]


@dataclass
class EngineWorld:
    profiles: list[HelperProfile]
    sizes: PacketSizes
    run_seed: int = 0
    event_cap: int = DEFAULT_EVENT_CAP
    beta_tapes: list[list[float]] | None = None

    def __post_init__(self):
        if not self.profiles:
            raise EngineConfigError("at least one helper required")
        if self.event_cap <= 0:
            raise EngineConfigError("event cap must be positive")
        if self.beta_tapes is not None and len(self.beta_tapes) != len(self.profiles):
            raise EngineConfigError("one replay tape per helper required")


class PacketRecord:
    """Lifecycle timestamps of one dispatched packet."""

    __slots__ = ("uid", "helper", "send_idx", "payload", "tx", "arrival",
                 "start", "end", "result_time", "beta", "d_ack", "d_result",
                 "consumed")

    def __init__(self, uid: int, helper: int, send_idx: int, payload: Any,
                 tx: float, d_ack: float, d_result: float):
        self.uid = uid
        self.helper = helper
        self.send_idx = send_idx
        self.payload = payload
        self.tx = tx
        self.arrival = None
        self.start = None
        self.end = None
        self.result_time = None
        self.beta = None
        self.d_ack = d_ack
        self.d_result = d_result
        self.consumed = False


@dataclass(frozen=True)
class Actions:
    """What a scheduler wants done after a callback. arm_send and
    arm_timeout each keep at most one live entry per helper; arming again
    supersedes the old one via generation counters."""

    send_now: tuple = ()
    arm_send: tuple = ()
    arm_timeout: tuple = ()
    stop: bool = False


NO_ACTIONS = Actions()


class Scheduler:
    """Base contract; callbacks return Actions. on_send_slot additionally
    returns the payload to dispatch (None sends nothing)."""

    name = "base"

    def bind(self, world: EngineWorld, tapes: list[BetaTape]) -> None:
        pass

    def on_start(self) -> Actions:
        return NO_ACTIONS

    def on_send_slot(self, t: float, helper: int) -> tuple[Any, Actions]:
        return None, NO_ACTIONS

    def on_transmission_ack(self, t: float, helper: int, pkt: PacketRecord) -> Actions:
        return NO_ACTIONS

    def on_result(self, t: float, helper: int, pkt: PacketRecord) -> Actions:
        return NO_ACTIONS

    def on_timeout(self, t: float, helper: int) -> Actions:
        return NO_ACTIONS

    def result_counts(self) -> list[int]:
        raise NotImplementedError

    def k_actual(self) -> int:
        return 0


@dataclass
class RunMetrics:
    scheduler: str
    seed: int
    t_total: float
    r_n: list[int]
    k_actual: int
    sent: int
    delivered: int
    waste: int
    busy: list[float]
    idle: list[float]
    computed: list[int]
    efficiency: list[float]
    first_start: list[float | None]
    last_end: list[float | None]
    event_count: int

    @property
    def consumed_total(self) -> int:
        return sum(self.r_n)

    @property
    def mean_efficiency(self) -> float:
        vals = [e for e in self.efficiency if not np.isnan(e)]
        return float(np.mean(vals)) if vals else float("nan")

    @property
    def min_efficiency(self) -> float:
        vals = [e for e in self.efficiency if not np.isnan(e)]
        return float(np.min(vals)) if vals else float("nan")


@dataclass
class RunTrace:
    records: list[list[PacketRecord]]
    events: list[tuple[float, int, str, int]]


def build_tapes(world: EngineWorld, profiles: list[HelperProfile]) -> list[BetaTape]:
    if world.beta_tapes is not None:
        return [BetaTape(p, None, fixed=world.beta_tapes[n])
                for n, p in enumerate(profiles)]
    return [BetaTape(p, make_stream(world.run_seed, n, STREAM_BETA))
            for n, p in enumerate(profiles)]


def run(world: EngineWorld, scheduler: Scheduler,
        trace: bool = False) -> tuple[RunMetrics, RunTrace]:
    """Drive the scheduler until it declares stop; in-flight events past the
    stopping event are discarded."""
    # Profiles are copied so fixed-runtime caching never leaks across runs.
    profiles = [dataclasses.replace(p) for p in world.profiles]
    n_helpers = len(profiles)
    sizes = world.sizes
    seed = world.run_seed

    tapes = build_tapes(world, profiles)
    up_tapes = [DelayTape(sizes.bx, p, make_stream(seed, n, STREAM_UP))
                for n, p in enumerate(profiles)]
    ack_tapes = [DelayTape(sizes.back, p, make_stream(seed, n, STREAM_DOWN_ACK))
                 for n, p in enumerate(profiles)]
    result_tapes = [DelayTape(sizes.br, p, make_stream(seed, n, STREAM_DOWN_RESULT))
                    for n, p in enumerate(profiles)]

    heap: list = []
    seq = 0
    send_gen = [0] * n_helpers
    timeout_gen = [0] * n_helpers
    send_count = [0] * n_helpers
    compute_count = [0] * n_helpers
    busy = [0.0] * n_helpers
    idle = [0.0] * n_helpers
    first_start: list[float | None] = [None] * n_helpers
    prev_end: list[float | None] = [None] * n_helpers
    queues: list[list[PacketRecord]] = [[] for _ in range(n_helpers)]
    q_heads = [0] * n_helpers
    computing: list[PacketRecord | None] = [None] * n_helpers
    records: list[list[PacketRecord]] = [[] for _ in range(n_helpers)]
    events_out: list[tuple[float, int, str, int]] = []
    uid = 0
    delivered = 0
    now = 0.0

    def push(time: float, kind: int, helper: int, aux: Any) -> None:
        nonlocal seq
        heappush(heap, (time, seq, kind, helper, aux))
        seq += 1

    def dispatch(t: float, helper: Any, payload: Any) -> None:
        nonlocal uid
        if not isinstance(helper, (int, np.integer)) or not 0 <= helper < n_helpers:
            raise ContractViolationError(f"unknown helper {helper!r}")
        idx = send_count[helper]
        send_count[helper] = idx + 1
        rec = PacketRecord(uid, helper, idx, payload, t,
                           ack_tapes[helper].peek(idx),
                           result_tapes[helper].peek(idx))
        uid += 1
        records[helper].append(rec)
        if trace:
            events_out.append((t, helper, "send", rec.uid))
        push(t + up_tapes[helper].peek(idx), EV_ARRIVE, helper, rec)

    def start_compute(t: float, helper: int, rec: PacketRecord) -> None:
        rec.start = t
        beta = tapes[helper].peek(compute_count[helper])
        compute_count[helper] += 1
        rec.beta = beta
        if first_start[helper] is None:
            first_start[helper] = t
        if prev_end[helper] is not None:
            idle[helper] += t - prev_end[helper]
        computing[helper] = rec
        push(t + beta, EV_DONE, helper, rec)

    def apply(t: float, actions: Actions) -> bool:
        for helper, payload in actions.send_now:
            dispatch(t, helper, payload)
        for helper, when in actions.arm_send:
            if when < t:
                raise ContractViolationError(
                    f"send for helper {helper} armed at {when} before now {t}")
            if not 0 <= helper < n_helpers:
                raise ContractViolationError(f"unknown helper {helper!r}")
            send_gen[helper] += 1
            push(when, EV_SEND, helper, send_gen[helper])
        for helper, when in actions.arm_timeout:
            if when < t:
                raise ContractViolationError(
                    f"timeout for helper {helper} armed at {when} before now {t}")
            if not 0 <= helper < n_helpers:
                raise ContractViolationError(f"unknown helper {helper!r}")
            timeout_gen[helper] += 1
            push(when, EV_TIMEOUT, helper, timeout_gen[helper])
        return actions.stop

    scheduler.bind(world, tapes)
    stopped = apply(0.0, scheduler.on_start())
    event_count = 0
    cap = world.event_cap

    while heap and not stopped:
        now, _, kind, helper, aux = heappop(heap)
        event_count += 1
        if event_count > cap:
            raise EventBudgetError(f"exceeded event cap {cap}")

        if kind == EV_ARRIVE:
            rec = aux
            rec.arrival = now
            if trace:
                events_out.append((now, helper, "arrive", rec.uid))
            push(now + rec.d_ack, EV_ACK, helper, rec)
            if computing[helper] is None:
                start_compute(now, helper, rec)
            else:
                queues[helper].append(rec)
        elif kind == EV_DONE:
            rec = aux
            rec.end = now
            busy[helper] += now - rec.start
            prev_end[helper] = now
            computing[helper] = None
            if trace:
                events_out.append((now, helper, "done", rec.uid))
            q = queues[helper]
            if q_heads[helper] < len(q):
                nxt = q[q_heads[helper]]
                q_heads[helper] += 1
                start_compute(now, helper, nxt)
            push(now + rec.d_result, EV_RESULT, helper, rec)
        elif kind == EV_RESULT:
            rec = aux
            rec.result_time = now
            delivered += 1
            if trace:
                events_out.append((now, helper, "result", rec.uid))
            stopped = apply(now, scheduler.on_result(now, helper, rec))
        elif kind == EV_ACK:
            rec = aux
            if trace:
                events_out.append((now, helper, "ack", rec.uid))
            stopped = apply(now, scheduler.on_transmission_ack(now, helper, rec))
        elif kind == EV_SEND:
            if aux != send_gen[helper]:
                continue
            payload, actions = scheduler.on_send_slot(now, helper)
            if payload is not None:
                dispatch(now, helper, payload)
            stopped = apply(now, actions)
        else:  # EV_TIMEOUT
            if aux != timeout_gen[helper]:
                continue
            if trace:
                events_out.append((now, helper, "timeout", -1))
            stopped = apply(now, scheduler.on_timeout(now, helper))

    if not stopped:
        raise ContractViolationError("event queue drained before scheduler stop")

    r_n = scheduler.result_counts()
    efficiency = []
    for n in range(n_helpers):
        span = busy[n] + idle[n]
        efficiency.append(busy[n] / span if span > 0 else float("nan"))
    metrics = RunMetrics(
        scheduler=scheduler.name,
        seed=seed,
        t_total=now,
        r_n=list(r_n),
        k_actual=scheduler.k_actual(),
        sent=sum(send_count),
        delivered=delivered,
        waste=sum(send_count) - sum(r_n),
        busy=busy,
        idle=idle,
        computed=list(compute_count),
        efficiency=efficiency,
        first_start=first_start,
        last_end=list(prev_end),
        event_count=event_count,
    )
    return metrics, RunTrace(records=records, events=events_out)


def ground_truth_idle(run_trace: RunTrace, helper: int) -> tuple[list[float], float]:
    """Per-packet idle gaps in compute order and their sum; gap i is the wait
    between finishing computation i-1 and starting computation i."""
    done = sorted((r for r in run_trace.records[helper] if r.end is not None),
                  key=lambda r: r.start)
    gaps = [max(0.0, b.start - a.end) for a, b in zip(done, done[1:])]
    return gaps, sum(gaps)


class FixedCadenceScheduler(Scheduler):
    """Reference sender: one packet to each helper every `interval` seconds,
    no timeouts, stop after `target` results. Exists for closed-form model
    checks that assume a constant send cadence."""

    name = "fixed_cadence"

    def __init__(self, n_helpers: int, interval: float, target: int):
        if interval <= 0 or target < 1:
            raise EngineConfigError("interval and target must be positive")
        self.n = n_helpers
        self.interval = interval
        self.target = target
        self.counts = [0] * n_helpers
        self.total = 0

    def on_start(self) -> Actions:
        return Actions(send_now=tuple((h, "coded") for h in range(self.n)),
                       arm_send=tuple((h, self.interval) for h in range(self.n)))

    def on_send_slot(self, t, helper):
        return "coded", Actions(arm_send=((helper, t + self.interval),))

    def on_result(self, t, helper, pkt):
        pkt.consumed = True
        self.counts[helper] += 1
        self.total += 1
        return Actions(stop=self.total >= self.target)

    def result_counts(self):
        return list(self.counts)
