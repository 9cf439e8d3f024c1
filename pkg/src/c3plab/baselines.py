"""Comparison schedulers: static coded allocation, the perfect-knowledge
pacing oracle, uncoded proportional assignment, repetition round-robin, and
a block-coded static stand-in (labeled hcmm_like, excluded from any
quantitative claims).
"""

from __future__ import annotations

from dataclasses import dataclass

from .c3p import (
    ALPHA_DEFAULT,
    ESTIMATOR_INFERRED,
    ESTIMATOR_TIMESTAMPED,
    PAYLOAD_CODED,
    CollectorHelperState,
    CountStop,
    add_reported_beta,
    infer_rtt_data,
    infer_update_on_result,
    on_timeout,
    stop_condition,
    tti_update,
)
from .engine import Actions, EngineWorld, RunMetrics, RunTrace, Scheduler, run
from .workload import PacketSizes


class AllocationError(ValueError):
    """Invalid inputs to an allocation formula."""


def largest_remainder(shares: list[float], total: int) -> list[int]:
    """Round real shares (summing to total) to integers preserving the sum;
    each result differs from its share by less than 1."""
    base = [int(s) for s in shares]
    fractions = sorted(range(len(shares)),
                       key=lambda i: (base[i] - shares[i], i))
    short = total - sum(base)
    out = list(base)
    for i in fractions[:short]:
        out[i] += 1
    return out


@dataclass(frozen=True)
class StaticAllocation:
    r_n: list[int]
    t_static: float


def static_allocate(mean_betas: list[float], R: int) -> StaticAllocation:
    """Split R packets inversely to mean runtime; the slot count is chosen so
    every helper finishes at the same predicted moment."""
    if not mean_betas or min(mean_betas) <= 0:
        raise AllocationError("mean runtimes must be positive")
    harmonic = sum(1.0 / b for b in mean_betas)
    shares = [R / (b * harmonic) for b in mean_betas]
    return StaticAllocation(r_n=largest_remainder(shares, R),
                            t_static=R / harmonic)


class SalvoScheduler(Scheduler):
    """Sends a fixed per-helper batch at t=0 and waits for the stop rule."""

    def __init__(self, name: str, payloads: list[list], stop_rule):
        self.name = name
        self.payloads = payloads
        self.stop_rule = stop_rule
        self.counts = [0] * len(payloads)

    def on_start(self) -> Actions:
        send_now = tuple((h, p) for h, batch in enumerate(self.payloads)
                         for p in batch)
        return Actions(send_now=send_now, stop=stop_condition(self.stop_rule))

    def on_result(self, t, helper, pkt):
        pkt.consumed = True
        self.counts[helper] += 1
        self.stop_rule.add(pkt)
        return Actions(stop=stop_condition(self.stop_rule))

    def result_counts(self):
        return list(self.counts)

    def k_actual(self):
        return self.stop_rule.k_actual()


def run_static(world: EngineWorld, r_n: list[int], task_R: int | None = None,
               trace: bool = False) -> tuple[RunMetrics, RunTrace]:
    """Static coded offload: helper n gets r_n coded packets at t=0; done
    when all of them returned. task_R sets the overhead baseline reported
    as k_actual (defaults to the full batch, i.e. zero overhead)."""
    total = sum(r_n)
    base = total if task_R is None else task_R
    payloads = [[PAYLOAD_CODED] * r for r in r_n]
    sched = SalvoScheduler("static", payloads, CountStop(base, total - base))
    return run(world, sched, trace=trace)


def run_coded_salvo_count(world: EngineWorld, r_n: list[int], R: int, K: int,
                          name: str = "static",
                          trace: bool = False) -> tuple[RunMetrics, RunTrace]:
    """Salvo of coded batches with an early count stop at R+K results."""
    payloads = [[PAYLOAD_CODED] * r for r in r_n]
    sched = SalvoScheduler(name, payloads, CountStop(R, K))
    return run(world, sched, trace=trace)


def run_uncoded(world: EngineWorld, mean_betas: list[float], R: int,
                r_n: list[int] | None = None,
                trace: bool = False) -> tuple[RunMetrics, RunTrace]:
    """Uncoded split proportional to 1/mean; every packet must come back."""
    if r_n is None:
        r_n = static_allocate(mean_betas, R).r_n
    payloads = []
    next_id = 0
    for r in r_n:
        payloads.append(list(range(next_id, next_id + r)))
        next_id += r
    sched = SalvoScheduler("uncoded", payloads, CountStop(R, 0))
    return run(world, sched, trace=trace)


def run_block_coded_static(world: EngineWorld, mean_betas: list[float], R: int,
                           K: int, trace: bool = False) -> tuple[RunMetrics, RunTrace]:
    """Block-coded static batches sized over R+K, stop at R+K results."""
    alloc = static_allocate(mean_betas, R + K)
    return run_coded_salvo_count(world, alloc.r_n, R, K, name="hcmm_like",
                                 trace=trace)


class NonErgodicScheduler(Scheduler):
    """Perfect-knowledge pacing: the next packet to a helper goes exactly one
    true runtime after the previous one, read off the runtime tape."""

    name = "nonergodic"

    def __init__(self, n_helpers: int, R: int, K: int):
        self.n = n_helpers
        self.stop_rule = CountStop(R, K)
        self.sent = [0] * n_helpers
        self.counts = [0] * n_helpers
        self.tapes = None

    def bind(self, world, tapes):
        self.tapes = tapes

    def on_start(self) -> Actions:
        self.sent = [1] * self.n
        return Actions(
            send_now=tuple((h, PAYLOAD_CODED) for h in range(self.n)),
            arm_send=tuple((h, self.tapes[h].peek(0)) for h in range(self.n)))

    def on_send_slot(self, t, helper):
        i = self.sent[helper]
        self.sent[helper] = i + 1
        return PAYLOAD_CODED, Actions(
            arm_send=((helper, t + self.tapes[helper].peek(i)),))

    def on_result(self, t, helper, pkt):
        pkt.consumed = True
        self.counts[helper] += 1
        self.stop_rule.add(pkt)
        return Actions(stop=stop_condition(self.stop_rule))

    def result_counts(self):
        return list(self.counts)

    def k_actual(self):
        return self.stop_rule.k_actual()


def run_nonergodic_oracle(world: EngineWorld, R: int, K: int,
                          trace: bool = False) -> tuple[RunMetrics, RunTrace]:
    sched = NonErgodicScheduler(len(world.profiles), R, K)
    return run(world, sched, trace=trace)


class RepetitionRRScheduler(Scheduler):
    """Uncoded round-robin with repetition: one pass hands each source packet
    out once in order; afterwards a cursor cycles over the still-unfinished
    set, so slow packets get duplicated. Helper pacing reuses the adaptive
    TTI/timeout machinery."""

    name = "rr"

    def __init__(self, n_helpers: int, sizes: PacketSizes, R: int,
                 alpha: float = ALPHA_DEFAULT,
                 estimator: str = ESTIMATOR_INFERRED):
        self.n = n_helpers
        self.sizes = sizes
        self.R = R
        self.estimator = estimator
        self.states = [CollectorHelperState(alpha=alpha) for _ in range(n_helpers)]
        self.counts = [0] * n_helpers
        self.live = [True] * R
        self.live_count = R
        self.nxt = [(i + 1) % R for i in range(R)]
        self.prv = [(i - 1) % R for i in range(R)]
        self.first_pass = 0
        self.cursor = 0

    def _next_source(self) -> int | None:
        if self.first_pass < self.R:
            s = self.first_pass
            self.first_pass += 1
            return s
        if self.live_count == 0:
            return None
        s = self.cursor
        self.cursor = self.nxt[s]
        return s

    def _remove(self, s: int) -> None:
        self.live[s] = False
        self.live_count -= 1
        if self.live_count == 0:
            return
        p, nx = self.prv[s], self.nxt[s]
        self.nxt[p] = nx
        self.prv[nx] = p
        if self.cursor == s:
            self.cursor = nx

    def on_start(self) -> Actions:
        send_now = []
        for h in range(min(self.n, self.R)):
            send_now.append((h, self._next_source()))
        return Actions(send_now=tuple(send_now))

    def on_transmission_ack(self, t, helper, pkt):
        if self.estimator == ESTIMATOR_INFERRED:
            infer_rtt_data(self.states[helper], t - pkt.tx, self.sizes)
        return Actions()

    def on_result(self, t, helper, pkt):
        st = self.states[helper]
        st.m += 1
        if self.estimator == ESTIMATOR_TIMESTAMPED:
            add_reported_beta(st, pkt.beta)
        else:
            infer_update_on_result(st, t, pkt.tx, None, self.sizes)
        tti_update(st, t, pkt.tx)
        nxt = max(t, st.last_tx + st.tti)
        st.next_send = nxt
        s = pkt.payload
        if self.live[s]:
            pkt.consumed = True
            self.counts[helper] += 1
            self._remove(s)
        return Actions(arm_send=((helper, nxt),),
                       arm_timeout=((helper, t + st.timeout_len),),
                       stop=self.live_count == 0)

    def on_send_slot(self, t, helper):
        st = self.states[helper]
        s = self._next_source()
        if s is None:
            return None, Actions()
        st.last_tx = t
        st.next_send = t + st.tti
        return s, Actions(arm_send=((helper, st.next_send),))

    def on_timeout(self, t, helper):
        st = self.states[helper]
        on_timeout(st)
        nxt = max(t, st.last_tx + st.tti)
        st.next_send = nxt
        return Actions(arm_send=((helper, nxt),),
                       arm_timeout=((helper, t + st.timeout_len),))

    def result_counts(self):
        return list(self.counts)


def run_repetition_rr(world: EngineWorld, R: int,
                      alpha: float = ALPHA_DEFAULT,
                      estimator: str = ESTIMATOR_INFERRED,
                      trace: bool = False) -> tuple[RunMetrics, RunTrace]:
    sched = RepetitionRRScheduler(len(world.profiles), world.sizes, R,
                                  alpha=alpha, estimator=estimator)
    return run(world, sched, trace=trace)


def exhaustive_best_split(beta_tapes: list[list[float]], R: int,
                          rtts: list[float]) -> tuple[float, list[int]]:
    """Desk-scale completion-time minimax over every integer split of R
    packets, with full knowledge of each helper's runtime sequence."""
    n = len(beta_tapes)
    if n == 0:
        raise AllocationError("need at least one helper")
    best_t = float("inf")
    best_alloc: list[int] = []

    def rec(idx: int, remaining: int, alloc: list[int]):
        nonlocal best_t, best_alloc
        if idx == n - 1:
            candidate = alloc + [remaining]
            if remaining > len(beta_tapes[idx]):
                return
            t = 0.0
            for h, r in enumerate(candidate):
                if r > 0:
                    t = max(t, rtts[h] + sum(beta_tapes[h][:r]))
            if t < best_t:
                best_t = t
                best_alloc = candidate
            return
        for r in range(min(remaining, len(beta_tapes[idx])) + 1):
            rec(idx + 1, remaining - r, alloc + [r])

    rec(0, R, [])
    if not best_alloc:
        raise AllocationError("tapes too short for any full split")
    return best_t, best_alloc
