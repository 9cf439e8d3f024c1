"""Adaptive collector scheduler: sends one coded packet per helper at t=0,
then paces each helper by TTI = min(observed turnaround, estimated mean
runtime), doubling TTI whenever a timeout of twice the TTI elapses without
a result.

Mean runtime comes either from helper-reported runtimes (timestamped mode)
or from collector-side inference: the receipt-ACK round trip is rescaled by
packet sizes and smoothed into an RTT estimate, idle gaps are accumulated
from result/send timestamps, and the busy span divided by the result count
yields the estimate (inferred mode, the default).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .codec import DecoderState, LtEncoder
from .engine import Actions, PacketRecord, Scheduler
from .workload import STREAM_CODEC, PacketSizes, make_stream

ALPHA_DEFAULT = 0.125
OVERHEAD_FRACTION = 0.05

# Numerical guards; a nonpositive estimate would stall the send cadence.
EST_FLOOR = 1e-12
TTI_FLOOR = 1e-12

ESTIMATOR_INFERRED = "inferred"
ESTIMATOR_TIMESTAMPED = "timestamped"

PAYLOAD_CODED = "coded"


class TraceCorruptionError(RuntimeError):
    """A result timestamp precedes its own transmission."""


class EstimatorStateError(RuntimeError):
    """Estimator update requested before any result was counted."""


def idealized_overhead(R: int, fraction: float = OVERHEAD_FRACTION) -> int:
    return math.ceil(R * fraction)


@dataclass
class CollectorHelperState:
    """Per-helper view at the collector; timeout_len is kept at twice the
    current TTI after every update."""

    alpha: float = ALPHA_DEFAULT
    tti: float = math.inf
    timeout_len: float = math.inf
    est_mean_beta: float = math.inf
    m: int = 0
    rtt_data_ewma: float | None = None
    tu_hat: float = 0.0
    sum_beta: float = 0.0
    prev_tr: float | None = None
    last_tx: float = 0.0
    next_send: float = math.inf


def tti_update(state: CollectorHelperState, tr: float, tx: float) -> float:
    """Cadence after a result observed at tr for a packet sent at tx."""
    if tr < tx:
        raise TraceCorruptionError(f"result at {tr} precedes send at {tx}")
    state.tti = max(min(tr - tx, state.est_mean_beta), TTI_FLOOR)
    state.timeout_len = 2.0 * state.tti
    state.next_send = state.last_tx + state.tti
    return state.tti


def on_timeout(state: CollectorHelperState) -> float:
    state.tti *= 2.0
    state.timeout_len = 2.0 * state.tti
    return state.tti


def add_reported_beta(state: CollectorHelperState, beta: float) -> float:
    """Incremental form of the timestamped estimator."""
    state.sum_beta += beta
    state.est_mean_beta = max(state.sum_beta / state.m, EST_FLOOR)
    return state.est_mean_beta


def estimate_beta_timestamped(state: CollectorHelperState, betas) -> float:
    """Mean of all runtimes reported so far."""
    state.sum_beta = 0.0
    state.m = len(betas)
    if state.m == 0:
        raise EstimatorStateError("no reported runtimes")
    for b in betas:
        state.sum_beta += b
    state.est_mean_beta = max(state.sum_beta / state.m, EST_FLOOR)
    return state.est_mean_beta


def infer_rtt_data(state: CollectorHelperState, rtt_ack: float,
                   sizes: PacketSizes) -> float:
    """Rescale a receipt-ACK round trip to the data round trip and smooth."""
    rtt_data = (sizes.bx + sizes.br) / (sizes.bx + sizes.back) * rtt_ack
    if state.rtt_data_ewma is None:
        state.rtt_data_ewma = rtt_data
    else:
        state.rtt_data_ewma = (state.alpha * rtt_data
                               + (1.0 - state.alpha) * state.rtt_data_ewma)
    return state.rtt_data_ewma


def infer_update_on_result(state: CollectorHelperState, tr: float, tx: float,
                           tx_next: float | None, sizes: PacketSizes) -> float:
    """Collector-side mean-runtime inference at the m-th result.

    tx_next is accepted for the shifted form of the same cross-packet
    identity; the stored previous result time already carries it, so the
    value is not consulted.
    """
    if state.m == 0:
        raise EstimatorStateError("no result counted yet")
    rtt = state.rtt_data_ewma if state.rtt_data_ewma is not None else 0.0
    if state.m > 1:
        xtt = state.prev_tr - tx
        state.tu_hat += max(0.0, rtt - xtt)
    tc = tr - sizes.br / (sizes.bx + sizes.br) * rtt
    state.est_mean_beta = max((tc - state.tu_hat) / state.m, EST_FLOOR)
    state.prev_tr = tr
    return state.est_mean_beta


class CountStop:
    """Idealized stop: a fixed number of results, coding overhead included."""

    def __init__(self, R: int, K: int):
        self.R = R
        self.target = R + K
        self.count = 0

    def add(self, pkt: PacketRecord) -> None:
        self.count += 1

    def reached(self) -> bool:
        return self.count >= self.target

    def k_actual(self) -> int:
        return self.count - self.R

    def make_payload(self, scheduler) -> object:
        return PAYLOAD_CODED


class DecodeStop:
    """Realistic stop: peeling decoder completion."""

    def __init__(self, R: int, run_seed: int, c: float | None = None,
                 delta: float | None = None):
        self.R = R
        kw = {}
        if c is not None:
            kw["c"] = c
        if delta is not None:
            kw["delta"] = delta
        self.encoder = LtEncoder(make_stream(run_seed, 0, STREAM_CODEC), R=R, **kw)
        self.decoder = DecoderState(R, mode="structure")

    def add(self, pkt: PacketRecord) -> None:
        self.decoder.add(pkt.payload.sources)

    def reached(self) -> bool:
        return self.decoder.complete

    def k_actual(self) -> int:
        k = self.decoder.k_actual
        return -1 if k is None else k

    def make_payload(self, scheduler) -> object:
        return self.encoder.encode_next()


def stop_condition(stop_rule) -> bool:
    return stop_rule.reached()


class C3pScheduler(Scheduler):
    name = "c3p"

    def __init__(self, n_helpers: int, sizes: PacketSizes, stop_rule,
                 alpha: float = ALPHA_DEFAULT,
                 estimator: str = ESTIMATOR_INFERRED):
        if not 0.0 < alpha < 1.0:
            raise ValueError("alpha must be in (0, 1)")
        if estimator not in (ESTIMATOR_INFERRED, ESTIMATOR_TIMESTAMPED):
            raise ValueError(f"unknown estimator {estimator!r}")
        self.n = n_helpers
        self.sizes = sizes
        self.stop_rule = stop_rule
        self.estimator = estimator
        self.states = [CollectorHelperState(alpha=alpha) for _ in range(n_helpers)]
        self.counts = [0] * n_helpers

    def on_start(self) -> Actions:
        # First packet to every helper at t=0; no cadence or timeout until
        # the first result gives evidence of the helper's speed.
        return Actions(send_now=tuple(
            (h, self.stop_rule.make_payload(self)) for h in range(self.n)))

    def on_transmission_ack(self, t, helper, pkt):
        if self.estimator == ESTIMATOR_INFERRED:
            infer_rtt_data(self.states[helper], t - pkt.tx, self.sizes)
        return Actions()

    def on_result(self, t, helper, pkt):
        st = self.states[helper]
        st.m += 1
        pkt.consumed = True
        self.counts[helper] += 1
        if self.estimator == ESTIMATOR_TIMESTAMPED:
            add_reported_beta(st, pkt.beta)
        else:
            infer_update_on_result(st, t, pkt.tx, None, self.sizes)
        tti_update(st, t, pkt.tx)
        nxt = max(t, st.last_tx + st.tti)
        st.next_send = nxt
        self.stop_rule.add(pkt)
        return Actions(arm_send=((helper, nxt),),
                       arm_timeout=((helper, t + st.timeout_len),),
                       stop=stop_condition(self.stop_rule))

    def on_send_slot(self, t, helper):
        st = self.states[helper]
        st.last_tx = t
        st.next_send = t + st.tti
        return (self.stop_rule.make_payload(self),
                Actions(arm_send=((helper, st.next_send),)))

    def on_timeout(self, t, helper):
        st = self.states[helper]
        on_timeout(st)
        nxt = max(t, st.last_tx + st.tti)
        st.next_send = nxt
        return Actions(arm_send=((helper, nxt),),
                       arm_timeout=((helper, t + st.timeout_len),))

    def result_counts(self):
        return list(self.counts)

    def k_actual(self):
        return self.stop_rule.k_actual()
