"""Experiment runner, trace dumper, and verification battery.

One JSON config describes one experiment: parameter sweeps, scheduler set,
replicate count, seeds. Runs write results.csv (one row per run),
aggregate.csv (means with 95% confidence intervals), improvement.csv
(paired per-seed gains of the adaptive collector over each baseline), and
render the matching figures next to the tables.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy import stats

from .baselines import (
    run_block_coded_static,
    run_coded_salvo_count,
    run_nonergodic_oracle,
    run_repetition_rr,
    run_static,
    run_uncoded,
    static_allocate,
)
from .c3p import (
    ALPHA_DEFAULT,
    ESTIMATOR_INFERRED,
    ESTIMATOR_TIMESTAMPED,
    C3pScheduler,
    CountStop,
    DecodeStop,
    idealized_overhead,
)
from .engine import DEFAULT_EVENT_CAP, BetaTape, EngineWorld, run
from . import figures
from .theory import (
    expected_tu,
    expected_tu_mc,
    idle_event_check,
    pr_tu_positive_mc,
    predict_r_c3p,
    predict_t_c3p,
    tu_model,
)
from .workload import (
    CH_FIXED,
    CH_POISSON,
    CH_ZERO,
    DEFAULT_RATE_FLOOR,
    FIXED_PER_HELPER,
    MBPS,
    PER_PACKET_IID,
    STREAM_BETA,
    STREAM_PROFILE,
    HelperProfile,
    PacketSizes,
    make_stream,
    matched_sizes,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_VERIFY = 3

WORKERS_ENV = "C3PLAB_WORKERS"

SCHEDULER_KEYS = ("c3p", "static", "nonergodic", "uncoded", "rr", "hcmm_like")
CODED_SCHEDULERS = ("c3p", "static", "nonergodic", "hcmm_like")

RESULT_COLUMNS = ("R", "N", "scenario", "scheduler", "seed", "T_total",
                  "K_actual", "mean_efficiency", "min_efficiency", "waste",
                  "wall_ms")
AGGREGATE_COLUMNS = ("R", "N", "scenario", "scheduler", "n",
                     "t_total_mean", "t_total_ci95",
                     "k_actual_mean", "k_actual_ci95",
                     "mean_efficiency_mean", "mean_efficiency_ci95",
                     "min_efficiency_mean", "min_efficiency_ci95",
                     "waste_mean", "waste_ci95")
IMPROVEMENT_COLUMNS = ("R", "N", "scenario", "baseline", "n",
                       "improvement_pct_mean", "improvement_pct_ci95")
TRACE_COLUMNS = ("time", "helper", "event", "packet")


class ConfigError(ValueError):
    """Raised for malformed or inconsistent experiment configs."""


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    r_values: tuple[int, ...]
    n_values: tuple[int, ...]
    scenario: str
    schedulers: tuple[str, ...]
    mu_choices: tuple[float, ...]
    a_rule: tuple  # ("fixed", value) or ("inverse_mu", None)
    channel: tuple  # ("poisson", lo, hi, floor) | ("fixed", rate) | ("zero",)
    packet_bits: tuple  # ("matched",) or ("explicit", bx, br, back)
    alpha: float
    estimator: str
    stop_mode: str  # "count" | "decode"
    overhead: float
    overhead_by_scheduler: tuple[tuple[str, float], ...]
    replicates: int
    base_seed: int
    event_cap: int


def _as_int_list(value, label) -> tuple[int, ...]:
    items = value if isinstance(value, list) else [value]
    if not items:
        raise ConfigError(f"{label} list is empty")
    out = []
    for v in items:
        if not isinstance(v, int) or isinstance(v, bool) or v < 1:
            raise ConfigError(f"{label} entries must be positive integers")
        out.append(v)
    return tuple(out)


def parse_config_dict(raw: dict) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    known = {"name", "R", "N", "scenario", "schedulers", "mu_choices",
             "a_rule", "channel", "packet_bits", "alpha", "estimator",
             "stop", "overhead_by_scheduler", "replicates", "base_seed",
             "event_cap"}
    extra = set(raw) - known
    if extra:
        raise ConfigError(f"unknown config fields: {sorted(extra)}")
    if "R" not in raw:
        raise ConfigError("config requires R")

    name = str(raw.get("name", "experiment"))
    r_values = _as_int_list(raw["R"], "R")
    n_values = _as_int_list(raw.get("N", 100), "N")

    scenario = raw.get("scenario", PER_PACKET_IID)
    if scenario not in (PER_PACKET_IID, FIXED_PER_HELPER):
        raise ConfigError(f"unknown scenario {scenario!r}")

    schedulers = tuple(raw.get("schedulers", ["c3p"]))
    if not schedulers:
        raise ConfigError("schedulers list is empty")
    for s in schedulers:
        if s not in SCHEDULER_KEYS:
            raise ConfigError(f"unknown scheduler {s!r}")
    if len(set(schedulers)) != len(schedulers):
        raise ConfigError("duplicate scheduler keys")

    mu_choices = tuple(float(m) for m in raw.get("mu_choices", [1.0, 2.0, 4.0]))
    if not mu_choices or any(m <= 0 for m in mu_choices):
        raise ConfigError("mu_choices must be positive and nonempty")

    a_raw = raw.get("a_rule", {"kind": "fixed", "value": 0.5})
    kind = a_raw.get("kind")
    if kind == "fixed":
        a_value = float(a_raw.get("value", 0.0))
        if a_value < 0:
            raise ConfigError("a_rule.value must be non-negative")
        a_rule = ("fixed", a_value)
    elif kind == "inverse_mu":
        a_rule = ("inverse_mu", None)
    else:
        raise ConfigError(f"unknown a_rule kind {kind!r}")

    ch_raw = raw.get("channel", {"kind": "poisson",
                                 "rate_interval_mbps": [10.0, 20.0]})
    ch_kind = ch_raw.get("kind")
    if ch_kind == "poisson":
        lo, hi = (float(x) for x in ch_raw.get("rate_interval_mbps",
                                               [10.0, 20.0]))
        floor = float(ch_raw.get("rate_floor_mbps",
                                 DEFAULT_RATE_FLOOR / MBPS))
        if not 0 < lo <= hi or floor <= 0:
            raise ConfigError("poisson channel needs 0 < lo <= hi, floor > 0")
        channel = ("poisson", lo, hi, floor)
    elif ch_kind == "fixed":
        rate = float(ch_raw.get("rate_mbps", 0.0))
        if rate <= 0:
            raise ConfigError("fixed channel needs rate_mbps > 0")
        channel = ("fixed", rate)
    elif ch_kind == "zero":
        channel = ("zero",)
    else:
        raise ConfigError(f"unknown channel kind {ch_kind!r}")

    pb_raw = raw.get("packet_bits", {"rule": "matched"})
    if pb_raw.get("rule") == "matched":
        packet_bits = ("matched",)
    elif {"bx", "br", "back"} <= set(pb_raw):
        bx, br, back = (float(pb_raw[k]) for k in ("bx", "br", "back"))
        if min(bx, br, back) <= 0:
            raise ConfigError("packet_bits must be positive")
        packet_bits = ("explicit", bx, br, back)
    else:
        raise ConfigError("packet_bits needs rule=matched or bx/br/back")

    alpha = float(raw.get("alpha", ALPHA_DEFAULT))
    if not 0 < alpha < 1:
        raise ConfigError("alpha must lie in (0, 1)")

    estimator = raw.get("estimator", ESTIMATOR_INFERRED)
    if estimator not in (ESTIMATOR_INFERRED, ESTIMATOR_TIMESTAMPED):
        raise ConfigError(f"unknown estimator {estimator!r}")

    stop_raw = raw.get("stop", {"mode": "count", "overhead": 0.05})
    stop_mode = stop_raw.get("mode", "count")
    if stop_mode not in ("count", "decode"):
        raise ConfigError(f"unknown stop mode {stop_mode!r}")
    overhead = float(stop_raw.get("overhead", 0.05))
    if overhead < 0:
        raise ConfigError("stop.overhead must be non-negative")

    obs_raw = raw.get("overhead_by_scheduler", {})
    obs = []
    for key, frac in sorted(obs_raw.items()):
        if key not in SCHEDULER_KEYS:
            raise ConfigError(f"overhead override for unknown scheduler {key!r}")
        if key not in CODED_SCHEDULERS:
            raise ConfigError(f"scheduler {key!r} is uncoded and takes no overhead")
        frac = float(frac)
        if frac < 0:
            raise ConfigError("overhead overrides must be non-negative")
        obs.append((key, frac))

    replicates = raw.get("replicates", 1)
    if not isinstance(replicates, int) or replicates < 1:
        raise ConfigError("replicates must be a positive integer")
    base_seed = raw.get("base_seed", 0)
    if not isinstance(base_seed, int) or base_seed < 0:
        raise ConfigError("base_seed must be a non-negative integer")
    event_cap = raw.get("event_cap", DEFAULT_EVENT_CAP)
    if not isinstance(event_cap, int) or event_cap < 1:
        raise ConfigError("event_cap must be a positive integer")

    return ExperimentConfig(
        name=name, r_values=r_values, n_values=n_values, scenario=scenario,
        schedulers=schedulers, mu_choices=mu_choices, a_rule=a_rule,
        channel=channel, packet_bits=packet_bits, alpha=alpha,
        estimator=estimator, stop_mode=stop_mode, overhead=overhead,
        overhead_by_scheduler=tuple(obs), replicates=replicates,
        base_seed=base_seed, event_cap=event_cap)


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as err:
        raise ConfigError(f"cannot read config: {err}") from err
    except json.JSONDecodeError as err:
        raise ConfigError(f"config is not valid JSON: {err}") from err
    return parse_config_dict(raw)


# --- world construction ---


def build_profiles(cfg: ExperimentConfig, n_helpers: int,
                   run_seed: int) -> list[HelperProfile]:
    """Per-helper parameters drawn from the profile stream: compute rate
    choice first, then the channel rate. Deterministic per (seed, helper)."""
    if cfg.channel[0] == "poisson":
        ch_kind = CH_POISSON
    elif cfg.channel[0] == "fixed":
        ch_kind = CH_FIXED
    else:
        ch_kind = CH_ZERO
    profiles = []
    for i in range(n_helpers):
        stream = make_stream(run_seed, i, STREAM_PROFILE)
        mu = cfg.mu_choices[int(stream.integers(len(cfg.mu_choices)))]
        a = cfg.a_rule[1] if cfg.a_rule[0] == "fixed" else 1.0 / mu
        if ch_kind == CH_POISSON:
            rate = stream.uniform(cfg.channel[1], cfg.channel[2]) * MBPS
            floor = cfg.channel[3] * MBPS
        elif ch_kind == CH_FIXED:
            rate = cfg.channel[1] * MBPS
            floor = DEFAULT_RATE_FLOOR
        else:
            rate = 0.0
            floor = DEFAULT_RATE_FLOOR
        profiles.append(HelperProfile(
            helper_id=i, a=a, mu=mu, scenario=cfg.scenario,
            channel_kind=ch_kind, channel_mean_rate=rate, rate_floor=floor))
    return profiles


def packet_sizes_for(cfg: ExperimentConfig, R: int) -> PacketSizes:
    if cfg.packet_bits[0] == "matched":
        return matched_sizes(R)
    _, bx, br, back = cfg.packet_bits
    return PacketSizes(bx, br, back)


def overhead_count(cfg: ExperimentConfig, scheduler: str, R: int) -> int:
    if scheduler not in CODED_SCHEDULERS:
        return 0
    frac = dict(cfg.overhead_by_scheduler).get(scheduler, cfg.overhead)
    return idealized_overhead(R, frac)


def allocation_means(cfg: ExperimentConfig, profiles, run_seed) -> list[float]:
    """Means the a-priori allocators are entitled to: distribution means
    under per-packet randomness, realized per-run runtimes when each helper
    keeps one runtime for the whole run."""
    if cfg.scenario == PER_PACKET_IID:
        return [p.mean_runtime for p in profiles]
    means = []
    for p in profiles:
        tape = BetaTape(replace(p), make_stream(run_seed, p.helper_id,
                                                STREAM_BETA))
        means.append(tape.peek(0))
    return means


def run_single(cfg: ExperimentConfig, R: int, N: int, scheduler: str,
               run_seed: int):
    profiles = build_profiles(cfg, N, run_seed)
    world = EngineWorld(profiles=profiles, sizes=packet_sizes_for(cfg, R),
                        run_seed=run_seed, event_cap=cfg.event_cap)
    K = overhead_count(cfg, scheduler, R)
    if scheduler == "c3p":
        if cfg.stop_mode == "decode":
            rule = DecodeStop(R, run_seed)
        else:
            rule = CountStop(R, K)
        sched = C3pScheduler(N, world.sizes, rule, alpha=cfg.alpha,
                             estimator=cfg.estimator)
        return run(world, sched)
    if scheduler == "static":
        means = allocation_means(cfg, profiles, run_seed)
        alloc = static_allocate(means, R + K)
        return run_static(world, alloc.r_n, task_R=R)
    if scheduler == "nonergodic":
        return run_nonergodic_oracle(world, R, K)
    if scheduler == "uncoded":
        means = [p.mean_runtime for p in profiles]
        return run_uncoded(world, means, R)
    if scheduler == "rr":
        return run_repetition_rr(world, R, alpha=cfg.alpha,
                                 estimator=cfg.estimator)
    if scheduler == "hcmm_like":
        means = allocation_means(cfg, profiles, run_seed)
        return run_block_coded_static(world, means, R, K)
    raise ConfigError(f"unknown scheduler {scheduler!r}")


def _format(value) -> str:
    if isinstance(value, float):
        return f"{value:.12g}"
    return str(value)


def _run_job(args) -> list[dict]:
    cfg, R, N, rep = args
    run_seed = cfg.base_seed + rep
    rows = []
    for scheduler in cfg.schedulers:
        t0 = time.perf_counter()
        metrics, _ = run_single(cfg, R, N, scheduler, run_seed)
        wall_ms = int(round(1000 * (time.perf_counter() - t0)))
        rows.append({
            "R": R, "N": N, "scenario": cfg.scenario, "scheduler": scheduler,
            "seed": run_seed, "T_total": metrics.t_total,
            "K_actual": metrics.k_actual,
            "mean_efficiency": metrics.mean_efficiency,
            "min_efficiency": metrics.min_efficiency,
            "waste": metrics.waste, "wall_ms": wall_ms,
        })
    return rows


def worker_count() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"{WORKERS_ENV} must be an integer, got {raw!r}")
    return max(1, n)


def _mean_ci95(values) -> tuple[float, float]:
    arr = np.asarray([v for v in values if not math.isnan(v)], dtype=float)
    if arr.size == 0:
        return float("nan"), float("nan")
    mean = float(arr.mean())
    if arr.size == 1:
        return mean, 0.0
    sem = float(arr.std(ddof=1)) / math.sqrt(arr.size)
    half = float(stats.t.ppf(0.975, arr.size - 1)) * sem
    return mean, half


def _write_csv(path, columns, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_format(row[c]) for c in columns])


def aggregate_rows(result_rows) -> list[dict]:
    groups: dict[tuple, list[dict]] = {}
    order = []
    for row in result_rows:
        key = (row["R"], row["N"], row["scenario"], row["scheduler"])
        if key not in groups:
            groups[key] = []
            order.append(key)
        groups[key].append(row)
    out = []
    for key in order:
        rows = groups[key]
        agg = {"R": key[0], "N": key[1], "scenario": key[2],
               "scheduler": key[3], "n": len(rows)}
        for col, prefix in (("T_total", "t_total"),
                            ("K_actual", "k_actual"),
                            ("mean_efficiency", "mean_efficiency"),
                            ("min_efficiency", "min_efficiency"),
                            ("waste", "waste")):
            mean, ci = _mean_ci95([float(r[col]) for r in rows])
            agg[f"{prefix}_mean"] = mean
            agg[f"{prefix}_ci95"] = ci
        out.append(agg)
    return out


def improvement_rows(result_rows) -> list[dict]:
    """Paired per-seed improvement of the adaptive collector over each other
    scheduler: positive means the collector finished sooner."""
    by_key: dict[tuple, dict] = {}
    for row in result_rows:
        by_key[(row["R"], row["N"], row["scenario"], row["scheduler"],
                row["seed"])] = row
    cells: dict[tuple, list[float]] = {}
    order = []
    for row in result_rows:
        if row["scheduler"] == "c3p":
            continue
        ref = by_key.get((row["R"], row["N"], row["scenario"], "c3p",
                          row["seed"]))
        if ref is None:
            continue
        t_base = float(row["T_total"])
        t_c3p = float(ref["T_total"])
        key = (row["R"], row["N"], row["scenario"], row["scheduler"])
        if key not in cells:
            cells[key] = []
            order.append(key)
        cells[key].append(100.0 * (t_base - t_c3p) / t_base)
    out = []
    for key in order:
        mean, ci = _mean_ci95(cells[key])
        out.append({"R": key[0], "N": key[1], "scenario": key[2],
                    "baseline": key[3], "n": len(cells[key]),
                    "improvement_pct_mean": mean,
                    "improvement_pct_ci95": ci})
    return out


def _render_run_figures(cfg, out_dir: Path, has_improvement: bool) -> list[str]:
    rendered = []
    agg = out_dir / "aggregate.csv"
    if len(cfg.r_values) > 1:
        rendered.append(figures.render(figures.FigureSpec(
            input=str(agg), kind="delay_vs_r",
            output=str(out_dir / "delay_vs_r.png"), title=cfg.name)))
    if has_improvement and len(cfg.n_values) > 1:
        rendered.append(figures.render(figures.FigureSpec(
            input=str(out_dir / "improvement.csv"), kind="improvement_vs_n",
            output=str(out_dir / "improvement_vs_n.png"), title=cfg.name)))
    rendered.append(figures.render(figures.FigureSpec(
        input=str(agg), kind="efficiency",
        output=str(out_dir / "efficiency.png"), title=cfg.name)))
    return rendered


def run_experiment(cfg: ExperimentConfig, out_dir) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    jobs = [(cfg, R, N, rep)
            for R in cfg.r_values
            for N in cfg.n_values
            for rep in range(cfg.replicates)]
    workers = worker_count()
    result_rows: list[dict] = []
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for rows in pool.map(_run_job, jobs, chunksize=1):
                result_rows.extend(rows)
    else:
        for job in jobs:
            result_rows.extend(_run_job(job))

    _write_csv(out / "results.csv", RESULT_COLUMNS, result_rows)
    _write_csv(out / "aggregate.csv", AGGREGATE_COLUMNS,
               aggregate_rows(result_rows))
    imp = improvement_rows(result_rows)
    if imp:
        _write_csv(out / "improvement.csv", IMPROVEMENT_COLUMNS, imp)
    rendered = _render_run_figures(cfg, out, bool(imp))
    return {"rows": len(result_rows), "figures": rendered,
            "out_dir": str(out)}


def write_trace(cfg: ExperimentConfig, replicate: int, out_dir) -> str:
    """One traced run of the first sweep point and first scheduler."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    R, N = cfg.r_values[0], cfg.n_values[0]
    scheduler = cfg.schedulers[0]
    run_seed = cfg.base_seed + replicate
    profiles = build_profiles(cfg, N, run_seed)
    world = EngineWorld(profiles=profiles, sizes=packet_sizes_for(cfg, R),
                        run_seed=run_seed, event_cap=cfg.event_cap)
    K = overhead_count(cfg, scheduler, R)
    if scheduler == "c3p":
        sched = C3pScheduler(N, world.sizes, CountStop(R, K),
                             alpha=cfg.alpha, estimator=cfg.estimator)
        _, trace = run(world, sched, trace=True)
    else:
        _, trace = run_single_traced(cfg, world, scheduler, R, K, run_seed,
                                     profiles)
    rows = [{"time": t, "helper": h, "event": name, "packet": uid}
            for t, h, name, uid in trace.events]
    path = out / "trace.csv"
    _write_csv(path, TRACE_COLUMNS, rows)
    return str(path)


def run_single_traced(cfg, world, scheduler, R, K, run_seed, profiles):
    if scheduler == "static":
        alloc = static_allocate(allocation_means(cfg, profiles, run_seed),
                                R + K)
        return run_static(world, alloc.r_n, task_R=R, trace=True)
    if scheduler == "nonergodic":
        return run_nonergodic_oracle(world, R, K, trace=True)
    if scheduler == "uncoded":
        return run_uncoded(world, [p.mean_runtime for p in profiles], R,
                           trace=True)
    if scheduler == "rr":
        return run_repetition_rr(world, R, alpha=cfg.alpha,
                                 estimator=cfg.estimator, trace=True)
    if scheduler == "hcmm_like":
        return run_block_coded_static(
            world, allocation_means(cfg, profiles, run_seed), R, K,
            trace=True)
    raise ConfigError(f"unknown scheduler {scheduler!r}")


# --- verification battery ---

TU_GRID = ((1.0, 0.5), (2.0, 0.25), (4.0, 0.125))
TU_RTTS = (0.0, 0.05, 0.1, 0.2, 0.4, 0.8, 1.2)


def _example_tapes():
    # Tapes carry slack because a computation that begins exactly at the
    # stopping instant still consumes a runtime value.
    ex1 = [[1.0] * 9, [2.0] * 9, [10.0] * 9]
    pad = [1.0] * 4
    ex2 = [[1.0, 1.0, 0.5, 1.0, 1.5] + pad, [1.5, 3.5] + pad,
           [3.0, 2.5] + pad]
    return ex1, ex2


def _replay_world(tapes):
    profiles = [HelperProfile(helper_id=i, a=0.0, mu=1.0,
                              channel_kind=CH_ZERO)
                for i in range(len(tapes))]
    return EngineWorld(profiles=profiles, sizes=PacketSizes(1, 1, 1),
                       run_seed=0, beta_tapes=[list(t) for t in tapes])


def _check_example_replays():
    ex1, ex2 = _example_tapes()
    got = []
    m, _ = run_uncoded(_replay_world(ex1), [1.0, 2.0, 10.0], R=6,
                       r_n=[2, 2, 2])
    got.append(m.t_total)
    m, _ = run_coded_salvo_count(_replay_world(ex1), [3, 3, 3], R=6, K=0)
    got.append(m.t_total)
    m, _ = run_static(_replay_world(ex1), [4, 2, 0])
    got.append(m.t_total)
    m, _ = run_repetition_rr(_replay_world(ex2), R=6)
    got.append(m.t_total)
    sched = C3pScheduler(3, PacketSizes(1, 1, 1), CountStop(6, 0))
    m, _ = run(_replay_world(ex2), sched)
    got.append(m.t_total)
    got = [float(t) for t in got]
    want = [20.0, 6.0, 4.0, 5.0, 3.5]
    ok = got == want
    return ok, f"naive/coded/aware/rr/collector = {got}, want {want}"


def _check_prediction_arithmetic():
    t = predict_t_c3p([1.0, 2.0, 4.0], R=7, K=0)
    r = predict_r_c3p([1.0, 2.0, 4.0], R=7, K=0)
    ok = (abs(t - 4.0) < 1e-12
          and all(abs(x - y) < 1e-12 for x, y in zip(r, [4.0, 2.0, 1.0])))
    return ok, f"t={t:.6g}, split={[round(x, 6) for x in r]}"


def _check_idle_closed_form(closed_form, rng, samples=200_000):
    worst = 0.0
    rows = []
    for mu, a in TU_GRID:
        for rtt in TU_RTTS:
            mc = expected_tu_mc(mu, a, rtt, samples=samples, rng=rng)
            cf = closed_form(mu, a, rtt)
            rows.append({"rtt": rtt, "mu": mu, "a": a,
                         "tu_closed_form": cf, "tu_mc": mc})
            worst = max(worst, abs(cf - mc))
    return worst < 1e-2, f"max |closed - mc| = {worst:.2e}", rows


def _check_idle_event_equivalence(rng, prefixes=2000):
    for _ in range(prefixes):
        i = int(rng.integers(1, 16))
        betas = list(0.3 + rng.exponential(0.7, size=i))
        mean_beta = 1.0
        model = tu_model(betas, mean_beta)[-1] > 0.0
        if idle_event_check(betas, mean_beta) is not model:
            return False, f"divergence on prefix {betas}"
    return True, f"{prefixes} random prefixes agree"


def _check_idle_probability(rng, samples=100_000):
    p1 = pr_tu_positive_mc(1, 1.5, 0.4, samples, rng)
    target = 1.0 - 1.0 / math.e
    if abs(p1 - target) > 0.01 * target:
        return False, f"first-packet probability {p1:.4f} vs {target:.4f}"
    sigma = 2.0 * math.sqrt(0.25 / samples)
    prev = p1
    for i in range(2, 16):
        p = pr_tu_positive_mc(i, 1.5, 0.4, samples, rng)
        if p > prev + 2 * sigma:
            return False, f"probability rose at i={i}: {prev:.4f} -> {p:.4f}"
        prev = p
    return True, f"decay {p1:.4f} -> {prev:.4f} over i=1..15"


def _check_branch_continuity():
    worst = 0.0
    for mu, a in TU_GRID:
        gap = abs(expected_tu(mu, a, 1.0 / mu - 1e-12)
                  - expected_tu(mu, a, 1.0 / mu))
        worst = max(worst, gap)
    return worst < 1e-9, f"max branch gap {worst:.2e}"


def run_verification(out_dir, closed_form=expected_tu, seed=20240) -> bool:
    """Full verifier battery; writes report.txt, report.csv, tu_overlay.csv
    and the overlay figure. Returns overall pass."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)

    checks = []
    ok, detail = _check_example_replays()
    checks.append(("worked-example replays", ok, detail))
    ok, detail = _check_prediction_arithmetic()
    checks.append(("completion-time arithmetic", ok, detail))
    ok, detail, overlay_rows = _check_idle_closed_form(closed_form, rng)
    checks.append(("idle-time closed form vs monte carlo", ok, detail))
    ok, detail = _check_branch_continuity()
    checks.append(("idle-time branch continuity", ok, detail))
    ok, detail = _check_idle_event_equivalence(rng)
    checks.append(("idle event vs recursion sign", ok, detail))
    ok, detail = _check_idle_probability(rng)
    checks.append(("idle probability decay", ok, detail))

    _write_csv(out / "tu_overlay.csv",
               ("rtt", "mu", "a", "tu_closed_form", "tu_mc"), overlay_rows)
    figures.render(figures.FigureSpec(
        input=str(out / "tu_overlay.csv"), kind="tu_overlay",
        output=str(out / "tu_overlay.png"), title="idle time per packet"))

    all_ok = all(ok for _, ok, _ in checks)
    lines = [f"{'PASS' if ok else 'FAIL'}  {name}: {detail}"
             for name, ok, detail in checks]
    lines.append(f"overall: {'PASS' if all_ok else 'FAIL'}")
    (out / "report.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    _write_csv(out / "report.csv", ("check", "passed", "detail"),
               [{"check": name, "passed": int(ok), "detail": detail}
                for name, ok, detail in checks])
    for line in lines:
        print(line)
    return all_ok


# --- entry point ---


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="c3plab",
        description="Coded-offloading simulation lab: run experiments, "
                    "verify the closed forms, dump traces, render figures.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment config")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--out", required=True)

    p_verify = sub.add_parser("verify", help="run the verification battery")
    p_verify.add_argument("--out", required=True)

    p_trace = sub.add_parser("trace", help="dump one run's event trace")
    p_trace.add_argument("--config", required=True)
    p_trace.add_argument("--seed", type=int, default=0,
                         help="replicate index added to base_seed")
    p_trace.add_argument("--out", default=".")

    p_render = sub.add_parser("render", help="render a figure spec")
    p_render.add_argument("--spec", required=True)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            cfg = load_config(args.config)
            summary = run_experiment(cfg, args.out)
            print(f"wrote {summary['rows']} rows to {summary['out_dir']}")
            return EXIT_OK
        if args.command == "verify":
            return EXIT_OK if run_verification(args.out) else EXIT_VERIFY
        if args.command == "trace":
            cfg = load_config(args.config)
            path = write_trace(cfg, args.seed, args.out)
            print(f"wrote {path}")
            return EXIT_OK
        if args.command == "render":
            try:
                path = figures.render_spec_file(args.spec)
            except (figures.FigureInputError, figures.FigureSchemaError,
                    OSError, json.JSONDecodeError) as err:
                print(f"figure error: {err}", file=sys.stderr)
                return EXIT_CONFIG
            print(f"wrote {path}")
            return EXIT_OK
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    raise AssertionError("unreachable command")


if __name__ == "__main__":
    sys.exit(main())
