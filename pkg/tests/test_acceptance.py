"""Acceptance battery: every headline behavior, one test and one line each.

Each test prints `ACCEPTANCE <name>: PASS|FAIL (<measured numbers>)` before
asserting, so a log scan shows the whole scoreboard with the evidence
inline. Budgets are sized to finish in about two minutes total.
"""

import math
import time

import numpy as np
import pytest

from c3plab.cli import (
    _check_example_replays,
    allocation_means,
    build_profiles,
    parse_config_dict,
    run_experiment,
    run_single,
)
from c3plab.codec import DecoderState, LtEncoder, decoded_y, make_task
from c3plab.codec import compute_product
from c3plab import figures
from c3plab.theory import (
    efficiency_theoretical,
    expected_tu,
    expected_tu_mc,
    harmonic_speed,
    idle_event_check,
    pr_tu_positive_mc,
    predict_t_c3p,
    tu_model,
)
from c3plab.workload import matched_sizes

SEEDS_MEAN = 50
SEEDS_WINRATE = 15
CELLS = tuple((scenario, R) for scenario in ("iid", "fixed")
              for R in (2000, 8000))


def _report(name, ok, detail):
    print(f"ACCEPTANCE {name}: {'PASS' if ok else 'FAIL'} ({detail})")


_RUNS = {}


def run_point(scheduler, scenario, R, N, seed, channel=(10.0, 20.0),
              fixed_rate=None, mu_choices=(1.0, 2.0, 4.0), a_inverse=False,
              overhead_override=None):
    """Memoized single run; identical arguments replay from cache so
    criteria sharing a configuration reuse each other's runs."""
    key = (scheduler, scenario, R, N, seed, channel, fixed_rate,
           mu_choices, a_inverse, overhead_override)
    if key not in _RUNS:
        payload = {"R": R, "N": N, "scenario": scenario,
                   "schedulers": [scheduler],
                   "mu_choices": list(mu_choices)}
        if fixed_rate is not None:
            payload["channel"] = {"kind": "fixed", "rate_mbps": fixed_rate}
        else:
            payload["channel"] = {"kind": "poisson",
                                  "rate_interval_mbps": list(channel)}
        if a_inverse:
            payload["a_rule"] = {"kind": "inverse_mu"}
        if overhead_override is not None:
            payload["overhead_by_scheduler"] = {scheduler: overhead_override}
        cfg = parse_config_dict(payload)
        _RUNS[key] = run_single(cfg, R, N, scheduler, seed)[0]
    return _RUNS[key]


def test_worked_examples_replay_exactly():
    t0 = time.perf_counter()
    ok, detail = _check_example_replays()
    elapsed = time.perf_counter() - t0
    ok = ok and elapsed < 1.0
    _report("worked-example replays", ok, f"{detail}, {elapsed:.3f}s")
    assert ok, detail


def test_completion_time_tracks_harmonic_prediction():
    # 100 helpers, per-packet random runtimes, 8000 rows plus 5% overhead.
    cfg = parse_config_dict({"R": 8000, "N": 100, "schedulers": ["c3p"]})
    sims, preds = [], []
    for seed in range(SEEDS_MEAN):
        sims.append(run_point("c3p", "iid", 8000, 100, seed).t_total)
        means = [p.mean_runtime for p in build_profiles(cfg, 100, seed)]
        preds.append(predict_t_c3p(means, 8000, 400))
    err = abs(np.mean(sims) / np.mean(preds) - 1.0)
    ok = err <= 0.05
    _report("completion time vs prediction", ok,
            f"mean sim {np.mean(sims):.2f} vs pred {np.mean(preds):.2f}, "
            f"err {err * 100:.2f}% <= 5%")
    assert ok


def test_static_closed_form_and_collector_gap():
    # Constant per-helper runtimes; the a-priori split knows them exactly.
    cfg = parse_config_dict({"R": 8000, "N": 100, "scenario": "fixed",
                             "schedulers": ["static"]})
    static_sim, static_closed, gap_pred, c3p_sim = [], [], [], []
    for seed in range(SEEDS_MEAN):
        means = allocation_means(cfg, build_profiles(cfg, 100, seed), seed)
        speed = harmonic_speed(means)
        static_closed.append(8000 / speed)
        gap_pred.append(400 / speed)
        static_sim.append(run_point("static", "fixed", 8000, 100, seed,
                                    overhead_override=0.0).t_total)
        c3p_sim.append(run_point("c3p", "fixed", 8000, 100, seed).t_total)
    err_static = abs(np.mean(static_sim) / np.mean(static_closed) - 1.0)
    gap = np.mean(c3p_sim) - np.mean(static_closed)
    err_gap = abs(gap / np.mean(gap_pred) - 1.0)
    ok = err_static <= 0.05 and err_gap <= 0.20
    _report("static closed form and collector gap", ok,
            f"static sim {np.mean(static_sim):.2f} vs closed "
            f"{np.mean(static_closed):.2f} (err {err_static * 100:.2f}% <= 5%); "
            f"gap {gap:.2f} vs pred {np.mean(gap_pred):.2f} "
            f"(err {err_gap * 100:.1f}% <= 20%)")
    assert ok


def test_helper_efficiency_above_target():
    reps = 10
    measured = {}
    for scenario in ("iid", "fixed"):
        effs = [run_point("c3p", scenario, 8000, 100, seed,
                          mu_choices=(1.0, 3.0, 9.0),
                          a_inverse=True).mean_efficiency
                for seed in range(reps)]
        measured[scenario] = float(np.mean(effs))
    sizes = matched_sizes(8000)
    cfg = parse_config_dict({"R": 8000, "N": 100,
                             "mu_choices": [1, 3, 9],
                             "a_rule": {"kind": "inverse_mu"},
                             "schedulers": ["c3p"]})
    gammas = []
    for seed in range(reps):
        for p in build_profiles(cfg, 100, seed):
            rtt = (sizes.bx + sizes.br) / p.channel_mean_rate
            gammas.append(efficiency_theoretical(p.mu, p.a, rtt))
    gamma_mean = float(np.mean(gammas))
    gamma_err = abs(gamma_mean - 0.994115)
    ok = min(measured.values()) >= 0.990 and gamma_err <= 0.003
    _report("helper efficiency", ok,
            f"empirical iid {measured['iid'] * 100:.3f}%, "
            f"fixed {measured['fixed'] * 100:.3f}% >= 99.0%; "
            f"theoretical {gamma_mean * 100:.4f}% vs 99.4115% "
            f"(abs {gamma_err * 100:.4f}pp <= 0.3pp)")
    assert ok


def test_idle_closed_form_matches_monte_carlo():
    rng = np.random.default_rng(5)
    worst = 0.0
    for _ in range(20):
        mu = rng.uniform(0.5, 4.0)
        a = rng.uniform(0.0, 1.5)
        rtt = rng.uniform(0.0, 2.0 / mu)
        mc = expected_tu_mc(mu, a, rtt, samples=1_000_000, rng=rng)
        worst = max(worst, abs(expected_tu(mu, a, rtt) - mc))
    ok = worst <= 1e-2
    _report("idle closed form vs monte carlo", ok,
            f"20 parameter triples, max abs err {worst:.2e} <= 1e-2")
    assert ok


def test_idle_event_equivalence_on_random_prefixes():
    rng = np.random.default_rng(6)
    mismatches = 0
    for _ in range(10_000):
        i = int(rng.integers(1, 21))
        a = rng.uniform(0.0, 1.0)
        mu = rng.uniform(0.5, 4.0)
        betas = list(a + rng.exponential(1.0 / mu, size=i))
        mean_beta = a + 1.0 / mu
        recursion = tu_model(betas, mean_beta)[-1] > 0.0
        if idle_event_check(betas, mean_beta) is not recursion:
            mismatches += 1
    ok = mismatches == 0
    _report("idle event equivalence", ok,
            f"{mismatches} mismatches over 10000 prefixes (i <= 20)")
    assert ok


def test_idle_probability_monotone_decay():
    rng = np.random.default_rng(7)
    samples = 100_000
    probs = [pr_tu_positive_mc(i, 2.0, 0.5, samples, rng)
             for i in range(1, 31)]
    target = 1.0 - 1.0 / math.e
    first_err = abs(probs[0] - target) / target
    rises = 0
    for p_prev, p_next in zip(probs, probs[1:]):
        sigma = math.sqrt((p_prev * (1 - p_prev)
                           + p_next * (1 - p_next)) / samples)
        if p_next > p_prev + 2.0 * sigma:
            rises += 1
    ok = first_err <= 0.01 and rises == 0
    _report("idle probability decay", ok,
            f"first packet {probs[0]:.4f} vs {target:.4f} "
            f"(err {first_err * 100:.2f}% <= 1%); "
            f"{rises} upward steps beyond 2 sigma over i=1..30")
    assert ok


def test_completion_gap_bounded_by_worst_helper_idle():
    # Deterministic transmissions keep the runtime tapes the only coupling,
    # which is the regime the bound speaks about.
    violations = 0
    tightest = np.inf
    for seed in range(SEEDS_MEAN):
        m_c3p = run_point("c3p", "iid", 2000, 50, seed, fixed_rate=15.0)
        m_best = run_point("nonergodic", "iid", 2000, 50, seed,
                           fixed_rate=15.0)
        gap = m_c3p.t_total - m_best.t_total
        bound = max(m_c3p.idle)
        if gap > bound + 1e-9 or gap < -1e-9:
            violations += 1
        tightest = min(tightest, bound - gap)
    ok = violations == 0
    _report("completion gap bound", ok,
            f"{violations}/{SEEDS_MEAN} violations, "
            f"tightest slack {tightest:.2e}")
    assert ok


def _win_table(baseline):
    table = {}
    for scenario, R in CELLS:
        wins = 0
        t_c3p, t_base = [], []
        for seed in range(SEEDS_WINRATE):
            tc = run_point("c3p", scenario, R, 100, seed).t_total
            tb = run_point(baseline, scenario, R, 100, seed).t_total
            wins += tc < tb
            t_c3p.append(tc)
            t_base.append(tb)
        table[(scenario, R)] = (wins, np.mean(t_c3p) < np.mean(t_base))
    return table


def _win_detail(table):
    total = sum(w for w, _ in table.values())
    pairs = len(table) * SEEDS_WINRATE
    cells = ", ".join(f"{scenario}/{R} {w}/{SEEDS_WINRATE}"
                      for (scenario, R), (w, _) in table.items())
    return total, pairs, cells


def test_collector_beats_uncoded_per_seed():
    table = _win_table("uncoded")
    total, pairs, cells = _win_detail(table)
    ok = (total / pairs >= 0.95
          and all(mean_lower for _, mean_lower in table.values()))
    _report("beats uncoded", ok,
            f"win rate {total}/{pairs} >= 95%; {cells}")
    assert ok


def test_collector_beats_repetition_rr_per_seed():
    # Known honest failure. A cadence-driven repetition scheduler only
    # duplicates work near the end of the task, a cost that grows with the
    # helper count and not with the task size, while the coding overhead
    # grows linearly with the task size. Past their crossover the
    # repetition baseline genuinely wins, so dominance holds only on the
    # small-task per-packet cell; the printed table documents the measured
    # crossover rather than hiding it behind a loosened threshold.
    table = _win_table("rr")
    total, pairs, cells = _win_detail(table)
    ok = (total / pairs >= 0.95
          and all(mean_lower for _, mean_lower in table.values()))
    _report("beats repetition round-robin", ok,
            f"win rate {total}/{pairs} >= 95%; {cells}")
    assert ok, ("repetition round-robin wins once coding overhead "
                f"(5% of rows) exceeds its end-game duplication: {cells}")


def test_rr_improvement_grows_with_helper_count():
    points = []
    for N in (100, 200, 400, 600):
        imps = []
        for seed in range(SEEDS_WINRATE):
            tc = run_point("c3p", "iid", 2000, N, seed,
                           channel=(0.1, 0.2)).t_total
            tr = run_point("rr", "iid", 2000, N, seed,
                           channel=(0.1, 0.2)).t_total
            imps.append(100.0 * (tr - tc) / tr)
        arr = np.asarray(imps)
        half = 2.145 * arr.std(ddof=1) / math.sqrt(arr.size)
        points.append((N, float(arr.mean()), float(half)))
    ok = all(points[k + 1][1] >= points[k][1]
             - (points[k][2] + points[k + 1][2])
             for k in range(len(points) - 1))
    detail = ", ".join(f"N={n}: {m:.1f}%+/-{h:.1f}" for n, m, h in points)
    _report("repetition improvement trend", ok, detail)
    assert ok


def test_codec_decodes_exactly_with_bounded_overhead():
    rng = np.random.default_rng(10)
    exact = 0
    trials = 1000
    for _ in range(trials):
        R = int(rng.integers(1, 65))
        cols = int(rng.integers(1, 9))
        task = make_task(rng.integers(-9, 10, size=(R, cols)),
                         rng.integers(-9, 10, size=cols))
        enc = LtEncoder(rng, task=task)
        dec = DecoderState(R, mode="int")
        while not dec.complete:
            pkt = enc.encode_next()
            dec.add(pkt.sources, compute_product(pkt, task.x))
        exact += np.array_equal(decoded_y(dec), task.rows @ task.x)

    ratios = []
    for seed in range(200):
        enc = LtEncoder(np.random.default_rng(seed), R=2000)
        dec = DecoderState(2000, mode="structure")
        while not dec.complete:
            dec.add(enc.encode_next().sources)
        ratios.append(dec.k_actual / 2000)
    mean_overhead = float(np.mean(ratios))
    ok = exact == trials and mean_overhead <= 0.10
    _report("codec exactness and overhead", ok,
            f"{exact}/{trials} exact decodes; mean overhead at 2000 rows "
            f"{mean_overhead:.4f} <= 0.10")
    assert ok


def test_figure_suite_renders_from_reference_tables(tmp_path):
    cfg = parse_config_dict({"R": [60, 120], "N": [3, 5],
                             "schedulers": ["c3p", "static", "rr"],
                             "replicates": 2, "base_seed": 1})
    summary = run_experiment(cfg, tmp_path)
    rng = np.random.default_rng(11)
    overlay = tmp_path / "tu_overlay.csv"
    lines = ["rtt,mu,a,tu_closed_form,tu_mc"]
    for mu, a in ((1.0, 0.5), (2.0, 0.25)):
        for rtt in (0.0, 0.2, 0.5, 1.0):
            lines.append(f"{rtt},{mu},{a},{expected_tu(mu, a, rtt)},"
                         f"{expected_tu_mc(mu, a, rtt, 100_000, rng)}")
    overlay.write_text("\n".join(lines) + "\n", encoding="utf-8")
    rendered = list(summary["figures"])
    rendered.append(figures.render(figures.FigureSpec(
        input=str(overlay), kind="tu_overlay",
        output=str(tmp_path / "tu_overlay.png"))))
    from pathlib import Path
    sizes = [Path(p).stat().st_size for p in rendered]
    kinds_done = {Path(p).stem for p in rendered}
    ok = (kinds_done == {"delay_vs_r", "improvement_vs_n", "efficiency",
                         "tu_overlay"}
          and all(s > 1000 for s in sizes))
    _report("figure suite", ok,
            f"rendered {sorted(kinds_done)}, sizes {sizes}")
    assert ok
