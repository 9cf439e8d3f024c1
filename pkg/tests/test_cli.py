"""Config parsing, the experiment runner's outputs, and the verifier."""

import csv
import json
import math

import pytest

from c3plab import cli
from c3plab.cli import (
    ConfigError,
    ExperimentConfig,
    aggregate_rows,
    improvement_rows,
    load_config,
    parse_config_dict,
    run_experiment,
    run_verification,
    write_trace,
)


def write_config(tmp_path, payload, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(payload), encoding="utf-8")
    return path


def read_rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


SMALL = {
    "name": "small",
    "R": [120, 240],
    "N": [4],
    "schedulers": ["c3p", "static", "uncoded", "rr"],
    "replicates": 3,
    "base_seed": 5,
}


class TestConfigParsing:
    def test_defaults_fill_in(self, tmp_path):
        cfg = load_config(write_config(tmp_path, {"R": 100}))
        assert cfg.r_values == (100,)
        assert cfg.n_values == (100,)
        assert cfg.scenario == "iid"
        assert cfg.schedulers == ("c3p",)
        assert cfg.mu_choices == (1.0, 2.0, 4.0)
        assert cfg.a_rule == ("fixed", 0.5)
        assert cfg.channel == ("poisson", 10.0, 20.0, 0.1)
        assert cfg.stop_mode == "count"
        assert cfg.overhead == 0.05
        assert cfg.replicates == 1

    def test_scalar_and_list_sweeps(self, tmp_path):
        cfg = load_config(write_config(tmp_path, {"R": [100, 200], "N": 7}))
        assert cfg.r_values == (100, 200)
        assert cfg.n_values == (7,)

    @pytest.mark.parametrize("payload", [
        {"R": 100, "bogus": 1},
        {"R": []},
        {"R": -5},
        {"R": 100, "scenario": "warped"},
        {"R": 100, "schedulers": []},
        {"R": 100, "schedulers": ["c3p", "c3p"]},
        {"R": 100, "schedulers": ["magic"]},
        {"R": 100, "mu_choices": [0.0]},
        {"R": 100, "a_rule": {"kind": "fixed", "value": -1}},
        {"R": 100, "a_rule": {"kind": "mystery"}},
        {"R": 100, "channel": {"kind": "poisson", "rate_interval_mbps": [5, 2]}},
        {"R": 100, "channel": {"kind": "fixed", "rate_mbps": 0}},
        {"R": 100, "channel": {"kind": "carrier-pigeon"}},
        {"R": 100, "packet_bits": {"bx": 1, "br": 1}},
        {"R": 100, "alpha": 1.0},
        {"R": 100, "estimator": "psychic"},
        {"R": 100, "stop": {"mode": "hope"}},
        {"R": 100, "stop": {"mode": "count", "overhead": -0.1}},
        {"R": 100, "replicates": 0},
        {"R": 100, "base_seed": -1},
        {"R": 100, "event_cap": 0},
    ])
    def test_rejects_bad_payloads(self, tmp_path, payload):
        with pytest.raises(ConfigError):
            load_config(write_config(tmp_path, payload))

    def test_rejects_overhead_for_uncoded_schedulers(self):
        with pytest.raises(ConfigError, match="uncoded"):
            parse_config_dict({"R": 100,
                               "overhead_by_scheduler": {"rr": 0.05}})

    def test_missing_r_and_invalid_json(self, tmp_path):
        with pytest.raises(ConfigError, match="requires R"):
            parse_config_dict({})
        broken = tmp_path / "broken.json"
        broken.write_text("{not json", encoding="utf-8")
        with pytest.raises(ConfigError, match="not valid JSON"):
            load_config(broken)

    def test_unreadable_config_path(self, tmp_path):
        with pytest.raises(ConfigError, match="cannot read"):
            load_config(tmp_path / "missing.json")

    def test_main_exit_code_on_config_error(self, tmp_path, capsys):
        path = write_config(tmp_path, {"R": 100, "schedulers": ["magic"]})
        code = cli.main(["run", "--config", str(path),
                         "--out", str(tmp_path / "out")])
        assert code == cli.EXIT_CONFIG
        assert "config error" in capsys.readouterr().err


@pytest.fixture(scope="module")
def small_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("small_run")
    cfg = parse_config_dict(SMALL)
    summary = run_experiment(cfg, out)
    return cfg, out, summary


class TestRunOutputs:
    def test_results_table_shape(self, small_run):
        cfg, out, summary = small_run
        rows = read_rows(out / "results.csv")
        assert summary["rows"] == len(rows) == 2 * 3 * 4
        assert list(rows[0]) == list(cli.RESULT_COLUMNS)
        seeds = {int(r["seed"]) for r in rows}
        assert seeds == {5, 6, 7}
        for row in rows:
            assert float(row["T_total"]) > 0
            assert int(row["waste"]) >= 0

    def test_overhead_rule_per_scheduler(self, small_run):
        _, out, _ = small_run
        for row in read_rows(out / "results.csv"):
            k = int(row["K_actual"])
            if row["scheduler"] in ("uncoded", "rr"):
                assert k == 0
            else:
                assert k == math.ceil(0.05 * int(row["R"]))

    def test_aggregate_table(self, small_run):
        _, out, _ = small_run
        rows = read_rows(out / "aggregate.csv")
        assert list(rows[0]) == list(cli.AGGREGATE_COLUMNS)
        assert len(rows) == 2 * 4
        for row in rows:
            assert int(row["n"]) == 3
            assert float(row["t_total_ci95"]) >= 0

    def test_improvement_is_paired_and_signed(self, small_run):
        _, out, _ = small_run
        results = read_rows(out / "results.csv")
        rows = read_rows(out / "improvement.csv")
        assert list(rows[0]) == list(cli.IMPROVEMENT_COLUMNS)
        assert {r["baseline"] for r in rows} == {"static", "uncoded", "rr"}
        by_key = {(r["R"], r["scheduler"], r["seed"]): float(r["T_total"])
                  for r in results}
        want = []
        for r, s, seed in sorted(by_key):
            if s == "static" and r == "120":
                t_b = by_key[(r, s, seed)]
                t_c = by_key[(r, "c3p", seed)]
                want.append(100.0 * (t_b - t_c) / t_b)
        cell = next(r for r in rows
                    if r["baseline"] == "static" and r["R"] == "120")
        assert float(cell["improvement_pct_mean"]) == pytest.approx(
            sum(want) / len(want), rel=1e-9)

    def test_figures_rendered_beside_tables(self, small_run):
        _, out, summary = small_run
        assert (out / "delay_vs_r.png").exists()
        assert (out / "efficiency.png").exists()
        # Only one N value, so no improvement-vs-helpers figure.
        assert not (out / "improvement_vs_n.png").exists()
        assert len(summary["figures"]) == 2

    def test_single_replicate_ci_is_zero(self, tmp_path):
        cfg = parse_config_dict({"R": 60, "N": 3, "replicates": 1})
        run_experiment(cfg, tmp_path)
        row = read_rows(tmp_path / "results.csv")
        assert len(row) == 1
        agg = read_rows(tmp_path / "aggregate.csv")[0]
        assert agg["t_total_ci95"] == "0"


class TestDeterminism:
    def test_reruns_and_workers_match(self, tmp_path, monkeypatch):
        cfg = parse_config_dict({"R": 90, "N": 3,
                                 "schedulers": ["c3p", "rr"],
                                 "replicates": 2, "base_seed": 21})
        run_experiment(cfg, tmp_path / "a")
        run_experiment(cfg, tmp_path / "b")
        monkeypatch.setenv(cli.WORKERS_ENV, "3")
        run_experiment(cfg, tmp_path / "c")

        agg = [(tmp_path / d / "aggregate.csv").read_bytes()
               for d in ("a", "b", "c")]
        assert agg[0] == agg[1] == agg[2]

        def strip(d):
            rows = read_rows(tmp_path / d / "results.csv")
            return [{k: v for k, v in r.items() if k != "wall_ms"}
                    for r in rows]

        assert strip("a") == strip("b") == strip("c")

    def test_bad_worker_env_rejected(self, monkeypatch):
        monkeypatch.setenv(cli.WORKERS_ENV, "many")
        with pytest.raises(ConfigError):
            cli.worker_count()


class TestAggregationHelpers:
    def test_mean_ci_matches_t_interval(self):
        mean, half = cli._mean_ci95([1.0, 2.0, 3.0, 4.0])
        assert mean == pytest.approx(2.5)
        # t(0.975, df=3) = 3.1824, sem = sqrt(5/3)/2
        assert half == pytest.approx(3.182446 * math.sqrt(5.0 / 3.0) / 2,
                                     rel=1e-5)

    def test_nan_values_are_excluded(self):
        mean, half = cli._mean_ci95([1.0, float("nan"), 3.0])
        assert mean == pytest.approx(2.0)
        assert half > 0

    def test_improvement_skips_missing_pairs(self):
        rows = [
            {"R": 10, "N": 2, "scenario": "iid", "scheduler": "c3p",
             "seed": 0, "T_total": 4.0},
            {"R": 10, "N": 2, "scenario": "iid", "scheduler": "rr",
             "seed": 0, "T_total": 5.0},
            {"R": 10, "N": 2, "scenario": "iid", "scheduler": "rr",
             "seed": 1, "T_total": 9.0},
        ]
        out = improvement_rows(rows)
        assert len(out) == 1
        assert out[0]["n"] == 1
        assert out[0]["improvement_pct_mean"] == pytest.approx(20.0)

    def test_aggregate_group_ordering_follows_first_seen(self):
        rows = [
            {"R": 20, "N": 2, "scenario": "iid", "scheduler": "rr",
             "seed": 0, "T_total": 5.0, "K_actual": 0,
             "mean_efficiency": 1.0, "min_efficiency": 1.0, "waste": 0},
            {"R": 10, "N": 2, "scenario": "iid", "scheduler": "c3p",
             "seed": 0, "T_total": 4.0, "K_actual": 1,
             "mean_efficiency": 1.0, "min_efficiency": 1.0, "waste": 0},
        ]
        agg = aggregate_rows(rows)
        assert [a["R"] for a in agg] == [20, 10]


class TestTrace:
    def test_trace_schema_and_determinism(self, tmp_path):
        cfg_path = write_config(tmp_path, {"R": 40, "N": 3, "base_seed": 9})
        code = cli.main(["trace", "--config", str(cfg_path), "--seed", "2",
                         "--out", str(tmp_path / "t1")])
        assert code == cli.EXIT_OK
        rows = read_rows(tmp_path / "t1" / "trace.csv")
        assert list(rows[0]) == list(cli.TRACE_COLUMNS)
        names = {r["event"] for r in rows}
        assert {"send", "arrive", "ack", "done", "result"} <= names
        times = [float(r["time"]) for r in rows]
        assert times == sorted(times)
        cfg = load_config(cfg_path)
        again = write_trace(cfg, 2, tmp_path / "t2")
        assert (tmp_path / "t1" / "trace.csv").read_bytes() == \
            open(again, "rb").read()

    def test_trace_of_baseline_scheduler(self, tmp_path):
        cfg = parse_config_dict({"R": 30, "N": 3, "schedulers": ["static"]})
        path = write_trace(cfg, 0, tmp_path)
        rows = read_rows(path)
        # The a-priori salvo never arms the adaptive timeout machinery.
        assert all(r["event"] != "timeout" for r in rows)
        sends = [r for r in rows if r["event"] == "send"]
        assert all(float(r["time"]) == 0.0 for r in sends)
        assert len(sends) == 30 + 2  # overhead rows ride along
        assert len(rows) > 30


class TestVerify:
    def test_battery_passes_and_writes_reports(self, tmp_path, capsys):
        assert run_verification(tmp_path) is True
        text = (tmp_path / "report.txt").read_text(encoding="utf-8")
        assert "overall: PASS" in text
        assert "FAIL" not in text.replace("PASS/FAIL", "")
        rows = read_rows(tmp_path / "report.csv")
        assert len(rows) == 6
        assert all(r["passed"] == "1" for r in rows)
        overlay = read_rows(tmp_path / "tu_overlay.csv")
        assert list(overlay[0]) == ["rtt", "mu", "a", "tu_closed_form",
                                    "tu_mc"]
        assert len(overlay) == len(cli.TU_GRID) * len(cli.TU_RTTS)
        assert (tmp_path / "tu_overlay.png").exists()
        assert "overall: PASS" in capsys.readouterr().out

    def test_battery_catches_wrong_closed_form(self, tmp_path):
        def warped(mu, a, rtt_data):
            from c3plab.theory import expected_tu
            return expected_tu(mu, a, rtt_data) + 0.05

        assert run_verification(tmp_path, closed_form=warped) is False
        text = (tmp_path / "report.txt").read_text(encoding="utf-8")
        assert "overall: FAIL" in text
        assert "FAIL  idle-time closed form vs monte carlo" in text

    def test_main_verify_exit_code(self, tmp_path):
        assert cli.main(["verify", "--out", str(tmp_path)]) == cli.EXIT_OK


class TestScenarioAwareAllocation:
    def test_fixed_scenario_static_uses_realized_runtimes(self, tmp_path):
        cfg = parse_config_dict({
            "R": 150, "N": 4, "scenario": "fixed",
            "schedulers": ["c3p", "static"], "replicates": 2,
            "base_seed": 11})
        run_experiment(cfg, tmp_path)
        rows = read_rows(tmp_path / "results.csv")
        by = {(r["scheduler"], r["seed"]): float(r["T_total"]) for r in rows}
        # With realized runtimes known, the a-priori split is near optimal;
        # the adaptive collector pays only channel latency on top.
        for seed in ("11", "12"):
            assert by[("c3p", seed)] == pytest.approx(by[("static", seed)],
                                                      rel=0.01)

    def test_decode_stop_runs_and_reports_overhead(self, tmp_path):
        cfg = parse_config_dict({"R": 60, "N": 4,
                                 "stop": {"mode": "decode"},
                                 "replicates": 2, "base_seed": 3})
        run_experiment(cfg, tmp_path)
        rows = read_rows(tmp_path / "results.csv")
        assert all(int(r["K_actual"]) > 0 for r in rows)
