import csv
import io
import json
import os
import subprocess
import sys

import numpy as np
import pytest

from vollab.cli import main
from vollab.estimators import price_snapshot
from vollab.market_data import DATA_DIR_ENV, load_snapshot
from vollab.paths import SimulationConfig
from vollab.report import read_report_csv


def run(*argv):
    out = io.StringIO()
    code = main(list(argv), out=out)
    return code, out.getvalue()


@pytest.fixture(autouse=True)
def data_env(monkeypatch, data_dir):
    monkeypatch.setenv(DATA_DIR_ENV, str(data_dir))


class TestPrice:
    def test_shopify_gbm_consistent_with_fresh_run(self, tmp_path, data_dir):
        code, text = run("price", "shop_snapshot.json", "--out", str(tmp_path / "r.csv"))
        assert code == 0 and "SHOP" in text
        report = read_report_csv(tmp_path / "r.csv")
        snap = load_snapshot(data_dir / "shop_snapshot.json")
        ours = price_snapshot(snap, "gbm", sim=SimulationConfig(seed=0))
        fresh = price_snapshot(snap, "gbm", sim=SimulationConfig(seed=987_654))
        for cli_price, a, b in zip(report.estimates["gbm"], ours, fresh):
            assert cli_price == a.price
            assert abs(a.price - b.price) <= 3 * np.hypot(a.standard_error, b.standard_error)

    def test_heston_tesla_layout(self):
        code, text = run("price", "tsla_snapshot.json", "--model", "heston", "--params", "tsla_heston.json",
                         "--paths", "2000", "--steps", "100")
        assert code == 0
        lines = text.splitlines()
        assert lines[1].split() == ["Strike", "heston", "Market"]
        assert [ln.split()[0] for ln in lines[3:13]] == ["170", "175", "190", "195", "200", "205", "210", "215", "220", "225"]

    def test_merton_flags(self):
        code, text = run("price", "amc_snapshot.json", "--model", "merton",
                         "--lambda-j", "0.5", "--mu-j", "-0.1", "--sigma-j", "0.2", "--paths", "1000")
        assert code == 0 and "merton" in text

    def test_missing_snapshot(self):
        assert run("price", "nope.json")[0] == 2

    def test_merton_without_params(self):
        assert run("price", "amc_snapshot.json", "--model", "merton")[0] == 2

    def test_wrong_param_document(self):
        assert run("price", "tsla_snapshot.json", "--model", "merton", "--params", "tsla_heston.json")[0] == 2

    def test_malformed_snapshot(self, tmp_path):
        (tmp_path / "bad.json").write_text('{"symbol": "X"')
        assert run("price", str(tmp_path / "bad.json"))[0] == 2

    def test_invalid_paths_flag(self):
        with pytest.raises(SystemExit) as info:
            run("price", "shop_snapshot.json", "--paths", "0")
        assert info.value.code == 2

    def test_rate_override_changes_prices(self, tmp_path):
        run("price", "shop_snapshot.json", "--out", str(tmp_path / "a.csv"))
        run("price", "shop_snapshot.json", "--rate", "0.2", "--out", str(tmp_path / "b.csv"))
        a = read_report_csv(tmp_path / "a.csv").estimates["gbm"]
        b = read_report_csv(tmp_path / "b.csv").estimates["gbm"]
        assert all(y > x for x, y in zip(a, b))

    def test_dump_paths(self, tmp_path):
        code, _ = run("price", "shop_snapshot.json", "--paths", "10", "--dump-paths", str(tmp_path / "p.csv"))
        rows = list(csv.reader(open(tmp_path / "p.csv")))
        assert code == 0 and rows[0][:2] == ["path", "step0"] and len(rows) == 11


class TestCalibrate:
    def test_merton_synthetic_round_trip(self, tmp_path, data_dir):
        snap = load_snapshot("tsla_snapshot.json")
        sim = SimulationConfig(2000, 20, 1.0, 5)
        prices = [e.price for e in price_snapshot(snap, "merton", _Jump(0.5, -0.1, 0.2), sim)]
        doc = json.loads((data_dir / "tsla_snapshot.json").read_text())
        for c, p in zip(doc["contracts"], prices):
            c["market_price"] = p
        (tmp_path / "syn.json").write_text(json.dumps(doc))
        out = tmp_path / "p.json"
        code, text = run("calibrate", "--model", "merton", "--snapshot", str(tmp_path / "syn.json"),
                         "--paths", "2000", "--steps", "20", "--seed", "5", "--out", str(out))
        assert code == 0 and "objective=" in text and "iterations=" in text
        params = json.loads(out.read_text())["params"]
        repriced = price_snapshot(snap, "merton", _Jump(params["lambda_j"], params["mu_j"], params["sigma_j"]), sim)
        assert max(abs(e.price - p) for e, p in zip(repriced, prices)) < 0.01 * snap.spot

    def test_heston_identical_json_twice(self):
        args = ("calibrate", "--model", "heston", "--history", "tsla_history.csv", "--snapshot", "tsla_snapshot.json",
                "--seed", "3")
        a, b = run(*args), run(*args)
        assert a == b and a[0] == 0
        doc = json.loads(a[1])
        assert doc["model"] == "heston" and doc["seed"] == 3 and doc["params"]["v0"] == pytest.approx(0.36)

    def test_infeasible_bounds(self):
        code, _ = run("calibrate", "--model", "merton", "--snapshot", "meta_snapshot.json", "--lambda-bounds", "2", "1")
        assert code == 2

    def test_init_outside_bounds(self):
        code, _ = run("calibrate", "--model", "merton", "--snapshot", "meta_snapshot.json",
                      "--lambda-bounds", "1", "2")
        assert code == 2

    def test_heston_needs_history(self):
        assert run("calibrate", "--model", "heston", "--iv", "0.5")[0] == 2

    def test_short_history_is_input_error(self, tmp_path):
        (tmp_path / "h.csv").write_text("date,close\n2024-01-01,1\n2024-01-02,2\n2024-01-03,3\n")
        assert run("calibrate", "--model", "heston", "--history", str(tmp_path / "h.csv"), "--iv", "0.5")[0] == 2


class _Jump:
    def __init__(self, lam, mu, sig):
        self.lambda_j, self.mu_j, self.sigma_j, self.compensated = lam, mu, sig, True


class TestForecast:
    def test_amc_two_days(self, tmp_path):
        code, text = run("forecast", "amc_snapshot.json", "amc_history.csv", "--days", "2",
                         "--out", str(tmp_path / "f.csv"))
        assert code == 0
        rows = list(csv.reader(open(tmp_path / "f.csv")))
        assert rows[0] == ["strike", "2024-11-19", "2024-11-20"]
        assert [float(r[0]) for r in rows[1:]] == [3.0, 3.5, 4.0, 4.5, 5.0]

    def test_days_zero(self):
        assert run("forecast", "amc_snapshot.json", "amc_history.csv", "--days", "0")[0] == 2

    def test_tesla_three_days_monotone(self, tmp_path):
        code, _ = run("forecast", "tsla_snapshot.json", "tsla_history.csv", "--days", "3", "--out", str(tmp_path / "f.csv"))
        rows = list(csv.reader(open(tmp_path / "f.csv")))
        prices = np.array([[float(x) for x in r[1:]] for r in rows[1:]])
        strikes = [float(r[0]) for r in rows[1:]]
        assert code == 0 and prices.shape == (10, 3)
        assert strikes[:6] == [170, 175, 190, 195, 200, 205]
        assert np.all(np.diff(prices, axis=0) < 0)

    def test_garch_failure_exit_3(self, tmp_path):
        lines = ["date,close"] + [f"2024-{1 + i // 28:02d}-{1 + i % 28:02d},10" for i in range(120)]
        (tmp_path / "flat.csv").write_text("\n".join(lines) + "\n")
        assert run("forecast", "amc_snapshot.json", str(tmp_path / "flat.csv"))[0] == 3


class TestCompare:
    def test_replay_table_xi(self, tmp_path):
        code, text = run("compare", "--replay", "tsla_table_xi.csv", "--out", str(tmp_path / "r.csv"),
                         "--plot-data", str(tmp_path / "plot.csv"))
        assert code == 0
        r = read_report_csv(tmp_path / "r.csv")
        assert r.summary("heston").mae < r.summary("gbm").mae
        assert (tmp_path / "plot.csv").read_text().startswith("strike,heston,gbm,market\n")

    def test_single_model_equals_price(self):
        _, a = run("compare", "shop_snapshot.json", "--model", "gbm", "--paths", "3000")
        _, b = run("price", "shop_snapshot.json", "--paths", "3000")
        assert a.splitlines()[1:] == b.splitlines()[1:]

    def test_two_models(self):
        code, text = run("compare", "tsla_snapshot.json", "--model", "heston=tsla_heston.json", "--model", "gbm",
                         "--paths", "1000", "--steps", "50")
        assert code == 0 and text.splitlines()[1].split() == ["Strike", "heston", "gbm", "Market"]

    def test_needs_params_for_merton(self):
        assert run("compare", "shop_snapshot.json", "--model", "merton")[0] == 2

    def test_needs_input(self):
        assert run("compare")[0] == 2


def _cli(*argv):
    return subprocess.run([sys.executable, "-m", "vollab", *argv], capture_output=True, check=False)


@pytest.mark.parametrize("argv", [
    ("price", "tsla_snapshot.json", "--model", "heston", "--params", "tsla_heston.json", "--paths", "3000", "--steps", "200"),
    ("forecast", "tsla_snapshot.json", "tsla_history.csv", "--days", "3"),
    ("compare", "--replay", "tsla_table_xi.csv"),
    ("calibrate", "--model", "heston", "--history", "tsla_history.csv", "--iv", "0.6"),
])
def test_deterministic_bytes_under_parallelism(argv):
    jobs = str(max(2, os.cpu_count() or 2))
    a = _cli(*argv, "--seed", "42", "--jobs", jobs)
    b = _cli(*argv, "--seed", "42", "--jobs", jobs)
    c = _cli(*argv, "--seed", "42", "--jobs", "1")
    assert a.returncode == 0, a.stderr
    assert a.stdout == b.stdout == c.stdout
