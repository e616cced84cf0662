import csv
import json
import math

import numpy as np
import pytest

from levy_atm import cli
from levy_atm.regvar import log_rate_solved


def _rows(path):
    with open(path) as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return [{k: float(v) for k, v in row.items()} for row in csv.DictReader(lines)]


def _col(rows, key):
    return np.array([r[key] for r in rows])


def run(tmp_path, *args, sub="out"):
    out = tmp_path / sub
    rc = cli.main([*args, "--out", str(out)])
    return rc, out


def test_price_black_scholes_ivol(tmp_path):
    rc, out = run(tmp_path, "price", "--preset", "black_scholes", "--t-lo", "1e-6", "--ppd", "1")
    assert rc == 0
    rows = _rows(out / "prices.csv")
    assert len(rows) == 5
    assert np.all(np.abs(_col(rows, "ivol") - 0.2) < 1e-6)
    manifest = json.loads((out / "manifest.json").read_text())
    assert open(out / "prices.csv").readline().strip() == f"# config_hash: {manifest['config_hash']}"


def test_price_stable_ratio_settles(tmp_path):
    rc, out = run(tmp_path, "price", "--preset", "symmetric_stable", "--ppd", "1")
    assert rc == 0
    rows = sorted(_rows(out / "prices.csv"), key=lambda r: r["t"])
    r8, r7 = rows[0]["ratio"], rows[1]["ratio"]
    assert rows[0]["t"] == pytest.approx(1e-8)
    assert abs(r8 / r7 - 1) < 0.05


def test_asymptotics_stable_bt_slope(tmp_path):
    rc, out = run(tmp_path, "asymptotics", "--preset", "symmetric_stable", "--t-hi", "1e-6", "--ppd", "1")
    assert rc == 0
    rows = _rows(out / "asymptotics.csv")
    t, b = _col(rows, "t"), _col(rows, "B_t")
    slopes = np.diff(np.log(b)) / np.diff(np.log(t))
    assert np.all(np.abs(slopes - 1 / 1.5) < 1e-3)
    meta = json.loads((out / "asymptotics.json").read_text())
    assert meta["forced"] is False and meta["scaling"] == "debruijn_numeric"


def test_asymptotics_toy_bt_matches_solved_rate(tmp_path):
    rc, out = run(tmp_path, "asymptotics", "--preset", "toy_log", "--t-hi", "1e-6", "--ppd", "1")
    assert rc == 0
    rows = _rows(out / "asymptotics.csv")
    ref = log_rate_solved(1.5, 1.0, k=2 / 1.5)
    for r in rows:
        assert abs(r["B_t"] / ref(r["t"]) - 1) < 0.10


def test_asymptotics_brownian(tmp_path):
    rc, out = run(tmp_path, "asymptotics", "--preset", "black_scholes", "--t-lo", "1e-4", "--ppd", "1")
    assert rc == 0
    rows = _rows(out / "asymptotics.csv")
    assert np.allclose(_col(rows, "ivol_prediction"), 0.2)
    assert np.allclose(_col(rows, "prediction"), 0.2 * np.sqrt(_col(rows, "t")) / math.sqrt(2 * math.pi))


def test_asymptotics_refuses_failed_assumptions(tmp_path):
    rc, _ = run(tmp_path, "asymptotics", "--preset", "oscillatory", "--ppd", "1")
    assert rc == cli.EXIT_ASSUMPTION
    rc, out = run(tmp_path, "asymptotics", "--preset", "oscillatory", "--ppd", "1", "--force", sub="forced")
    assert rc == 0
    meta = json.loads((out / "asymptotics.json").read_text())
    assert meta["forced"] is True and "A3_monotone_density" in meta["failed_assumptions"]


def test_verify_exit_codes(tmp_path):
    rc, out = run(tmp_path, "verify", "--preset", "bump", "--checks", "assumptions")
    assert rc == cli.EXIT_CHECK
    reps = json.loads((out / "reports.json").read_text())
    assert [r["check_name"] for r in reps if not r["pass"]] == ["A3_monotone_density"]
    rc, out = run(tmp_path, "verify", "--preset", "toy_log", "--checks", "assumptions,vratio", sub="toy")
    assert rc == 0
    rc, out = run(tmp_path, "verify", "--preset", "toy_log", "--checks", "", sub="none")
    assert rc == 0 and json.loads((out / "reports.json").read_text()) == []


def test_verify_reports_carry_hash(tmp_path):
    rc, out = run(tmp_path, "verify", "--preset", "black_scholes")
    assert rc == 0
    manifest = json.loads((out / "manifest.json").read_text())
    reps = json.loads((out / "reports.json").read_text())
    assert reps and all(r["config_hash"] == manifest["config_hash"] for r in reps)


@pytest.mark.parametrize("args", [
    ["price", "--preset", "nope"],
    ["price"],
    ["price", "--preset", "toy_log", "--alpha", "2.5"],
    ["price", "--preset", "toy_log", "--t-lo", "1e-2", "--t-hi", "1e-3"],
    ["verify", "--preset", "toy_log", "--checks", "bogus"],
    ["price", "--preset", "toy_log", "--config", "/nonexistent.json"],
])
def test_config_errors(tmp_path, args):
    assert run(tmp_path, *args)[0] == cli.EXIT_CONFIG


def test_numerical_failure_exit_code(tmp_path):
    # x^-3.5 near 0 is not a Levy density
    cfg = {"model": {"preset": "custom", "density": {"pieces": [{"lo": 0.0, "hi": 1.0, "power": -3.5}]}}}
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(cfg))
    assert run(tmp_path, "price", "--config", str(path))[0] == cli.EXIT_NUMERIC


def test_config_file_and_flag_override(tmp_path):
    cfg = {"model": {"preset": "black_scholes", "sigma": 0.3}, "grid": {"lo": 1e-4, "hi": 1e-2, "ppd": 2},
           "seed": 7}
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cfg))
    rc, out = run(tmp_path, "price", "--config", str(path), "--sigma", "0.25")
    assert rc == 0
    rows = _rows(out / "prices.csv")
    assert len(rows) == 5 and np.allclose(_col(rows, "ivol"), 0.25, atol=1e-6)
    m = json.loads((out / "manifest.json").read_text())
    assert m["config"]["seed"] == 7 and m["config"]["model"]["sigma"] == 0.25


def test_config_hash_ignores_paths():
    a = cli.RunConfig("price", {"preset": "toy_log"}, out="a", workers=1)
    b = cli.RunConfig("price", {"preset": "toy_log"}, out="b", workers=4)
    c = cli.RunConfig("price", {"preset": "toy_log"}, seed=1)
    assert a.config_hash() == b.config_hash() != c.config_hash()


def _strip_run(path):
    m = json.loads(path.read_text())
    m.pop("run")
    # neither the output directory nor the worker count can change a number
    m["config"].pop("out")
    m["config"].pop("workers")
    return m


def test_determinism_price_with_mc(tmp_path):
    args = ["price", "--preset", "toy_log", "--t-lo", "1e-4", "--ppd", "1", "--mc-n", "20000", "--seed", "3"]
    _, a = run(tmp_path, *args, sub="a")
    _, b = run(tmp_path, *args, "--workers", "2", sub="b")
    assert (a / "prices.csv").read_bytes() == (b / "prices.csv").read_bytes()
    assert _strip_run(a / "manifest.json") == _strip_run(b / "manifest.json")


def test_determinism_verify(tmp_path):
    args = ["verify", "--preset", "symmetric_stable", "--checks", "assumptions,concentration"]
    _, a = run(tmp_path, *args, sub="a")
    _, b = run(tmp_path, *args, sub="b")
    assert (a / "reports.json").read_bytes() == (b / "reports.json").read_bytes()
    assert _strip_run(a / "manifest.json") == _strip_run(b / "manifest.json")


def test_custom_density_matches_preset(tmp_path):
    piece = {"lo": -1, "hi": "inf", "coef": 1, "power": -2.5, "exp_rate": -1}
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"model": {"preset": "custom", "alpha": 1.5, "density": {"pieces": [piece]}}}))
    grid = ["--t-lo", "1e-4", "--ppd", "1"]
    _, a = run(tmp_path, "price", "--config", str(path), *grid, sub="custom")
    _, b = run(tmp_path, "price", "--preset", "symmetric_stable", *grid, sub="preset")
    np.testing.assert_allclose(_col(_rows(a / "prices.csv"), "exact"), _col(_rows(b / "prices.csv"), "exact"),
                               rtol=1e-10)
