import json
import pathlib
import shutil
import subprocess
import sys
import time

import numpy as np
import pytest

from twostream.cli import SCHEDULE_HEADER, main
from twostream.dataio import read_claims, read_counts

GOLDEN = pathlib.Path(__file__).parent / "golden"
sys.path.insert(0, str(GOLDEN))
from make_golden import DRAWS, SCHEDULE_ARGS  # noqa: E402


def run(tmp_path, *argv):
    return main([str(a) for a in argv])


def read_json(path):
    return json.loads(pathlib.Path(path).read_text())


@pytest.fixture(scope="module")
def small_run(tmp_path_factory):
    """Counts and claims from the golden low-intensity model, 60 periods."""
    d = tmp_path_factory.mktemp("small")
    assert main(["simulate", "--periods", "60", "--freq-params", str(GOLDEN / "freq.json"),
                 "--sev-params", str(GOLDEN / "sev.json"), "--seed", "11",
                 "--counts-out", str(d / "counts.csv"), "--claims-out", str(d / "claims.csv")]) == 0
    return d


def test_simulate_is_byte_identical(tmp_path):
    for name in ("a", "b"):
        assert run(tmp_path, "simulate", "--periods", "20", "--seed", "5",
                   "--counts-out", tmp_path / f"{name}_n.csv",
                   "--claims-out", tmp_path / f"{name}_y.csv") == 0
    assert (tmp_path / "a_n.csv").read_bytes() == (tmp_path / "b_n.csv").read_bytes()
    assert (tmp_path / "a_y.csv").read_bytes() == (tmp_path / "b_y.csv").read_bytes()


def test_simulate_counts_match_claims(small_run):
    _, counts = read_counts(small_run / "counts.csv")
    claims = read_claims(small_run / "claims.csv")
    assert len(counts) == 60
    assert sum(counts) == len(claims)


def test_infinite_mean_scenario_rejects_finite_delta(tmp_path, capsys):
    code = run(tmp_path, "simulate", "--scenario", "infinite-mean", "--delta", "2",
               "--counts-out", tmp_path / "n.csv")
    assert code == 2
    assert "error" in capsys.readouterr().err


def test_simulate_performance(tmp_path):
    start = time.perf_counter()
    assert run(tmp_path, "simulate", "--periods", "10000", "--counts-out", tmp_path / "n.csv") == 0
    assert time.perf_counter() - start < 5.0


def test_fit_frequency_outputs(small_run, tmp_path):
    out = tmp_path / "f.json"
    assert run(tmp_path, "fit-frequency", small_run / "counts.csv", "--out", out,
               "--trace", tmp_path / "t.csv", "--plot", tmp_path / "h.csv") == 0
    rep = read_json(out)
    assert set(rep["params"]) == {"p", "alpha1", "alpha2", "beta"}
    assert rep["init"]["source"] == "moments"
    assert rep["n_periods"] == 60
    assert rep["convergence"]["max_loglik_decrease"] <= 1e-8
    trace = np.loadtxt(tmp_path / "t.csv", delimiter=",", skiprows=1, ndmin=2)
    assert np.all(np.diff(trace[:, -1]) >= -1e-8)
    hist = (tmp_path / "h.csv").read_text().splitlines()
    assert hist[0] == "bin_low,bin_high,empirical_prob,model_prob"
    emp = np.loadtxt(tmp_path / "h.csv", delimiter=",", skiprows=1, ndmin=2)[:, 2]
    assert emp.sum() == pytest.approx(1.0)


def test_fit_frequency_user_init_is_echoed(small_run, tmp_path):
    out = tmp_path / "f.json"
    assert run(tmp_path, "fit-frequency", small_run / "counts.csv", "--init", "4,3,1.5,0.6",
               "--max-iter", "3", "--out", out, "--trace", "", "--plot", "") == 0
    init = read_json(out)["init"]
    assert init["source"] == "user"
    assert (init["alpha1"], init["alpha2"], init["beta"], init["p"]) == (4.0, 3.0, 1.5, 0.6)


def test_fit_severity_fixed_nu_echo(small_run, tmp_path):
    out = tmp_path / "s.json"
    assert run(tmp_path, "fit-severity", small_run / "claims.csv", "--nu", "fixed:0.9039196",
               "--init", "1.5,2.5,1.0,0.5", "--out", out, "--trace", tmp_path / "t.csv",
               "--plot", "") == 0
    rep = read_json(out)
    assert rep["nu"] == {"mode": "fixed", "fixed": True, "value": 0.9039196}
    assert rep["params"]["nu"] == 0.9039196
    assert rep["init"]["nu"] == 0.9039196
    header = (tmp_path / "t.csv").read_text().splitlines()[0].split(",")
    trace = np.loadtxt(tmp_path / "t.csv", delimiter=",", skiprows=1, ndmin=2)
    assert np.all(trace[:, header.index("nu")] == 0.9039196)


def test_fit_severity_free_nu(small_run, tmp_path):
    out = tmp_path / "s.json"
    assert run(tmp_path, "fit-severity", small_run / "claims.csv", "--nu", "free",
               "--init", "1.5,2.5,1.0,0.5", "--max-iter", "50", "--out", out,
               "--trace", "", "--plot", tmp_path / "h.csv") == 0
    rep = read_json(out)
    assert rep["nu"]["mode"] == "free" and rep["nu"]["fixed"] is False
    assert rep["convergence"]["max_loglik_decrease"] <= 1e-8


@pytest.mark.slow
def test_roundtrip_recovers_finite_mean_severity(tmp_path):
    # default portfolio counts give about 5.5e3 claims per period
    assert run(tmp_path, "simulate", "--periods", "18", "--seed", "3",
               "--counts-out", tmp_path / "n.csv", "--claims-out", tmp_path / "y.csv") == 0
    assert run(tmp_path, "fit-severity", tmp_path / "y.csv", "--nu", "free",
               "--out", tmp_path / "s.json", "--trace", "", "--plot", "") == 0
    got = read_json(tmp_path / "s.json")["params"]
    truth = {"mu": 1.0, "delta": 2.0, "sigma": 1.0, "nu": 0.9039196}
    for k, v in truth.items():
        assert abs(got[k] - v) <= 0.25 * v, k


def test_golden_schedule_matches_exactly(tmp_path):
    for name in ("counts.csv", "claims.csv", "freq.json", "sev.json"):
        shutil.copy(GOLDEN / name, tmp_path / name)
    args = [a if not a.endswith((".csv", ".json")) else str(tmp_path / a) for a in SCHEDULE_ARGS]
    assert main(args + ["--out", str(tmp_path / "schedule.csv")]) == 0
    assert (tmp_path / "schedule.csv").read_bytes() == (GOLDEN / "schedule.csv").read_bytes()
    assert f"--draws {DRAWS}" in " ".join(SCHEDULE_ARGS)


def test_golden_schedule_matches_quadrature_oracle():
    rows = np.genfromtxt(GOLDEN / "schedule.csv", delimiter=",", names=True, dtype=None,
                         encoding="utf-8")
    oracle = read_json(GOLDEN / "schedule_oracle.json")
    assert len(rows) == len(oracle) == 9
    for row, ref in zip(rows, oracle):
        assert row["period"] == ref["period"]
        assert row["frequency_mean"] == pytest.approx(ref["frequency_mean"], rel=1e-9)
        assert row["severity_mean"] == pytest.approx(ref["severity_mean"], rel=1e-9)


def test_premium_schedule_columns_and_period_zero(small_run, tmp_path):
    out = tmp_path / "p.csv"
    assert run(tmp_path, "premium", "--counts", small_run / "counts.csv",
               "--freq-params", GOLDEN / "freq.json", "--sev-params", GOLDEN / "sev.json",
               "--draws", "500", "--out", out) == 0
    lines = out.read_text().splitlines()
    assert tuple(lines[0].split(",")) == SCHEDULE_HEADER
    assert lines[1].startswith("0,0,")
    assert len(lines) == 62


def test_premium_infinite_mean_finite_after_first_claim(tmp_path, capsys):
    (tmp_path / "n.csv").write_text("period,count\n1,2\n2,0\n3,1\n")
    (tmp_path / "y.csv").write_text("period,amount\n1,0.4\n1,3.0\n3,1.2\n")
    (tmp_path / "f.json").write_text(json.dumps({"p": 0.6, "alpha1": 4, "alpha2": 3, "beta": 1.5}))
    (tmp_path / "s.json").write_text(json.dumps({"nu": 0.9, "mu": 1, "delta": 0.3, "sigma": 0.5}))
    out = tmp_path / "p.json"
    assert run(tmp_path, "premium", "--counts", tmp_path / "n.csv", "--claims", tmp_path / "y.csv",
               "--freq-params", tmp_path / "f.json", "--sev-params", tmp_path / "s.json",
               "--draws", "500", "--out", out) == 0
    rows = read_json(out)["rows"]
    assert rows[0]["infinite_mean"] is True and rows[0]["premium"] is None
    for r in rows[1:]:
        assert r["infinite_mean"] is False
        assert np.isfinite(r["premium"]) and r["premium"] > 0


def test_premium_json_to_stdout(small_run, tmp_path, capsys):
    assert run(tmp_path, "premium", "--counts", small_run / "counts.csv", "--claims",
               small_run / "claims.csv", "--freq-params", GOLDEN / "freq.json",
               "--sev-params", GOLDEN / "sev.json", "--draws", "200", "--format", "json",
               "--out", "-", "--window", "5") == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["window"] == 5 and rep["ipr_level"] == 0.9 and len(rep["rows"]) == 61


def test_gof_default_replicates_echo_and_exit_zero(tmp_path):
    (tmp_path / "n.csv").write_text("period,count\n" + "".join(f"{i},{c}\n" for i, c in
                                                                enumerate([30, 0] * 20, 1)))
    out = tmp_path / "g.json"
    assert run(tmp_path, "gof", tmp_path / "n.csv", "--params", GOLDEN / "freq.json",
               "--out", out) == 0
    rep = read_json(out)
    assert rep["bootstrap_replicates"] == 999
    assert max(rep["p_value"].values()) < 0.01


def test_loglik_additivity(small_run, tmp_path, capsys):
    assert run(tmp_path, "loglik", "--counts", small_run / "counts.csv", "--claims",
               small_run / "claims.csv", "--freq-params", GOLDEN / "freq.json",
               "--sev-params", GOLDEN / "sev.json") == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["global"] == pytest.approx(rep["frequency"] + rep["severity"], abs=1e-9)
    assert rep["periods"] == 60


@pytest.mark.parametrize("content,code", [
    ("", 2),
    ("period,count\n", 2),
    ("period,count\n1,x\n", 2),
    ("period,count\n1,-1\n", 2),
])
def test_bad_counts_files(tmp_path, capsys, content, code):
    (tmp_path / "n.csv").write_text(content)
    assert run(tmp_path, "fit-frequency", tmp_path / "n.csv", "--out", tmp_path / "f.json") == code
    assert capsys.readouterr().err


def test_negative_claim_names_line(tmp_path, capsys):
    (tmp_path / "y.csv").write_text("period,amount\n1,2.0\n1,-3\n")
    assert run(tmp_path, "fit-severity", tmp_path / "y.csv", "--out", tmp_path / "s.json") == 2
    assert "line 3" in capsys.readouterr().err


def test_missing_file_is_io_error(tmp_path):
    assert run(tmp_path, "fit-frequency", tmp_path / "nope.csv") == 4


def test_malformed_params_json(tmp_path, capsys):
    (tmp_path / "n.csv").write_text("period,count\n1,3\n")
    (tmp_path / "bad.json").write_text('{"p": 0.5,\n "alpha1": }')
    assert run(tmp_path, "gof", tmp_path / "n.csv", "--params", tmp_path / "bad.json") == 2
    assert "line 2" in capsys.readouterr().err


def test_solver_failure_exit_code(tmp_path, monkeypatch):
    from twostream import emfit
    from twostream.errors import SolverFailure

    def boom(*a, **k):
        raise SolverFailure("forced", 1.0, 0)

    monkeypatch.setattr(emfit, "fit_frequency", boom)
    (tmp_path / "n.csv").write_text("period,count\n1,3\n2,5\n3,0\n")
    assert run(tmp_path, "fit-frequency", tmp_path / "n.csv", "--out", tmp_path / "f.json") == 3


def test_seed_precedence(tmp_path, monkeypatch):
    def sim(name, *extra):
        assert run(tmp_path, "simulate", "--periods", "30", "--counts-out", tmp_path / name,
                   *extra) == 0
        return (tmp_path / name).read_bytes()

    (tmp_path / "cfg").write_text("# options\nseed = 9\nperiods = 30\n")
    monkeypatch.delenv("PRICING_SEED", raising=False)
    zero = sim("zero.csv")
    nine = sim("nine.csv", "--seed", "9")
    assert zero != nine
    monkeypatch.setenv("PRICING_SEED", "9")
    assert sim("env.csv") == nine
    monkeypatch.setenv("PRICING_SEED", "0")
    assert sim("file.csv", "--config", tmp_path / "cfg") == nine
    assert sim("flag.csv", "--config", tmp_path / "cfg", "--seed", "0") == zero


def test_config_rejects_unknown_key(tmp_path):
    (tmp_path / "cfg").write_text("colour = red\n")
    assert run(tmp_path, "simulate", "--config", tmp_path / "cfg",
               "--counts-out", tmp_path / "n.csv") == 2


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "twostream", "simulate", "--periods", "3",
                          "--counts-out", str(tmp_path / "n.csv")], capture_output=True)
    assert res.returncode == 0
    assert (tmp_path / "n.csv").read_text().startswith("period,count\n")
