import csv
import json

import pytest

from ksep import cli

SMALL = """
[experiment]
K = 2
times = 30, 60
replicas = 150
keep = 24
[L_rule]
kind = c_bt
c = 5
[intervals]
counts = (1, 2], (2, inf)
[exact]
instances = 3
[kappa_tau]
times = 20, 40, 80
"""


@pytest.fixture
def cfg(tmp_path):
    p = tmp_path / "small.ini"
    p.write_text(SMALL)
    return p


def _run(args):
    return cli.main([str(a) for a in args])


def _payload(out):
    m = json.loads((out / "manifest.json").read_text())
    m.pop("created")
    reports = {p.name: p.read_text() for p in sorted((out / "reports").iterdir())}
    return m, (out / "results.csv").read_text(), reports


@pytest.mark.parametrize("command", ["intensity", "kappa-tau"])
def test_deterministic_subcommands(command, cfg, tmp_path):
    out = tmp_path / command
    assert _run(["--config", cfg, command, "--out", out]) == 0
    m = json.loads((out / "manifest.json").read_text())
    assert m["schema_version"] == cli.SCHEMA_VERSION and m["passed"]
    assert m["config"]["experiment"]["times"] == "30, 60"


def test_verify_exact(cfg, tmp_path):
    out = tmp_path / "ve"
    assert _run(["verify-exact", "--config", cfg, "--out", out]) == 0
    rows = list(csv.DictReader(open(out / "results.csv")))
    assert {r["check"] for r in rows} >= {"VU", "difference_formula", "factorial_bound",
                                          "product_measure_bound", "nto2", "kappa_bound",
                                          "tau_bound"}
    assert all(r["passed"] == "True" for r in rows)


def test_simulate_is_reproducible_and_thread_invariant(cfg, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert _run(["simulate", "--config", cfg, "--seed", 4, "--out", a]) == 0
    assert _run(["simulate", "--config", cfg, "--seed", 4, "--threads", 3, "--out", b]) == 0
    pa, pb = _payload(a), _payload(b)
    assert pa[1] == pb[1] and pa[2] == pb[2]
    assert pa[0]["threads"] == 1 and pb[0]["threads"] == 3
    pa[0].pop("threads"), pb[0].pop("threads")
    assert pa[0] == pb[0]
    header = pa[1].splitlines()[0]
    assert header == "replica,t,sim_time,L,m,position,rescaled"
    assert pa[0]["seed"] == 4 and pa[0]["config"]["experiment"]["seed"] == "4"


def test_trend_and_fit_write_outputs(cfg, tmp_path):
    rc = _run(["trend", "--config", cfg, "--out", tmp_path / "tr"])
    assert rc in (0, 1)
    assert (tmp_path / "tr" / "results.csv").read_text().startswith("t,ks_distance")
    rc = _run(["fit", "--config", cfg, "--out", tmp_path / "fit"])
    assert rc in (0, 1)
    m = json.loads((tmp_path / "fit" / "manifest.json").read_text())
    assert m["passed"] == (rc == 0)


def test_exit_codes(tmp_path, monkeypatch):
    bad = tmp_path / "bad.ini"
    bad.write_text("[experiment]\nK = x\n")
    assert _run(["simulate", "--config", bad, "--out", tmp_path / "o"]) == 2
    assert _run(["simulate", "--config", tmp_path / "missing.ini", "--out", tmp_path / "o"]) == 2
    monkeypatch.setenv("KSEP_THREADS", "many")
    assert _run(["intensity", "--out", tmp_path / "o"]) == 2
    monkeypatch.setenv("KSEP_THREADS", "2")
    assert _run(["intensity", "--out", tmp_path / "o2"]) == 0
    assert json.loads((tmp_path / "o2" / "manifest.json").read_text())["threads"] == 2
    big = tmp_path / "big.ini"
    big.write_text("[experiment]\nreplicas = 20\nkeep = 2\n[intervals]\nmean = (-50, inf)\n"
                   "[experiment]\ntimes = 30\n")
    # duplicate sections are a parse error
    assert _run(["fit", "--config", big, "--out", tmp_path / "o3"]) == 2
    big.write_text("[experiment]\nreplicas = 120\nkeep = 2\ntimes = 30\n[intervals]\n"
                   "counts = (-50, inf)\n")
    assert _run(["fit", "--config", big, "--out", tmp_path / "o4"]) == 3


def test_check_failure_exit_code(tmp_path):
    p = tmp_path / "decay.ini"
    # kappa does not decay on this grid when it starts too early
    p.write_text("[kappa_tau]\ntimes = 2, 3, 4\nA = (-5, -4]\n")
    rc = _run(["kappa-tau", "--config", p, "--out", tmp_path / "kt"])
    rep = json.loads((tmp_path / "kt" / "reports" / "kappa_tau.json").read_text())
    assert rc == (0 if rep["decreasing_last_three"] else 1)
