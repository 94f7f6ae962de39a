import math

import numpy as np
import pytest

from bioflux.errors import InvalidParameter
from bioflux.experiments import (Convergence, StudyReport, StudySpec, decay_study, load_study,
                                 reference_params, run_many, run_study, simulate, worker_count)
from bioflux.grid import Grid
from bioflux.scenarios import scenario

BASE = """\
[grid]
nx = 16
ny = 16
Lx = 4
Ly = 4
[model]
m = 2
[nonlinearity.f]
kind = fisher
[run]
purpose = attractor
"""


def test_report_verdicts(tmp_path):
    rep = StudyReport("demo")
    rep.add("a", 1.0, "<= 2", True)
    rep.add("b", 5.0, "recorded", False, mandatory=False)
    assert rep.passed and rep.get("a").value == 1.0
    rep.add("c", 3.0, "<= 2", False)
    assert not rep.passed
    rep.write(tmp_path)
    rows = (tmp_path / "report.csv").read_text().splitlines()
    assert rows[0] == "name,value,criterion,verdict,mandatory" and rows[3].startswith("c,3,")
    assert "study demo: FAIL" in (tmp_path / "verdict.txt").read_text()
    with pytest.raises(KeyError):
        rep.get("zzz")
    errs = StudyReport("e", errors=["boom"])
    assert not errs.passed and "[error] boom" in errs.summary()


def test_study_spec_validation():
    with pytest.raises(InvalidParameter):
        StudySpec("bogus")
    with pytest.raises(InvalidParameter):
        StudySpec("envelope", runs=[])
    with pytest.raises(InvalidParameter):
        StudySpec("attractor_pair", runs=[{"seed": 0}])
    assert StudySpec("attractor_pair", runs=[{"seed": 0}, {"seed": 1}]).kind == "attractor_pair"


def test_load_study(tmp_path):
    (tmp_path / "base.cfg").write_text(BASE)
    path = tmp_path / "pair.study"
    path.write_text("[study]\nkind = attractor_pair\nbase = base.cfg\nhorizon = 2\ninterval = 0.5\n"
                    "threshold = 1e-3\n[run.a]\nseed = 4\n[run.b]\nseed = 9\n")
    spec = load_study(path)
    assert spec.base.grid == Grid(16, 16, 4.0, 4.0) and spec.horizon == 2.0
    assert spec.runs == [{"seed": 4}, {"seed": 9}]
    assert spec.options == {"interval": 0.5, "threshold": 1e-3}
    path.write_text("[other]\nkind = envelope\n")
    with pytest.raises(InvalidParameter):
        load_study(path)
    path.write_text("[study]\nhorizon = 3\n")
    with pytest.raises(InvalidParameter):
        load_study(path)


def test_worker_count(monkeypatch):
    monkeypatch.delenv("BIOFLUX_THREADS", raising=False)
    assert worker_count() == 1
    monkeypatch.setenv("BIOFLUX_THREADS", "3")
    assert worker_count() == 3
    monkeypatch.setenv("BIOFLUX_THREADS", "lots")
    with pytest.raises(InvalidParameter):
        worker_count()


def test_parallel_runs_match_sequential(monkeypatch):
    g = Grid(16, 16)
    p = reference_params()
    jobs = [(g, scenario("tuval_plume", g, p, seed=s), p, 0.01, 0.005, None) for s in (0, 1)]
    monkeypatch.setenv("BIOFLUX_THREADS", "1")
    seq = run_many(jobs)
    monkeypatch.setenv("BIOFLUX_THREADS", "2")
    par = run_many(jobs)
    for a, b in zip(seq, par):
        assert all(x.same_as(y) for x, y in zip(a.history, b.history))
        assert a.records == b.records


def test_convergence_orders():
    conv = Convergence([0.1, 0.05, 0.025], [1e-2, 2.5e-3, 6.25e-4])
    np.testing.assert_allclose(conv.orders, [2.0, 2.0])
    assert conv.order == pytest.approx(2.0)


def test_simulate_tracks_extremes():
    g = Grid(16, 16)
    p = reference_params()
    res = simulate(g, scenario("tuval_plume", g, p), p, 0.02, 0.01)
    assert len(res.records) == len(res.history) == 3 and res.steps > 2
    assert res.max_c <= p.c_O and res.min_n >= 0


def test_decay_study_coarse_grid():
    rate, bound = decay_study(Grid(16, 16), horizon=0.05, interval=0.005)
    assert bound == pytest.approx(2 * math.pi**2)
    assert rate >= 0.9 * bound


def test_run_study_barenblatt_and_decay():
    rep = run_study(StudySpec("barenblatt", options={"nx": 64}))
    assert rep.passed and rep.get("l1_relative_error").value <= 0.05
    rep = run_study(StudySpec("decay_rate", horizon=0.02))
    assert rep.passed


def test_short_envelope_records_error(tmp_path):
    (tmp_path / "base.cfg").write_text(BASE)
    path = tmp_path / "env.study"
    path.write_text("[study]\nkind = envelope\nbase = base.cfg\nhorizon = 1\n[run.a]\namplitude = 1\n")
    rep = run_study(load_study(path))
    assert not rep.passed and "span" in rep.errors[0]


def test_attractor_pair_study_is_deterministic(tmp_path):
    (tmp_path / "base.cfg").write_text(BASE)
    path = tmp_path / "pair.study"
    path.write_text("[study]\nkind = attractor_pair\nbase = base.cfg\nhorizon = 1\n"
                    "[run.a]\nseed = 5\n[run.b]\nseed = 5\n")
    rep = run_study(load_study(path))
    assert rep.get("tail_distance").value == 0.0 and rep.passed
    again = run_study(load_study(path))
    assert [m.value for m in again.measurements] == [m.value for m in rep.measurements]
