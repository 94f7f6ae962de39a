"""Acceptance criteria of the simulator, one test per criterion.

Each test prints a single ``criterion N [PASS|FAIL]`` line (also collected in
the terminal summary) before asserting.  The long T = 50 runs are shared
through module fixtures.
"""
import math
import time

import numpy as np
import pytest

from bioflux.config import parse_config
from bioflux.coupler import RunConfig, advance, run, stable_dt
from bioflux.diagnostics import tail_distance
from bioflux.errors import CFLViolation, ConfigError
from bioflux.experiments import (attractor_study, barenblatt_study, cell_mms, decay_study,
                                 envelope_setup, envelope_study, long_run_grid, oxygen_mms, reference_params,
                                 simulate, splitting_study, weak_residual_pair)
from bioflux.grid import Grid, integrate, norm_lp
from bioflux.model import Regime
from bioflux.scenarios import scenario

from conftest import verdict

pytestmark = pytest.mark.slow

# The T = 50 studies run on boxes where 5/gamma fits in the horizon (gamma is
# a quarter of the Poincare bound, so the unit square relaxes in ~1 time unit
# and would leave nothing to measure).
ATTRACTOR_GRID = long_run_grid(64, 7.0)
ATTRACTOR_PARAMS = reference_params(f="fisher", m=2.0)
ENVELOPE_GRID, ENVELOPE_PARAMS = envelope_setup()


def _step_log(grid, state, params, steps):
    """Run ``steps`` adaptive steps recording per-step conservation and oxygen norms."""
    log = {"defect": [], "mass": [integrate(grid, state.n)], "min_n": [state.n.min()],
           "max_c": [state.c.max()], "min_c": [state.c.min()],
           "cp": {p: [norm_lp(grid, state.c, p)] for p in (1, 2, 4, math.inf)}}

    def hook(s, info):
        log["defect"].append(abs(info.mass_defect) / info.mass_before)
        log["mass"].append(info.mass_after)
        log["min_n"].append(s.n.min())
        log["max_c"].append(s.c.max())
        log["min_c"].append(s.c.min())
        for p, vals in log["cp"].items():
            vals.append(norm_lp(grid, s.c, p))

    t0 = time.perf_counter()
    final = run(grid, state, params, RunConfig(t_end=math.inf, max_steps=steps), hooks=(hook,))
    log["seconds"] = time.perf_counter() - t0
    log["steps"] = final.step
    return log


@pytest.fixture(scope="module")
def zero_growth_log():
    g = Grid(64, 64)
    p = reference_params(f="zero", m=2.0)
    return _step_log(g, scenario("tuval_plume", g, p), p, 1000)


@pytest.fixture(scope="module")
def fisher_log():
    g = Grid(64, 64)
    p = reference_params(f="fisher", m=2.0)
    return _step_log(g, scenario("tuval_plume", g, p), p, 1000)


@pytest.fixture(scope="module")
def attractor():
    t0 = time.perf_counter()
    report, results = attractor_study(ATTRACTOR_GRID, ATTRACTOR_PARAMS, seeds=(0, 1))
    _, repeat = attractor_study(ATTRACTOR_GRID, ATTRACTOR_PARAMS, seeds=(0, 0))
    return report, results, repeat, time.perf_counter() - t0


def test_criterion_01_exact_mass_law(zero_growth_log, fisher_log):
    m = np.array(zero_growth_log["mass"])
    drift = float(np.max(np.abs(m - m[0])) / m[0])
    defect = float(max(fisher_log["defect"]))
    secs = zero_growth_log["seconds"] + fisher_log["seconds"]
    ok = (zero_growth_log["steps"] == 1000 and drift <= 1e-10 and defect <= 1e-13 and secs <= 60)
    verdict(1, "exact mass law", ok,
            f"f=0 drift {drift:.2e} (<=1e-10), Fisher defect {defect:.2e} (<=1e-13), {secs:.1f}s")
    assert ok


def test_criterion_02_oxygen_maximum_principle(zero_growth_log):
    log = zero_growth_log
    max_rise = float(np.max(np.diff(log["max_c"])))
    norm_rise = max(float(np.max(np.diff(v) / np.asarray(v[:-1]))) for v in log["cp"].values())
    min_c = float(min(log["min_c"]))
    ok = max_rise <= 1e-9 and norm_rise <= 1e-12 and min_c >= -1e-9
    verdict(2, "maximum principle and L^p decay of c", ok,
            f"max c rise {max_rise:.2e}, relative L^p rise {norm_rise:.2e}, min c {min_c:.2e}")
    assert ok


def test_criterion_03_positivity_and_cfl_detection(zero_growth_log, fisher_log):
    min_n = min(min(zero_growth_log["min_n"]), min(fisher_log["min_n"]))
    # With linear diffusion the positivity limit is sharp for an isolated spike, so twice
    # the limit must drive it negative; for m > 1 the bound is loose by up to a factor m.
    g = Grid(64, 64)
    p = reference_params(f="fisher", m=1.0)
    s = scenario("tuval_plume", g, p)
    s.n[32, 32] = 20.0
    limit = stable_dt(g, s, p, safety=1.0)
    advance(g, s, p, RunConfig(dt=limit))
    try:
        advance(g, s, p, RunConfig(dt=2 * limit))
        detected = False
    except CFLViolation:
        detected = True
    ok = min_n >= 0 and detected
    verdict(3, "positivity without clamping", ok,
            f"min n {min_n:.3e}; doubled dt {'raised CFLViolation' if detected else 'was not detected'}")
    assert ok


def test_criterion_04_oxygen_cap(attractor):
    report, results, _, _ = attractor
    excess = max(r.max_c for r in results) - ATTRACTOR_PARAMS.c_O
    horizon = min(r.history[-1].t for r in results)
    ok = excess <= 1e-9 and horizon >= 50.0
    verdict(4, "oxygen cap", ok, f"max c - c_O = {excess:.2e} over every step to t = {horizon:g}")
    assert ok


def test_criterion_05_divergence_free():
    worst = {}
    for n in (32, 64, 128):
        g = Grid(n, n)
        p = reference_params(f="fisher", m=2.0, g=5.0)
        s = scenario("tuval_plume", g, p, amplitude=5.0)
        divs = []
        run(g, s, p, RunConfig(t_end=math.inf, max_steps=50, tol=1e-10),
            hooks=(lambda st, info: divs.append(info.div_linf),))
        worst[n] = max(divs)
    ok = max(worst.values()) <= 1e-8
    verdict(5, "divergence-free flow", ok,
            ", ".join(f"{n}^2: {d:.2e}" for n, d in worst.items()) + " (<=1e-8)")
    assert ok


def test_criterion_06_viscous_decay_rate():
    t0 = time.perf_counter()
    rate, bound = decay_study(Grid(64, 64))
    secs = time.perf_counter() - t0
    ok = rate >= 0.9 * bound and abs(bound - 2 * math.pi**2) < 1e-12 and secs <= 30
    verdict(6, "viscous decay rate", ok, f"rate {rate:.4g} >= {0.9 * bound:.4g}, {secs:.1f}s")
    assert ok


def test_criterion_07_barenblatt():
    t0 = time.perf_counter()
    err = barenblatt_study(nx=256, m=2.0)
    secs = time.perf_counter() - t0
    ok = err <= 0.05 and secs <= 30
    verdict(7, "porous-medium oracle", ok, f"relative L1 error {err:.3e} (<=5%), {secs:.1f}s")
    assert ok


def test_criterion_08_weak_residuals():
    _, factors = weak_residual_pair(levels=(32, 64))
    ok = all(1.5 <= f <= 2.5 for f in factors.values())
    verdict(8, "weak residuals 32^2 -> 64^2", ok,
            ", ".join(f"{k} x{v:.3f}" for k, v in factors.items()) + " (in [1.5, 2.5])")
    assert ok


def test_criterion_09_dissipative_envelope():
    t0 = time.perf_counter()
    report, results, fits = envelope_study(ENVELOPE_GRID, ENVELOPE_PARAMS, amplitudes=(1.0, 10.0),
                                           horizon=50.0)
    secs = time.perf_counter() - t0
    ratio = report.get("Gamma_fit_ratio").value
    spread = report.get("tail_sup_spread").value
    finite = all(math.isfinite(f.Gamma_fit) and f.Gamma_fit > 0 for f in fits)
    ok = finite and ratio <= 2.0 and spread <= 0.2 and secs <= 600
    verdict(9, "dissipative envelope", ok,
            f"Gamma_fit {fits[0].Gamma_fit:.4g} / {fits[1].Gamma_fit:.4g}, ratio {ratio:.3f} (<=2), "
            f"tail spread {spread:.3e} (<=0.2), {secs:.0f}s")
    assert ok


def test_criterion_10_attractor_probe(attractor):
    report, results, repeat, _ = attractor
    d = report.get("tail_distance").value
    same = tail_distance(ATTRACTOR_GRID, repeat[0].history, repeat[1].history)
    bitwise = all(a.same_as(b) for a, b in zip(repeat[0].history, repeat[1].history))
    ok = d <= 1e-3 and same == 0.0 and bitwise
    verdict(10, "attractor probe", ok,
            f"seeds 0/1 tail distance {d:.3e} (<=1e-3), identical seeds {same:g} "
            f"({'bitwise equal' if bitwise else 'differ'})")
    assert ok


def test_criterion_11_convergence_orders():
    ox = oxygen_mms().order
    ce = cell_mms().order
    _, ratio = splitting_study()
    ok = ox >= 1.8 and ce >= 0.8 and 1.5 <= ratio <= 2.5
    verdict(11, "convergence orders", ok,
            f"oxygen L2 {ox:.3f} (>=1.8), cells L1 {ce:.3f} (>=0.8), splitting ratio {ratio:.3f}")
    assert ok


def test_criterion_12_regime_gate():
    try:
        parse_config("[model]\nd = 2\nm = 1\n[nonlinearity.f]\nkind = zero\n")
        rejected, message = False, "accepted"
    except ConfigError as exc:
        rejected, message = "asf2" in str(exc), str(exc)
    cfg = parse_config("[model]\nd = 2\nm = 2\n[nonlinearity.f]\nkind = zero\n")
    accepted = cfg.params.regime is Regime.SUPERCRITICAL and cfg.report.ok
    ok = rejected and accepted
    verdict(12, "regime gate", ok,
            f"m=1 f=0 -> {message!r}; m=2 f=0 -> {cfg.params.regime.value}")
    assert ok
