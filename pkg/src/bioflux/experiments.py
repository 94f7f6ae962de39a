"""Canned multi-run studies: convergence harnesses, oracles and long-run probes.

Every study returns a :class:`StudyReport` listing each measured number with
its acceptance threshold, so the same code backs the CLI ``study`` command
and the test suite.
"""
from __future__ import annotations

import concurrent.futures
import configparser
import csv
import math
import os
from dataclasses import dataclass, field, replace

import numpy as np

from . import cell, oxygen
from .config import Config, load_config
from .coupler import RunConfig, SimState, advance, run
from .diagnostics import (fit_envelope, oxygen_cap_check, record, tail_distance,
                          weak_residual)
from .errors import BiofluxError, InvalidParameter
from .grid import Faces, Grid, integrate, norm_lp
from .model import (Consumption, Growth, ModelParams, Potential, Sensitivity,
                    admissible_gamma)
from .scenarios import barenblatt_profile, leading_mode, scenario

KINDS = ("envelope", "attractor_pair", "mms_convergence", "barenblatt", "decay_rate",
         "weak_residual")


def worker_count() -> int:
    """Process workers allowed for independent runs (``BIOFLUX_THREADS``, default 1)."""
    raw = os.environ.get("BIOFLUX_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise InvalidParameter(f"BIOFLUX_THREADS must be an integer, got {raw!r}") from None


@dataclass
class Measurement:
    name: str
    value: float
    criterion: str
    passed: bool
    mandatory: bool = True


@dataclass
class StudyReport:
    kind: str
    measurements: list = field(default_factory=list)
    errors: list = field(default_factory=list)

    def add(self, name, value, criterion, passed, mandatory=True):
        self.measurements.append(Measurement(name, float(value), criterion, bool(passed), mandatory))

    @property
    def passed(self) -> bool:
        return not self.errors and all(m.passed for m in self.measurements if m.mandatory)

    def get(self, name) -> Measurement:
        for m in self.measurements:
            if m.name == name:
                return m
        raise KeyError(name)

    def write(self, out_dir) -> None:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "report.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["name", "value", "criterion", "verdict", "mandatory"])
            for m in self.measurements:
                w.writerow([m.name, "%.17g" % m.value, m.criterion,
                            "pass" if m.passed else "fail", int(m.mandatory)])
        with open(os.path.join(out_dir, "verdict.txt"), "w") as fh:
            fh.write(self.summary() + "\n")

    def summary(self) -> str:
        lines = [f"study {self.kind}: {'PASS' if self.passed else 'FAIL'}"]
        for m in self.measurements:
            lines.append(f"  [{'pass' if m.passed else 'FAIL'}] {m.name} = {m.value:.6g} ({m.criterion})")
        lines.extend(f"  [error] {e}" for e in self.errors)
        return "\n".join(lines)


def reference_params(f: str = "fisher", m: float = 2.0, chi0: float = 0.5, g: float = 1.0,
                     gamma: float = 0.0) -> ModelParams:
    """Porous-medium cells with constant sensitivity, linear consumption and gravity."""
    growth = Growth("fisher", mu=1.0) if f == "fisher" else Growth(f)
    return ModelParams(m=m, chi=Sensitivity("constant", chi0=chi0), k=Consumption("linear", kappa=1.0),
                       f=growth, phi=Potential("linear", g=g), gamma=gamma)


# -- single runs ---------------------------------------------------------------------

@dataclass
class RunResult:
    history: list            # states at the sample times
    records: list            # DiagRecord per sample
    max_c: float             # largest oxygen value seen at any step
    min_n: float             # smallest density seen at any step
    steps: int


def simulate(grid: Grid, state: SimState, params: ModelParams, t_end: float,
             interval: float, cfg: RunConfig | None = None) -> RunResult:
    """Run to ``t_end`` sampling states and diagnostics every ``interval``."""
    cfg = replace(cfg or RunConfig(), t_end=t_end, diag_interval=interval)
    history, records = [], []
    extremes = {"max_c": float(np.max(state.c)), "min_n": float(np.min(state.n)), "steps": 0}
    last_dt = [0.0]

    def hook(s, info):
        extremes["max_c"] = max(extremes["max_c"], float(np.max(s.c)))
        extremes["min_n"] = min(extremes["min_n"], float(np.min(s.n)))
        extremes["steps"] += 1
        last_dt[0] = info.dt

    def sample(s):
        history.append(s.copy())
        records.append(record(grid, s, params, last_dt[0]))

    run(grid, state, params, cfg, hooks=(hook,), sample=sample)
    return RunResult(history, records, extremes["max_c"], extremes["min_n"], extremes["steps"])


def _run_job(job):
    grid, state, params, t_end, interval, cfg = job
    return simulate(grid, state, params, t_end, interval, cfg)


def run_many(jobs):
    """Run independent ``simulate`` jobs, in worker processes when allowed."""
    workers = min(worker_count(), len(jobs))
    if workers <= 1:
        return [_run_job(j) for j in jobs]
    with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_job, jobs))


# -- convergence harnesses -------------------------------------------------------------

@dataclass
class Convergence:
    hs: list
    errors: list

    @property
    def orders(self):
        e, h = np.array(self.errors), np.array(self.hs)
        return list(np.log(e[:-1] / e[1:]) / np.log(h[:-1] / h[1:]))

    @property
    def order(self) -> float:
        return float(self.orders[-1])


def _unit_grid(nx):
    return Grid(nx, nx, 1.0, 1.0)


def oxygen_mms(levels=(16, 32, 64), T: float = 0.1, dt_per_h2: float = 0.25, tol: float = 1e-12):
    """Manufactured ``c = 1 + 0.5 exp(-t) cos(pi x) cos(pi y)`` at rest with consumption.

    The fluid is held at rest so the transport stage is inactive; the
    remaining diffusion and consumption stages are second order in space and
    ``dt`` scales with ``h^2``.  Returns the discrete L2 errors at ``T``.
    """
    k = Consumption("linear", kappa=1.0)
    pi = math.pi
    errors, hs = [], []
    for nx in levels:
        grid = _unit_grid(nx)
        X, Y = grid.centers()
        P = np.cos(pi * X) * np.cos(pi * Y)
        n = 1.0 + 0.5 * np.cos(2 * pi * X) * np.cos(pi * Y) ** 2

        def exact(t):
            return 1.0 + 0.5 * math.exp(-t) * P

        def source(t):
            e = 0.5 * math.exp(-t) * P
            return -e + 2 * pi**2 * e + n * exact(t)

        steps = int(round(T / (dt_per_h2 * grid.dx**2)))
        dt = T / steps
        c = exact(0.0)
        u = Faces.zeros(grid)
        for i in range(steps):
            c = oxygen.oxygen_step(grid, c, n, u, k, dt, tol=tol, source=source((i + 1) * dt))
        errors.append(norm_lp(grid, c - exact(T), 2))
        hs.append(grid.dx)
    return Convergence(hs, errors)


def _stream_velocity(grid, amp):
    """Discrete curl of ``Psi = amp sin^2(pi x) sin^2(pi y)`` plus its analytic centre values."""
    pi = math.pi
    Xc, Yc = grid.corners()
    psi = amp * np.sin(pi * Xc) ** 2 * np.sin(pi * Yc) ** 2
    F = Faces(np.diff(psi, axis=0) / grid.dy, -np.diff(psi, axis=1) / grid.dx)
    X, Y = grid.centers()
    ux = amp * np.sin(pi * X) ** 2 * pi * np.sin(2 * pi * Y)
    uy = -amp * pi * np.sin(2 * pi * X) * np.sin(pi * Y) ** 2
    return F, ux, uy


def cell_mms(levels=(16, 32, 64), T: float = 0.05, dt_per_h2: float = 0.02, amp_u: float = 0.5,
             chi0: float = 0.5):
    """Manufactured density with transport, chemotaxis, ``m = 2`` diffusion and Fisher growth.

    ``n = 1 + 0.5 exp(-t) cos(pi x) cos(pi y)``; the oxygen field
    ``c = 1 + 0.3 cos(pi x) cos(2 pi y)`` and the solenoidal fluid velocity
    are frozen.  Returns the discrete L1 errors at ``T``.
    """
    pi = math.pi
    m = 2.0
    chi = Sensitivity("constant", chi0=chi0)
    f = Growth("fisher", mu=1.0)
    errors, hs = [], []
    for nx in levels:
        grid = _unit_grid(nx)
        X, Y = grid.centers()
        P = np.cos(pi * X) * np.cos(pi * Y)
        Px = -pi * np.sin(pi * X) * np.cos(pi * Y)
        Py = -pi * np.cos(pi * X) * np.sin(pi * Y)
        c = 1.0 + 0.3 * np.cos(pi * X) * np.cos(2 * pi * Y)
        cx = -0.3 * pi * np.sin(pi * X) * np.cos(2 * pi * Y)
        cy = -0.6 * pi * np.cos(pi * X) * np.sin(2 * pi * Y)
        lap_c = -5 * pi**2 * (c - 1.0)
        u, ux, uy = _stream_velocity(grid, amp_u)
        w = cell.drift_velocity(grid, c, chi)

        def exact(t):
            return 1.0 + 0.5 * math.exp(-t) * P

        def source(t):
            a = 0.5 * math.exp(-t)
            n = exact(t)
            nx_, ny_ = a * Px, a * Py
            lap_n = -2 * pi**2 * a * P
            lap_n2 = 2 * (nx_**2 + ny_**2) + 2 * n * lap_n
            return (-a * P + ux * nx_ + uy * ny_ + chi0 * (nx_ * cx + ny_ * cy + n * lap_c)
                    - lap_n2 - f(n))

        steps = int(round(T / (dt_per_h2 * grid.dx**2)))
        dt = T / steps
        n = exact(0.0)
        for i in range(steps):
            F = cell.assemble_cell_fluxes(grid, n, u, w, m)
            n = cell.cell_step(grid, n, F, f, dt, source=source(i * dt))
        errors.append(norm_lp(grid, n - exact(T), 1))
        hs.append(grid.dx)
    return Convergence(hs, errors)


def smooth_state(grid: Grid, amp_u: float = 0.5) -> SimState:
    """Smooth, fully coupled initial state used by the time-step and weak-form studies."""
    pi = math.pi
    X, Y = grid.centers()
    n = 1.0 + 0.5 * np.cos(pi * X / grid.Lx) * np.cos(pi * Y / grid.Ly)
    c = 0.6 + 0.3 * np.cos(pi * X / grid.Lx) * np.cos(pi * Y / grid.Ly)
    return SimState(0.0, 0, n, c, leading_mode(grid, amp_u))


def _fixed_dt_run(grid, state, params, dt, steps, tol=1e-12):
    cfg = RunConfig(t_end=math.inf, dt=dt, tol=tol)
    history = [state]
    for _ in range(steps):
        state = advance(grid, state, params, cfg)[0]
        history.append(state)
    return history


def _combined_l2(grid, a: SimState, b: SimState) -> float:
    du = a.u - b.u
    vol = grid.cell_volume
    return (norm_lp(grid, a.n - b.n, 2) + norm_lp(grid, a.c - b.c, 2)
            + math.sqrt(vol * (float(np.sum(du.u**2)) + float(np.sum(du.v**2)))))


def splitting_study(nx: int = 16, T: float = 0.02, coarse_steps: int = 100, ref_factor: int = 64):
    """Time-step halving for the split scheme against a ``dt/ref_factor`` reference.

    Returns ``(errors, ratio)`` for steps ``dt`` and ``dt/2``.
    """
    grid = _unit_grid(nx)
    params = reference_params()
    s0 = smooth_state(grid)
    dt = T / coarse_steps
    ref = _fixed_dt_run(grid, s0, params, dt / ref_factor, coarse_steps * ref_factor)[-1]
    errs = []
    for k in (1, 2):
        end = _fixed_dt_run(grid, s0, params, dt / k, coarse_steps * k)[-1]
        errs.append(_combined_l2(grid, end, ref))
    return errs, errs[0] / errs[1]


def weak_residual_pair(levels=(32, 64), dt_per_h: float = 5e-4, coarse_steps: int = 10, params=None,
                       amp_u: float = 0.75):
    """Weak-form residuals on successive grids at fixed ``dt/h`` over a common horizon.

    Returns the per-level :class:`WeakResiduals` and the coarse/fine factors.
    """
    params = params or reference_params()
    out = []
    for i, nx in enumerate(levels):
        grid = _unit_grid(nx)
        dt = dt_per_h * grid.dx
        hist = _fixed_dt_run(grid, smooth_state(grid, amp_u), params, dt, coarse_steps * 2**i)
        out.append(weak_residual(grid, hist, params))
    factors = {name: getattr(out[0], name) / getattr(out[1], name) for name in ("weak1", "weak2", "weak3")}
    return out, factors


# -- oracles -----------------------------------------------------------------------------

def barenblatt_study(nx: int = 256, ny: int = 4, m: float = 2.0, Lx: float = 10.0,
                     t0: float = 1.0, horizon: float = 1.0, safety: float = 0.4) -> float:
    """Relative L1 error of the porous-medium solver against the Barenblatt profile."""
    grid = Grid(nx, ny, Lx, Lx * ny / nx)
    X, _ = grid.centers()
    x = X - 0.5 * Lx
    n = barenblatt_profile(x, t0, m)
    zero = Faces.zeros(grid)
    f = Growth("zero")
    t, t_end = t0, t0 + horizon
    while t < t_end:
        dt = min(cell.cell_cfl(grid, n, zero, zero, m, f, safety), t_end - t)
        n = cell.cell_step(grid, n, cell.assemble_cell_fluxes(grid, n, zero, zero, m), f, dt)
        t = t_end if t + dt >= t_end else t + dt
    exact = barenblatt_profile(x, t_end, m)
    return integrate(grid, np.abs(n - exact)) / integrate(grid, exact)


def decay_study(grid: Grid | None = None, amplitude: float = 1.0, horizon: float = 0.05,
                interval: float = 0.0025):
    """Fitted exponential decay rate of the kinetic energy with no cells present.

    Returns ``(rate, bound)`` with ``bound = 4 * admissible_gamma``.
    """
    grid = grid or _unit_grid(64)
    params = reference_params(f="zero", g=0.0)
    s0 = scenario("rest_state", grid, params)
    s0.u = leading_mode(grid, amplitude)
    res = simulate(grid, s0, params, horizon, interval)
    t = np.array([r.t for r in res.records])
    E = np.array([r.kinetic for r in res.records])
    slope = np.polyfit(t, np.log(E), 1)[0]
    return float(-slope), 4.0 * admissible_gamma(grid)


# -- long-run studies ----------------------------------------------------------------------

def long_run_grid(nx: int = 64, L: float = 7.0) -> Grid:
    """Square box large enough that ``T = 50`` covers five envelope time scales."""
    return Grid(nx, nx, L, L)


def envelope_setup():
    """Default envelope geometry: 64^2 on a 5.5 box with linear cell diffusion.

    The fit is insensitive to the initial amplitude only when ``exp(-gamma T) X0``
    is of order one at the horizon; this box keeps it near 0.3 for a 10x
    initial velocity at ``T = 50``.
    """
    return Grid(64, 64, 5.5, 5.5), reference_params(f="fisher", m=1.0)


def envelope_study(grid: Grid, params: ModelParams, amplitudes=(1.0, 10.0), horizon: float = 50.0,
                   interval: float = 0.5, seed: int = 0, scenario_name: str = "fisher_homogeneous",
                   gamma: float | None = None, report: StudyReport | None = None):
    report = report or StudyReport("envelope")
    gamma = gamma or (params.gamma if params.gamma > 0 else admissible_gamma(grid))
    jobs = [(grid, scenario(scenario_name, grid, params, seed=seed, amplitude=a), params, horizon,
             interval, None) for a in amplitudes]
    results = run_many(jobs)
    fits = [fit_envelope(r.records, gamma) for r in results]
    for a, fit in zip(amplitudes, fits):
        report.add(f"Gamma_fit[amp={a:g}]", fit.Gamma_fit, "finite", math.isfinite(fit.Gamma_fit))
        report.add(f"tail_sup[amp={a:g}]", fit.tail_sup, "recorded", True, mandatory=False)
    g = [fit.Gamma_fit for fit in fits]
    ratio = max(g) / min(g)
    report.add("Gamma_fit_ratio", ratio, "<= 2", ratio <= 2.0)
    tails = [fit.tail_sup for fit in fits]
    spread = (max(tails) - min(tails)) / min(tails)
    report.add("tail_sup_spread", spread, "<= 0.2", spread <= 0.2)
    return report, results, fits


def attractor_study(grid: Grid, params: ModelParams, seeds=(0, 1), horizon: float = 50.0,
                    interval: float = 0.5, scenario_name: str = "tuval_plume",
                    threshold: float = 1e-3, report: StudyReport | None = None):
    if len(seeds) != 2:
        raise InvalidParameter("attractor_pair needs exactly two runs")
    report = report or StudyReport("attractor_pair")
    jobs = [(grid, scenario(scenario_name, grid, params, seed=s), params, horizon, interval, None)
            for s in seeds]
    results = run_many(jobs)
    d = tail_distance(grid, results[0].history, results[1].history)
    report.add("tail_distance", d, f"<= {threshold:g}", d <= threshold)
    for s, r in zip(seeds, results):
        cap = oxygen_cap_check(r.records, params.c_O)
        report.add(f"max_c_excess[seed={s}]", r.max_c - params.c_O, "<= 1e-9", r.max_c <= params.c_O + 1e-9)
        report.add(f"cap_samples[seed={s}]", cap.worst, "<= 1e-9", cap.passed)
    return report, results


# -- study specs ---------------------------------------------------------------------------

@dataclass
class StudySpec:
    """A study: its kind, an optional base configuration, per-run overrides and a horizon."""

    kind: str
    base: Config | None = None
    runs: list = field(default_factory=lambda: [{}])
    horizon: float | None = None
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidParameter(f"unknown study kind {self.kind!r}; choose from {', '.join(KINDS)}")
        if not self.runs:
            raise InvalidParameter("a study needs at least one run")
        if self.kind == "attractor_pair" and len(self.runs) != 2:
            raise InvalidParameter("attractor_pair needs exactly two runs")


def _value(raw: str):
    parts = [p.strip() for p in raw.split(",")]
    vals = []
    for p in parts:
        try:
            vals.append(int(p))
        except ValueError:
            try:
                vals.append(float(p))
            except ValueError:
                vals.append(p)
    return vals[0] if len(vals) == 1 else tuple(vals)


def load_study(path) -> StudySpec:
    """Read a study file: a ``[study]`` section plus one ``[run.*]`` section per run.

    ``[study]`` holds ``kind``, optional ``base`` (a config path relative to
    the study file) and ``horizon``; any other key is passed to the study as
    an option.  Run sections override ``amplitude`` or ``seed``.
    """
    parser = configparser.ConfigParser()
    parser.optionxform = str
    with open(path, encoding="utf-8") as fh:
        parser.read_file(fh)
    if "study" not in parser:
        raise InvalidParameter("study file needs a [study] section")
    sec = dict(parser["study"])
    kind = sec.pop("kind", None)
    if kind is None:
        raise InvalidParameter("[study] needs kind")
    base = None
    if "base" in sec:
        base = load_config(os.path.join(os.path.dirname(os.path.abspath(path)), sec.pop("base")))
    horizon = float(sec.pop("horizon")) if "horizon" in sec else None
    options = {k: _value(v) for k, v in sec.items()}
    runs = [{k: _value(v) for k, v in parser[s].items()} for s in parser.sections() if s.startswith("run.")]
    return StudySpec(kind, base, runs or [{}], horizon, options)


def run_study(spec: StudySpec) -> StudyReport:
    """Execute a study and collect every measurement with its verdict."""
    report = StudyReport(spec.kind)
    opt = spec.options
    try:
        if spec.kind == "decay_rate":
            grid = spec.base.grid if spec.base else None
            rate, bound = decay_study(grid, float(spec.runs[0].get("amplitude", 1.0)),
                                      spec.horizon or 0.05, float(opt.get("interval", 0.0025)))
            report.add("decay_rate", rate, f">= 0.9 * {bound:.6g}", rate >= 0.9 * bound)
        elif spec.kind == "barenblatt":
            err = barenblatt_study(int(opt.get("nx", 256)), int(opt.get("ny", 4)), float(opt.get("m", 2.0)),
                                   float(opt.get("Lx", 10.0)), float(opt.get("t0", 1.0)), spec.horizon or 1.0)
            report.add("l1_relative_error", err, "<= 0.05", err <= 0.05)
        elif spec.kind == "mms_convergence":
            parts = opt.get("parts", ("oxygen", "cells", "splitting"))
            parts = (parts,) if isinstance(parts, str) else parts
            if "oxygen" in parts:
                conv = oxygen_mms()
                report.add("oxygen_l2_order", conv.order, ">= 1.8", conv.order >= 1.8)
            if "cells" in parts:
                conv = cell_mms()
                report.add("cell_l1_order", conv.order, ">= 0.8", conv.order >= 0.8)
            if "splitting" in parts:
                _, ratio = splitting_study()
                report.add("splitting_ratio", ratio, "in [1.5, 2.5]", 1.5 <= ratio <= 2.5)
        elif spec.kind == "weak_residual":
            _, factors = weak_residual_pair()
            for name, fac in factors.items():
                report.add(f"{name}_factor", fac, "in [1.5, 2.5]", 1.5 <= fac <= 2.5)
        else:
            if spec.base:
                grid, params = spec.base.grid, spec.base.params
            elif spec.kind == "envelope":
                grid, params = envelope_setup()
            else:
                grid, params = long_run_grid(), reference_params()
            horizon = spec.horizon or 50.0
            interval = float(opt.get("interval", 0.5))
            if spec.kind == "envelope":
                amps = [float(r.get("amplitude", 1.0)) for r in spec.runs]
                envelope_study(grid, params, amps, horizon, interval, report=report)
            else:
                seeds = [int(r.get("seed", i)) for i, r in enumerate(spec.runs)]
                attractor_study(grid, params, seeds, horizon, interval,
                                threshold=float(opt.get("threshold", 1e-3)), report=report)
    except BiofluxError as exc:
        report.errors.append(str(exc))
    return report
