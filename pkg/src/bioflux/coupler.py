"""Lie-split time stepping of the coupled system, run loop and checkpoints.

One step advances the fluid with the current density, then oxygen with the
new velocity, then cells with the new velocity and oxygen.  A single global
``dt`` comes from the tightest of the cell and fluid bounds.
"""
from __future__ import annotations

import logging
import math
import os
from dataclasses import dataclass

import numpy as np

from . import cell, fluid, oxygen
from .errors import BiofluxError, CFLViolation, InvalidParameter, SolverError
from .grid import Faces, Grid, div_from_faces, integrate

log = logging.getLogger(__name__)

MAX_RETRIES = 8


@dataclass
class SimState:
    t: float
    step: int
    n: np.ndarray
    c: np.ndarray
    u: Faces
    p: np.ndarray | None = None

    def copy(self) -> "SimState":
        return SimState(self.t, self.step, self.n.copy(), self.c.copy(), self.u.copy(),
                        None if self.p is None else self.p.copy())

    def same_as(self, other: "SimState") -> bool:
        """Bitwise equality of the evolving fields (the pressure is derived data)."""
        return (self.t == other.t and self.step == other.step
                and np.array_equal(self.n, other.n) and np.array_equal(self.c, other.c)
                and np.array_equal(self.u.u, other.u.u) and np.array_equal(self.u.v, other.u.v))


@dataclass
class RunConfig:
    t_end: float = 1.0
    dt: float | None = None          # fixed step; None selects the adaptive policy
    safety: float = 0.4
    dt_max: float = math.inf
    tol: float = 1e-10
    max_iter: int = 200
    checkpoint_every: int = 0        # steps; 0 disables
    checkpoint_dir: str | None = None
    diag_interval: float = 0.0       # time between samples; 0 samples every step
    max_steps: int | None = None
    debug: bool = False

    def __post_init__(self):
        if not self.t_end >= 0:
            raise InvalidParameter("t_end must be >= 0")
        if not (0 < self.tol <= 1e-4):
            raise InvalidParameter("solver tol must lie in (0, 1e-4]")
        if self.dt is not None and not self.dt > 0:
            raise InvalidParameter("fixed dt must be positive")
        if not (0 < self.safety <= 1):
            raise InvalidParameter("safety must lie in (0, 1]")


@dataclass
class StepInfo:
    dt: float
    mass_before: float
    mass_after: float
    growth_integral: float
    energy_residual: float
    pressure_residual: float
    div_linf: float
    retries: int = 0

    @property
    def mass_defect(self) -> float:
        return self.mass_after - self.mass_before - self.dt * self.growth_integral


class RunAborted(BiofluxError):
    def __init__(self, message, last_checkpoint=None, state=None):
        super().__init__(message + (f" (last checkpoint: {last_checkpoint})" if last_checkpoint else ""))
        self.last_checkpoint = last_checkpoint
        self.state = state


def stable_dt(grid: Grid, state: SimState, params, safety: float = 0.4) -> float:
    w = cell.drift_velocity(grid, state.c, params.chi)
    return min(cell.cell_cfl(grid, state.n, state.u, w, params.m, params.f, safety),
               fluid.fluid_cfl(grid, state.u, safety))


def _advance(grid, state, params, cfg, dt, adaptive):
    tol = cfg.tol
    u1, pres = fluid.fluid_step(grid, state.u, state.n, params.phi, dt, tol, cfg.max_iter)
    if adaptive:
        adv = (float(np.max(np.abs(u1.u))) / grid.dx + float(np.max(np.abs(u1.v))) / grid.dy)
        if dt * adv > 1.0:
            return None, cfg.safety / adv
    c1 = oxygen.oxygen_step(grid, state.c, state.n, u1, params.k, dt, tol, cfg.max_iter)
    w1 = cell.drift_velocity(grid, c1, params.chi)
    if adaptive:
        limit = cell.cell_cfl(grid, state.n, u1, w1, params.m, params.f, safety=1.0)
        if dt > limit:
            return None, limit * cfg.safety
    fluxes = cell.assemble_cell_fluxes(grid, state.n, u1, w1, params.m)
    n1 = cell.cell_step(grid, state.n, fluxes, params.f, dt)
    return (u1, pres, c1, n1), None


def advance(grid: Grid, state: SimState, params, cfg: RunConfig, dt: float | None = None,
            t_target: float | None = None):
    """One coupled step; returns ``(new_state, StepInfo)``. ``state`` is never mutated."""
    adaptive = dt is None and cfg.dt is None
    if dt is None:
        dt = cfg.dt if cfg.dt is not None else min(stable_dt(grid, state, params, cfg.safety), cfg.dt_max)
    clamp = t_target is not None and state.t + dt >= t_target
    if clamp:
        dt = t_target - state.t
    if not (dt > 0 and math.isfinite(dt)):
        raise InvalidParameter(f"invalid time step {dt}")

    retries = 0
    while True:
        out, retry_dt = _advance(grid, state, params, cfg, dt, adaptive)
        if out is not None:
            break
        retries += 1
        if retries > MAX_RETRIES:
            raise CFLViolation(f"could not find a stable step after {MAX_RETRIES} reductions")
        dt = min(retry_dt, 0.5 * dt)
        clamp = False
    u1, pres, c1, n1 = out

    mass0 = integrate(grid, state.n)
    growth = integrate(grid, params.f(state.n))
    mass1 = integrate(grid, n1)
    div = float(np.max(np.abs(div_from_faces(grid, u1))))
    info = StepInfo(dt, mass0, mass1, growth, pres.energy_residual, pres.residual, div, retries)

    h = min(grid.dx, grid.dy)
    if div > max(10 * cfg.tol * h / dt, 1e-8):
        raise SolverError(f"projection left divergence {div:.3e}", pres.residual)
    if cfg.debug:
        _debug_checks(grid, state, c1, u1, info, cfg)

    t1 = t_target if clamp else state.t + dt
    return SimState(t1, state.step + 1, n1, c1, u1, pres.p), info


def _debug_checks(grid, state, c1, u1, info, cfg):
    slack = 10 * cfg.tol
    if np.max(c1) > np.max(state.c) + slack or np.min(c1) < -slack:
        raise BiofluxError(f"oxygen maximum principle violated: [{np.min(c1):.3e}, {np.max(c1):.3e}]")
    if abs(info.mass_defect) > 1e-12 * max(info.mass_before, 1e-300) + 1e-300:
        raise BiofluxError(f"mass law defect {info.mass_defect:.3e}")
    if u1.boundary_normal_max() != 0.0:
        raise BiofluxError("nonzero normal velocity on a wall")


def step(grid: Grid, state: SimState, params, cfg: RunConfig, dt: float | None = None) -> SimState:
    return advance(grid, state, params, cfg, dt)[0]


def _next_sample(t: float, interval: float) -> float:
    k = round(t / interval)
    if k * interval <= t + 1e-12 * interval:
        k += 1
    return k * interval


def _is_sample(t: float, interval: float) -> bool:
    k = round(t / interval)
    return abs(k * interval - t) <= 1e-9 * interval


def run(grid: Grid, state: SimState, params, cfg: RunConfig, hooks=(), sample=None,
        sample_initial: bool = True) -> SimState:
    """Advance until ``t >= cfg.t_end`` (or ``cfg.max_steps`` steps).

    ``hooks`` are called as ``hook(state, info)`` after every step.
    ``sample(state)`` is called at multiples of ``cfg.diag_interval`` (step
    sizes are shortened to land on them exactly), or after every step when
    the interval is 0.  Snapshots go to ``cfg.checkpoint_dir`` every
    ``cfg.checkpoint_every`` steps.
    """
    from .io import write_snapshot

    interval = cfg.diag_interval
    if sample is not None and sample_initial and (interval == 0 or _is_sample(state.t, interval)):
        sample(state)
    last_ckpt = None
    steps = 0
    while state.t < cfg.t_end and (cfg.max_steps is None or steps < cfg.max_steps):
        target = cfg.t_end
        if interval > 0:
            target = min(target, _next_sample(state.t, interval))
        try:
            state, info = advance(grid, state, params, cfg, t_target=target)
        except BiofluxError as exc:
            raise RunAborted(f"step {state.step} at t={state.t:.6g} failed: {exc}", last_ckpt, state) from exc
        steps += 1
        for hook in hooks:
            hook(state, info)
        if sample is not None and (interval == 0 or _is_sample(state.t, interval)):
            sample(state)
        if cfg.checkpoint_every and cfg.checkpoint_dir and state.step % cfg.checkpoint_every == 0:
            os.makedirs(cfg.checkpoint_dir, exist_ok=True)
            last_ckpt = os.path.join(cfg.checkpoint_dir, f"snap_{state.step:08d}.bcnv")
            write_snapshot(last_ckpt, grid, state)
    return state


def checkpoint(grid: Grid, state: SimState) -> bytes:
    from .io import encode_snapshot

    return encode_snapshot(grid, state)


def restore(data: bytes) -> SimState:
    from .io import decode_snapshot

    return decode_snapshot(data)[0]
