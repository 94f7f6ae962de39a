"""Monitored functionals, discrete weak residuals, envelope fits and trajectory distances."""
from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np

from .errors import InsufficientHorizon, InvalidParameter
from .fluid import buoyancy, kinetic_energy, velocity_gradient_sq
from .grid import (Faces, Grid, _nlogn, div_from_faces, entropy, face_l2_squared,
                   grad_to_faces, integrate, laplacian_neumann, norm_lp)


@dataclass
class DiagRecord:
    t: float
    dt: float
    mass: float
    entropy: float
    min_n: float
    max_n: float
    min_c: float
    max_c: float
    grad_c_l2: float
    kinetic: float
    grad_u_l2: float
    grad_nm2_l2: float
    div_linf: float
    f_integral: float
    lyapunov: float
    # auxiliary norms used by the envelope fits
    nlogn_l1: float = 0.0
    n_lq: float = 0.0
    c_l2: float = 0.0
    n_l2: float = 0.0
    lap_c_l2: float = 0.0

    @classmethod
    def field_names(cls):
        return [f.name for f in fields(cls)]


def record(grid: Grid, state, params, dt: float = 0.0) -> DiagRecord:
    n, c, u = state.n, state.c, state.u
    m = params.m
    mass = integrate(grid, n)
    ent = entropy(grid, n)
    grad_c_sq = face_l2_squared(grid, grad_to_faces(grid, c))
    kin = kinetic_energy(grid, u)
    nm2 = n if m == 2 else np.power(n, 0.5 * m)
    q = max(1.0, 0.5 * m)
    return DiagRecord(
        t=float(state.t),
        dt=float(dt),
        mass=mass,
        entropy=ent,
        min_n=float(n.min()),
        max_n=float(n.max()),
        min_c=float(c.min()),
        max_c=float(c.max()),
        grad_c_l2=math.sqrt(grad_c_sq),
        kinetic=kin,
        grad_u_l2=math.sqrt(velocity_gradient_sq(grid, u)),
        grad_nm2_l2=math.sqrt(face_l2_squared(grid, grad_to_faces(grid, nm2))),
        div_linf=float(np.max(np.abs(div_from_faces(grid, u)))),
        f_integral=integrate(grid, params.f(n)),
        lyapunov=grad_c_sq + ent + params.K2 * 2.0 * kin,
        nlogn_l1=integrate(grid, np.abs(_nlogn(n))),
        n_lq=norm_lp(grid, n, q) ** q,
        c_l2=norm_lp(grid, c, 2),
        n_l2=norm_lp(grid, n, 2),
        lap_c_l2=norm_lp(grid, laplacian_neumann(grid, c), 2),
    )


def entropy_lower_bound(mass: float, area: float) -> float:
    """``-(2/e) sqrt(mass |Omega|)``, from ``(y ln y)_- <= (2/e) sqrt(y)``."""
    return -(2.0 / math.e) * math.sqrt(max(mass, 0.0) * area)


# -- weak residuals -----------------------------------------------------------------

COSINE_MODES = ((1, 0), (0, 1), (1, 1), (2, 0), (0, 2), (2, 1))
STREAM_MODES = ((1, 1), (2, 1), (1, 2), (2, 2), (3, 1), (1, 3))


def cosine_test(grid: Grid, a: int, b: int, X, Y):
    """``zeta = cos(a pi x/Lx) cos(b pi y/Ly)`` with gradient and Laplacian at ``(X, Y)``."""
    ka, kb = a * math.pi / grid.Lx, b * math.pi / grid.Ly
    cx, cy = np.cos(ka * X), np.cos(kb * Y)
    z = cx * cy
    zx = -ka * np.sin(ka * X) * cy
    zy = -kb * cx * np.sin(kb * Y)
    return z, zx, zy, -(ka**2 + kb**2) * z


def _sin2(alpha, s):
    """sin^2(alpha s) and its first three derivatives."""
    return (np.sin(alpha * s) ** 2, alpha * np.sin(2 * alpha * s),
            2 * alpha**2 * np.cos(2 * alpha * s), -4 * alpha**3 * np.sin(2 * alpha * s))


def stream_test(grid: Grid, a: int, b: int):
    """Solenoidal test field from ``Psi = sin^2(a pi x/Lx) sin^2(b pi y/Ly)``.

    Face values are the discrete curl of ``Psi`` sampled at grid corners, so the
    field is exactly divergence-free and vanishes with its normal component
    on the walls.  Returns the face field plus analytic derivative callables.
    """
    al, be = a * math.pi / grid.Lx, b * math.pi / grid.Ly
    Xc, Yc = grid.corners()
    psi = np.sin(al * Xc) ** 2 * np.sin(be * Yc) ** 2
    F = Faces(np.diff(psi, axis=0) / grid.dy, -np.diff(psi, axis=1) / grid.dx)

    def derivs(X, Y):
        x0, x1, x2, x3 = _sin2(al, X)
        y0, y1, y2, y3 = _sin2(be, Y)
        return {
            "px": x0 * y1, "py": -x1 * y0,
            "dxpx": x1 * y1, "dypx": x0 * y2, "dxpy": -x2 * y0, "dypy": -x1 * y1,
            "lap_px": x2 * y1 + x0 * y3, "lap_py": -(x3 * y0 + x1 * y2),
        }

    return F, derivs


@dataclass
class WeakResiduals:
    weak1: float
    weak2: float
    weak3: float
    mass: float  # zeta = 1 residual (the discrete mass law defect)


def _centers_velocity(u: Faces):
    return 0.5 * (u.u[:, :-1] + u.u[:, 1:]), 0.5 * (u.v[:-1] + u.v[1:])


def _centers_gradient(grid, c):
    g = grad_to_faces(grid, c)
    return 0.5 * (g.u[:, :-1] + g.u[:, 1:]), 0.5 * (g.v[:-1] + g.v[1:])


def weak_residual(grid: Grid, history, params, modes=COSINE_MODES, stream_modes=STREAM_MODES,
                  dt_rtol: float = 1e-9) -> WeakResiduals:
    """Max over steps and test functions of the discrete weak-form defects.

    Each step ``k -> k+1`` is tested with the time-difference quotient of the
    pairing minus the bilinear terms evaluated at level ``k`` with exact test
    function derivatives and midpoint quadrature, independent of the scheme's
    face fluxes.  Diffusion terms are integrated by parts onto the test
    function.
    """
    if len(history) < 2:
        raise InvalidParameter("weak residual needs at least two states")
    dts = np.diff([s.t for s in history])
    dt = float(dts[0])
    if np.any(np.abs(dts - dt) > dt_rtol * dt):
        raise InvalidParameter("weak residual needs a uniform-dt history")

    X, Y = grid.centers()
    Xu, Yu = grid.xfaces()
    Xv, Yv = grid.yfaces()
    vol = grid.cell_volume
    ctests = [cosine_test(grid, a, b, X, Y) for a, b in modes]
    stests = []
    for a, b in stream_modes:
        F, d = stream_test(grid, a, b)
        stests.append((F, d(X, Y), d(Xu, Yu), d(Xv, Yv)))

    def pair(a, b):
        return vol * float(np.add.reduce((a * b).ravel()))

    r1 = r2 = r3 = rmass = 0.0
    m = params.m
    for s0, s1 in zip(history[:-1], history[1:]):
        n, c = s0.n, s0.c
        uc, vc = _centers_velocity(s0.u)
        cx, cy = _centers_gradient(grid, c)
        chi_n = params.chi(np.maximum(c, 0.0)) * n
        nm = np.power(n, m)
        fn = params.f(n)
        kn = params.k(np.maximum(c, 0.0)) * n
        dn = (s1.n - s0.n) / dt
        dc = (s1.c - s0.c) / dt
        rmass = max(rmass, abs(integrate(grid, dn) - integrate(grid, fn)))
        for z, zx, zy, lz in ctests:
            res1 = (pair(dn, z) - pair(uc * n, zx) - pair(vc * n, zy) - pair(nm, lz)
                    - pair(chi_n * cx, zx) - pair(chi_n * cy, zy) - pair(fn, z))
            res2 = (pair(dc, z) - pair(uc * c, zx) - pair(vc * c, zy) - pair(c, lz) + pair(kn, z))
            r1 = max(r1, abs(res1))
            r2 = max(r2, abs(res2))
        du = Faces((s1.u.u - s0.u.u) / dt, (s1.u.v - s0.u.v) / dt)
        force = buoyancy(grid, n, params.phi)
        for F, dc_, du_, dv_ in stests:
            conv = (pair(uc * uc, dc_["dxpx"]) + pair(uc * vc, dc_["dxpy"])
                    + pair(vc * uc, dc_["dypx"]) + pair(vc * vc, dc_["dypy"]))
            visc = pair(s0.u.u, du_["lap_px"]) + pair(s0.u.v, dv_["lap_py"])
            res3 = (pair(du.u, F.u) + pair(du.v, F.v) - conv - visc
                    + pair(force.u, F.u) + pair(force.v, F.v))
            r3 = max(r3, abs(res3))
    return WeakResiduals(r1, r2, r3, rmass)


# -- envelopes ------------------------------------------------------------------------

@dataclass
class EnvelopeFit:
    gamma: float
    Gamma_fit: float
    X0: float
    tail_sup: float


def envelope_lhs(records, entropy_mode: str = "l1"):
    """Pointwise bracket ``||n||_1 + ||n ln n||_1 + ||n||_q^q + ||c||_{H^1}^2 + ||u||^2``.

    ``entropy_mode='abs'`` replaces ``||n ln n||_1`` by ``|int n ln n|``.
    """
    out = []
    for r in records:
        ent = r.nlogn_l1 if entropy_mode == "l1" else abs(r.entropy)
        out.append(r.mass + ent + r.n_lq + r.c_l2**2 + r.grad_c_l2**2 + 2.0 * r.kinetic)
    return np.array(out)


def initial_bracket(r0: DiagRecord) -> float:
    return float(envelope_lhs([r0], "l1")[0])


def fit_envelope(records, gamma: float, X0: float | None = None, entropy_mode: str = "l1",
                 min_horizon: float | None = None) -> EnvelopeFit:
    """Smallest ``Gamma`` with ``LHS(t) <= Gamma (1 + exp(-gamma t) X0)`` on all samples.

    Times are measured from the first record.  Raises
    :class:`InsufficientHorizon` unless the records span ``5/gamma``.
    """
    if not records:
        raise InvalidParameter("no records to fit")
    t = np.array([r.t for r in records])
    t = t - t[0]
    need = 5.0 / gamma if min_horizon is None else min_horizon
    if t[-1] < need * (1 - 1e-12):
        raise InsufficientHorizon(f"records span {t[-1]:.4g} < required {need:.4g}")
    if X0 is None:
        X0 = initial_bracket(records[0])
    lhs = envelope_lhs(records, entropy_mode)
    gamma_fit = float(np.max(lhs / (1.0 + np.exp(-gamma * t) * X0)))
    tail = lhs[t >= 0.5 * t[-1]]
    return EnvelopeFit(gamma, gamma_fit, float(X0), float(np.max(tail)))


def windowed_envelope(records, window: float = 1.0):
    """Unit-window integrals of ``||n||^2 + ||c||_{H^2}^2 + ||grad u||^2`` (trapezoid rule)."""
    t = np.array([r.t for r in records])
    g = np.array([r.n_l2**2 + r.c_l2**2 + r.grad_c_l2**2 + r.lap_c_l2**2 + r.grad_u_l2**2
                  for r in records])
    out = []
    start = t[0]
    while start + window <= t[-1] + 1e-12:
        sel = (t >= start - 1e-12) & (t <= start + window + 1e-12)
        out.append(float(np.trapezoid(g[sel], t[sel])) if sel.sum() > 1 else 0.0)
        start += window
    return np.array(out)


@dataclass
class CapCheck:
    passed: bool
    first_violation: float | None = None
    worst: float = -math.inf


def oxygen_cap_check(records, c_O: float, tol: float = 1e-10) -> CapCheck:
    worst = -math.inf
    first = None
    for r in records:
        excess = r.max_c - c_O
        worst = max(worst, excess)
        if first is None and excess > 10 * tol:
            first = r.t
    return CapCheck(first is None, first, worst)


# -- trajectory distance ------------------------------------------------------------------

def state_distance(grid: Grid, a, b) -> float:
    dn = norm_lp(grid, a.n - b.n, 2)
    dc = a.c - b.c
    du = face_l2_squared(grid, a.u - b.u)
    return (dn + norm_lp(grid, dc, 2) + math.sqrt(face_l2_squared(grid, grad_to_faces(grid, dc)))
            + math.sqrt(du))


def tail_distance(grid: Grid, history_a, history_b, tail_fraction: float = 0.5, grid_b: Grid | None = None) -> float:
    """``sup`` over the final ``tail_fraction`` of the horizon of the L2 x H1 x L2 distance."""
    if grid_b is not None and grid_b != grid:
        raise InvalidParameter("histories live on different grids")
    if len(history_a) != len(history_b):
        raise InvalidParameter("histories have different lengths")
    if not 0 < tail_fraction <= 1:
        raise InvalidParameter("tail_fraction must lie in (0, 1]")
    for a, b in zip(history_a, history_b):
        if a.n.shape != grid.shape or b.n.shape != grid.shape:
            raise InvalidParameter("history fields do not match the grid")
        if abs(a.t - b.t) > 1e-9 * max(1.0, abs(a.t)):
            raise InvalidParameter("histories are sampled at different times")
    t0, t1 = history_a[0].t, history_a[-1].t
    start = t1 - tail_fraction * (t1 - t0)
    return max(state_distance(grid, a, b)
               for a, b in zip(history_a, history_b) if a.t >= start - 1e-12)
