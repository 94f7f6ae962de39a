"""Chorin projection for the momentum equation on the MAC grid with no-slip walls."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import Faces, Grid, Poisson, div_from_faces, face_l2_squared, grad_to_faces, solve_spd

SAFETY = 0.4


@dataclass
class PressureSolution:
    p: np.ndarray
    residual: float
    energy_residual: float = float("nan")


def _pad_rows(a):
    # tangential no-slip: ghost value mirrors with opposite sign across the wall
    return np.vstack([-a[:1], a, -a[-1:]])


def _pad_cols(a):
    return np.hstack([-a[:, :1], a, -a[:, -1:]])


def viscous_term(grid: Grid, u: Faces) -> Faces:
    """5-point Laplacian of both components; boundary normal faces stay 0."""
    out = Faces.zeros(grid)
    uc, vc = u.u, u.v
    yp = _pad_rows(uc)
    out.u[:, 1:-1] = ((uc[:, 2:] - 2 * uc[:, 1:-1] + uc[:, :-2]) / grid.dx**2
                      + (yp[2:, 1:-1] - 2 * uc[:, 1:-1] + yp[:-2, 1:-1]) / grid.dy**2)
    xp = _pad_cols(vc)
    out.v[1:-1, :] = ((vc[2:] - 2 * vc[1:-1] + vc[:-2]) / grid.dy**2
                      + (xp[1:-1, 2:] - 2 * vc[1:-1] + xp[1:-1, :-2]) / grid.dx**2)
    return out


def advection_term(grid: Grid, u: Faces) -> Faces:
    """First-order upwind ``(u . grad) u`` at interior faces."""
    out = Faces.zeros(grid)
    uc, vc = u.u, u.v
    a = uc[:, 1:-1]
    dudx = np.where(a > 0, uc[:, 1:-1] - uc[:, :-2], uc[:, 2:] - uc[:, 1:-1]) / grid.dx
    vbar = 0.25 * (vc[:-1, :-1] + vc[:-1, 1:] + vc[1:, :-1] + vc[1:, 1:])
    yp = _pad_rows(uc)[:, 1:-1]
    dudy = np.where(vbar > 0, yp[1:-1] - yp[:-2], yp[2:] - yp[1:-1]) / grid.dy
    out.u[:, 1:-1] = a * dudx + vbar * dudy

    b = vc[1:-1, :]
    dvdy = np.where(b > 0, vc[1:-1] - vc[:-2], vc[2:] - vc[1:-1]) / grid.dy
    ubar = 0.25 * (uc[:-1, :-1] + uc[:-1, 1:] + uc[1:, :-1] + uc[1:, 1:])
    xp = _pad_cols(vc)[1:-1, :]
    dvdx = np.where(ubar > 0, xp[:, 1:-1] - xp[:, :-2], xp[:, 2:] - xp[:, 1:-1]) / grid.dx
    out.v[1:-1, :] = ubar * dvdx + b * dvdy
    return out


def buoyancy(grid: Grid, n, phi) -> Faces:
    """``n_face * grad phi`` with arithmetic face interpolation of ``n``."""
    g = phi.face_gradient(grid)
    out = Faces.zeros(grid)
    out.u[:, 1:-1] = 0.5 * (n[:, :-1] + n[:, 1:]) * g.u[:, 1:-1]
    out.v[1:-1, :] = 0.5 * (n[:-1, :] + n[1:, :]) * g.v[1:-1, :]
    return out


def predict_velocity(grid: Grid, u: Faces, n, phi, dt: float) -> Faces:
    adv = advection_term(grid, u)
    visc = viscous_term(grid, u)
    force = buoyancy(grid, n, phi)
    us = Faces.zeros(grid)
    us.u[:, 1:-1] = u.u[:, 1:-1] + dt * (visc.u[:, 1:-1] - adv.u[:, 1:-1] - force.u[:, 1:-1])
    us.v[1:-1, :] = u.v[1:-1, :] + dt * (visc.v[1:-1, :] - adv.v[1:-1, :] - force.v[1:-1, :])
    return us


def pressure_project(grid: Grid, ustar: Faces, dt: float, tol: float = 1e-10, max_iter: int = 200):
    """Project onto discretely divergence-free fields; returns ``(u, PressureSolution)``."""
    rhs = -div_from_faces(grid, ustar) / dt
    sol = solve_spd(grid, Poisson(), rhs, tol=tol, max_iter=max_iter)
    gp = grad_to_faces(grid, sol.x)
    u = Faces(ustar.u - dt * gp.u, ustar.v - dt * gp.v)
    return u, PressureSolution(sol.x, sol.residual)


def kinetic_energy(grid: Grid, u: Faces) -> float:
    return 0.5 * face_l2_squared(grid, u)


def velocity_gradient_sq(grid: Grid, u: Faces) -> float:
    """``||grad_h u||^2 = -(Lap_h u, u)`` including the no-slip wall terms."""
    uc, vc = u.u, u.v
    sx = np.add.reduce(np.diff(uc, axis=1).ravel() ** 2) / grid.dx**2
    sy = (np.add.reduce(np.diff(uc, axis=0).ravel() ** 2)
          + 2 * np.add.reduce(uc[0] ** 2) + 2 * np.add.reduce(uc[-1] ** 2)) / grid.dy**2
    tx = (np.add.reduce(np.diff(vc, axis=1).ravel() ** 2)
          + 2 * np.add.reduce(vc[:, 0] ** 2) + 2 * np.add.reduce(vc[:, -1] ** 2)) / grid.dx**2
    ty = np.add.reduce(np.diff(vc, axis=0).ravel() ** 2) / grid.dy**2
    return float(sx + sy + tx + ty) * grid.cell_volume


def forcing_work(grid: Grid, n, phi, u: Faces) -> float:
    """``(n grad phi, u)`` with the momentum-source quadrature."""
    f = buoyancy(grid, n, phi)
    return grid.cell_volume * float(np.add.reduce((f.u * u.u).ravel()) + np.add.reduce((f.v * u.v).ravel()))


def fluid_rate(grid: Grid, u: Faces) -> float:
    return (float(np.max(np.abs(u.u))) / grid.dx + float(np.max(np.abs(u.v))) / grid.dy
            + 2.0 / grid.dx**2 + 2.0 / grid.dy**2)


def fluid_cfl(grid: Grid, u: Faces, safety: float = SAFETY) -> float:
    return safety / fluid_rate(grid, u)


def fluid_step(grid: Grid, u: Faces, n, phi, dt: float, tol: float = 1e-10, max_iter: int = 200):
    """Predict then project; the returned pressure carries the kinetic-energy ledger residual."""
    ustar = predict_velocity(grid, u, n, phi, dt)
    unew, pres = pressure_project(grid, ustar, dt, tol, max_iter)
    pres.energy_residual = abs(kinetic_energy(grid, unew) - kinetic_energy(grid, u)
                               + dt * velocity_gradient_sq(grid, u)
                               + dt * forcing_work(grid, n, phi, u))
    return unew, pres
