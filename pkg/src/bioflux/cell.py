"""Explicit conservative update of the cell density.

Fluxes are assembled per face as advective upwind transport by the total
velocity ``u + w`` (fluid plus chemotactic drift) minus the difference of
``n**m`` across the face.  Boundary faces carry no flux, so the discrete
mass changes only through the growth term.
"""
from __future__ import annotations

import numpy as np

from .errors import CFLViolation, DomainError
from .grid import Faces, Grid, div_from_faces, grad_to_faces

SAFETY = 0.4
# tolerated round-off undershoot of c coming out of the oxygen solve
NEGATIVE_SLACK = 1e-9


def drift_velocity(grid: Grid, c, chi) -> Faces:
    """Chemotactic drift ``chi(c_face) * grad c`` on faces (zero on the boundary)."""
    if np.min(c) < -NEGATIVE_SLACK:
        raise DomainError("oxygen concentration must be nonnegative")
    w = grad_to_faces(grid, c)
    cp = np.maximum(c, 0.0)
    w.u[:, 1:-1] *= chi(0.5 * (cp[:, 1:] + cp[:, :-1]))
    w.v[1:-1, :] *= chi(0.5 * (cp[1:, :] + cp[:-1, :]))
    return w


def _upwind(a, left, right):
    return np.where(a > 0, a * left, a * right)


def assemble_cell_fluxes(grid: Grid, n, u: Faces, w: Faces, m: float) -> Faces:
    nm = n if m == 1 else np.power(n, m)
    F = Faces.zeros(grid)
    au = u.u[:, 1:-1] + w.u[:, 1:-1]
    F.u[:, 1:-1] = _upwind(au, n[:, :-1], n[:, 1:]) - (nm[:, 1:] - nm[:, :-1]) / grid.dx
    av = u.v[1:-1, :] + w.v[1:-1, :]
    F.v[1:-1, :] = _upwind(av, n[:-1, :], n[1:, :]) - (nm[1:, :] - nm[:-1, :]) / grid.dy
    return F


def cell_step(grid: Grid, n, fluxes: Faces, f, dt: float, source=None):
    """``n - dt div F + dt f(n)``; raises :class:`CFLViolation` on negative output.

    ``source`` is an optional extra explicit term (used by manufactured
    solution tests).
    """
    growth = f(n)
    out = n - dt * div_from_faces(grid, fluxes) + dt * growth
    if source is not None:
        out = out + dt * source
    if np.any(out < 0):
        i = np.unravel_index(np.argmin(out), out.shape)
        raise CFLViolation(f"negative density {out[i]:.3e} at cell {i} with dt={dt:.3e}")
    return out


def positivity_rate(grid: Grid, n, u: Faces, w: Faces, m: float, f=None):
    """Per-cell rate ``r`` such that ``dt * r <= 1`` keeps the update nonnegative.

    Sums the outgoing advective face speeds, the worst-case diffusive loss
    ``m n^(m-1) (2/dx^2 + 2/dy^2)``, and the depletion rate of the growth term.
    """
    ax = u.u + w.u
    ay = u.v + w.v
    out = (np.maximum(ax[:, 1:], 0) - np.minimum(ax[:, :-1], 0)) / grid.dx
    out = out + (np.maximum(ay[1:, :], 0) - np.minimum(ay[:-1, :], 0)) / grid.dy
    if m == 1:
        mob = np.ones_like(n)
    else:
        mob = m * np.power(n, m - 1)
    rate = out + mob * (2.0 / grid.dx**2 + 2.0 / grid.dy**2)
    if f is not None and f.kind != "zero":
        fn = f(n)
        with np.errstate(divide="ignore", invalid="ignore"):
            loss = np.where(n > 0, -fn / np.where(n > 0, n, 1.0), 0.0)
        rate = rate + np.maximum(0.0, np.maximum(-f.derivative(n), loss))
    return rate


def cell_cfl(grid: Grid, n, u: Faces, w: Faces, m: float, f=None, safety: float = SAFETY) -> float:
    rmax = float(np.max(positivity_rate(grid, n, u, w, m, f)))
    return np.inf if rmax == 0 else safety / rmax
