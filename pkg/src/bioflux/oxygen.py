"""Oxygen update: upwind advection, backward-Euler diffusion, implicit consumption."""
from __future__ import annotations

import numpy as np

from .errors import DomainError
from .grid import Faces, Grid, Helmholtz, div_from_faces, solve_spd


def advective_flux(grid: Grid, c, u: Faces) -> Faces:
    F = Faces.zeros(grid)
    a = u.u[:, 1:-1]
    F.u[:, 1:-1] = np.where(a > 0, a * c[:, :-1], a * c[:, 1:])
    b = u.v[1:-1, :]
    F.v[1:-1, :] = np.where(b > 0, b * c[:-1, :], b * c[1:, :])
    return F


def oxygen_step(grid: Grid, c, n, u: Faces, k, dt: float, tol: float = 1e-10,
                max_iter: int = 200, source=None):
    """Advance ``c`` by ``dt``.

    Stages: conservative upwind transport; ``(I - dt Lap) c_hat = c_tilde``;
    ``c' = c_hat / (1 + dt kappa(c_hat) n)`` with ``k(c) = c kappa(c)``.
    ``source`` is an optional explicit forcing added in the transport stage.
    """
    # c may carry -O(tol) round-off from the previous linear solve
    if np.min(c) < -10 * tol or np.any(n < 0):
        raise DomainError("oxygen step needs nonnegative c and n")
    c_tilde = c - dt * div_from_faces(grid, advective_flux(grid, c, u))
    if source is not None:
        c_tilde = c_tilde + dt * source
    # warm start from c_tilde: steady uniform states are reproduced exactly
    c_hat = solve_spd(grid, Helmholtz(1.0 / dt), c_tilde / dt, tol=tol, max_iter=max_iter,
                      x0=c_tilde).x
    # transport and the solve may leave -O(tol) undershoots; kappa needs c >= 0
    kappa = k.rate(np.maximum(c_hat, 0.0))
    return c_hat / (1.0 + dt * kappa * n)
