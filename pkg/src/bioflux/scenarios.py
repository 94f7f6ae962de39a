"""Named initial conditions.

Randomised scenarios draw from SplitMix64 (Steele, Lea & Flood 2014): the
``i``-th draw (``i = 1, 2, ...``) for seed ``s`` is ``mix(s + i * 0x9E3779B97F4A7C15)``
with the standard three xor-shift/multiply rounds, mapped to ``[0, 1)`` by
taking the top 53 bits.  Draws are laid out in cell order (row-major, y-outer)
so fields are identical on every platform.
"""
from __future__ import annotations

import math

import numpy as np

from .coupler import SimState
from .errors import InvalidParameter
from .grid import Faces, Grid

SCENARIOS = ("tuval_plume", "rest_state", "barenblatt_1d", "fisher_homogeneous")

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


def splitmix64(seed: int, count: int) -> np.ndarray:
    s = np.uint64(seed & 0xFFFFFFFFFFFFFFFF)
    with np.errstate(over="ignore"):
        z = s + np.arange(1, count + 1, dtype=np.uint64) * _GOLDEN
        z = (z ^ (z >> np.uint64(30))) * _M1
        z = (z ^ (z >> np.uint64(27))) * _M2
        z = z ^ (z >> np.uint64(31))
    return z


def uniform01(seed: int, shape) -> np.ndarray:
    count = int(np.prod(shape))
    return ((splitmix64(seed, count) >> np.uint64(11)).astype(np.float64) * 2.0**-53).reshape(shape)


def leading_mode(grid: Grid, amplitude: float = 1.0) -> Faces:
    """Divergence-free velocity from ``Psi = sin^2(pi x/Lx) sin^2(pi y/Ly)``, scaled to max |u| = amplitude."""
    X, Y = grid.corners()
    psi = np.sin(math.pi * X / grid.Lx) ** 2 * np.sin(math.pi * Y / grid.Ly) ** 2
    u = Faces(np.diff(psi, axis=0) / grid.dy, -np.diff(psi, axis=1) / grid.dx)
    scale = u.max_abs()
    return u.scaled(amplitude / scale) if scale > 0 else u


def barenblatt_profile(x, t: float, m: float, C: float = 1.0, mass: float = 1.0):
    """Self-similar source solution of ``u_t = (u^m)_xx`` centred at ``x = 0``.

    For ``m > 1``: ``t^-a (C - k x^2 t^-2a)_+^(1/(m-1))`` with ``a = 1/(m+1)``,
    ``k = (m-1) / (2m(m+1))``.  For ``m = 1`` the Gaussian heat kernel of the
    given mass.
    """
    x = np.asarray(x, dtype=float)
    if m == 1:
        return mass / math.sqrt(4 * math.pi * t) * np.exp(-x**2 / (4 * t))
    a = 1.0 / (m + 1)
    k = (m - 1) / (2 * m * (m + 1))
    core = np.maximum(C - k * x**2 * t ** (-2 * a), 0.0)
    return t ** (-a) * core ** (1.0 / (m - 1))


def scenario(name: str, grid: Grid, params, seed: int = 0, amplitude: float = 1.0,
             t0: float = 1.0, C: float = 1.0) -> SimState:
    """Initial state for a named scenario.

    tuval_plume: cells ``0.5 (1 + 0.1 amplitude (2 xi - 1))`` with SplitMix64
      noise ``xi``, oxygen saturated at ``c_O``, fluid at rest.
    rest_state: ``n = 0``, ``c = c_O``, ``u = 0``.
    barenblatt_1d: y-independent Barenblatt profile at self-similar time
      ``t0`` centred in x; ``c = 0`` so no drift or consumption acts.
    fisher_homogeneous: ``n = 0.5`` with 1e-3 relative SplitMix64 noise,
      ``c = c_O``, and the leading velocity mode with max speed ``amplitude``.
    """
    shape = grid.shape
    u = Faces.zeros(grid)
    if name == "rest_state":
        n = np.zeros(shape)
        c = np.full(shape, params.c_O)
    elif name == "tuval_plume":
        xi = uniform01(seed, shape)
        n = 0.5 * (1.0 + 0.1 * amplitude * (2.0 * xi - 1.0))
        if np.any(n < 0):
            raise InvalidParameter("tuval_plume amplitude too large: negative density")
        c = np.full(shape, params.c_O)
    elif name == "barenblatt_1d":
        X, _ = grid.centers()
        n = barenblatt_profile(X - 0.5 * grid.Lx, t0, params.m, C)
        c = np.zeros(shape)
    elif name == "fisher_homogeneous":
        xi = uniform01(seed, shape)
        n = 0.5 * (1.0 + 1e-3 * (2.0 * xi - 1.0))
        c = np.full(shape, params.c_O)
        u = leading_mode(grid, amplitude)
    else:
        raise InvalidParameter(f"unknown scenario {name!r}; choose from {', '.join(SCENARIOS)}")
    return SimState(0.0, 0, n, c, u)
