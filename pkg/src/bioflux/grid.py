"""Uniform cell-centred rectangle with MAC-staggered faces.

Scalars live at cell centres in arrays of shape ``(ny, nx)`` (row-major,
y-outer).  Face fields carry an x-face component of shape ``(ny, nx + 1)``
and a y-face component of shape ``(ny + 1, nx)``.  Boundary faces are the
first/last columns of ``u`` and the first/last rows of ``v``.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np
import scipy.fft
import scipy.special

from .errors import CompatibilityError, DomainError, InvalidParameter, SolverError


@dataclass(frozen=True)
class Grid:
    nx: int
    ny: int
    Lx: float = 1.0
    Ly: float = 1.0

    def __post_init__(self):
        if self.nx < 4 or self.ny < 4:
            raise InvalidParameter(f"grid needs at least 4x4 cells, got {self.nx}x{self.ny}")
        if not (self.Lx > 0 and self.Ly > 0):
            raise InvalidParameter("domain lengths must be positive")

    @property
    def dx(self) -> float:
        return self.Lx / self.nx

    @property
    def dy(self) -> float:
        return self.Ly / self.ny

    @property
    def shape(self) -> tuple[int, int]:
        return (self.ny, self.nx)

    @property
    def cell_volume(self) -> float:
        return self.dx * self.dy

    @property
    def area(self) -> float:
        return self.Lx * self.Ly

    def centers(self):
        """Cell-centre coordinates ``(X, Y)``, each of shape ``(ny, nx)``."""
        x = (np.arange(self.nx) + 0.5) * self.dx
        y = (np.arange(self.ny) + 0.5) * self.dy
        return np.meshgrid(x, y)

    def xfaces(self):
        x = np.arange(self.nx + 1) * self.dx
        y = (np.arange(self.ny) + 0.5) * self.dy
        return np.meshgrid(x, y)

    def yfaces(self):
        x = (np.arange(self.nx) + 0.5) * self.dx
        y = np.arange(self.ny + 1) * self.dy
        return np.meshgrid(x, y)

    def corners(self):
        x = np.arange(self.nx + 1) * self.dx
        y = np.arange(self.ny + 1) * self.dy
        return np.meshgrid(x, y)

    def scalar(self, value=0.0):
        return np.full(self.shape, float(value))


@dataclass
class Faces:
    """Face-centred vector field on a MAC grid."""

    u: np.ndarray
    v: np.ndarray

    @classmethod
    def zeros(cls, grid: Grid) -> "Faces":
        return cls(np.zeros((grid.ny, grid.nx + 1)), np.zeros((grid.ny + 1, grid.nx)))

    def copy(self) -> "Faces":
        return Faces(self.u.copy(), self.v.copy())

    def __add__(self, other):
        return Faces(self.u + other.u, self.v + other.v)

    def __sub__(self, other):
        return Faces(self.u - other.u, self.v - other.v)

    def scaled(self, a) -> "Faces":
        return Faces(a * self.u, a * self.v)

    def max_abs(self) -> float:
        return max(float(np.max(np.abs(self.u))), float(np.max(np.abs(self.v))))

    def boundary_normal_max(self) -> float:
        return max(
            float(np.max(np.abs(self.u[:, [0, -1]]))),
            float(np.max(np.abs(self.v[[0, -1], :]))),
        )

    def isfinite(self) -> bool:
        return bool(np.all(np.isfinite(self.u)) and np.all(np.isfinite(self.v)))


# -- integrals and norms -----------------------------------------------------

def integrate(grid: Grid, field) -> float:
    # numpy reduces a contiguous buffer with a fixed pairwise tree, so the
    # result depends only on the data, never on scheduling.
    a = np.ascontiguousarray(field, dtype=np.float64).ravel()
    return float(np.add.reduce(a)) * grid.cell_volume


def norm_lp(grid: Grid, field, p) -> float:
    if p == np.inf or p == "inf":
        return float(np.max(np.abs(field)))
    p = float(p)
    if not p >= 1:
        raise InvalidParameter(f"L^p norm needs p >= 1, got {p}")
    a = np.abs(field)
    if p == 1:
        return integrate(grid, a)
    if p == 2:
        return float(np.sqrt(integrate(grid, a * a)))
    return integrate(grid, a**p) ** (1.0 / p)


def entropy(grid: Grid, n) -> float:
    """Discrete ``int n ln n`` with ``0 ln 0 = 0``."""
    if np.any(n < 0):
        raise DomainError(f"entropy of a negative density (min {np.min(n):.3e})")
    return integrate(grid, _nlogn(n))


def _nlogn(n):
    return scipy.special.xlogy(n, n)


def face_l2_squared(grid: Grid, F: Faces) -> float:
    """``||F||^2`` with one cell volume per face."""
    return grid.cell_volume * (float(np.add.reduce((F.u * F.u).ravel())) + float(np.add.reduce((F.v * F.v).ravel())))


# -- operators ---------------------------------------------------------------

def grad_to_faces(grid: Grid, s) -> Faces:
    """Centred face gradient with homogeneous Neumann (zero) boundary faces."""
    F = Faces.zeros(grid)
    F.u[:, 1:-1] = (s[:, 1:] - s[:, :-1]) / grid.dx
    F.v[1:-1, :] = (s[1:, :] - s[:-1, :]) / grid.dy
    return F


def div_from_faces(grid: Grid, F: Faces):
    return (F.u[:, 1:] - F.u[:, :-1]) / grid.dx + (F.v[1:, :] - F.v[:-1, :]) / grid.dy


def laplacian_neumann(grid: Grid, s):
    return div_from_faces(grid, grad_to_faces(grid, s))


@functools.lru_cache(maxsize=16)
def neumann_eigenvalues(grid: Grid):
    """Eigenvalues of ``-laplacian_neumann`` in the DCT-II basis, shape ``(ny, nx)``."""
    kx = np.arange(grid.nx)
    ky = np.arange(grid.ny)
    lx = (2.0 / grid.dx * np.sin(np.pi * kx / (2 * grid.nx))) ** 2
    ly = (2.0 / grid.dy * np.sin(np.pi * ky / (2 * grid.ny))) ** 2
    return ly[:, None] + lx[None, :]


# -- SPD solves ---------------------------------------------------------------

@dataclass(frozen=True)
class Helmholtz:
    """``(alpha I - Lap_h) x = b`` with Neumann boundary."""

    alpha: float

    def __post_init__(self):
        if self.alpha < 0:
            raise InvalidParameter("Helmholtz shift must be >= 0")


@dataclass(frozen=True)
class Poisson:
    """``-Lap_h x = b`` with Neumann boundary, solution pinned to zero mean."""


@dataclass
class SolveResult:
    x: np.ndarray
    residual: float
    iterations: int


def _apply(grid, op, x):
    Ax = -laplacian_neumann(grid, x)
    if isinstance(op, Helmholtz) and op.alpha:
        Ax = Ax + op.alpha * x
    return Ax


def _spectral_inverse(grid, op):
    lam = neumann_eigenvalues(grid)  # cached: treat as read-only
    if isinstance(op, Helmholtz):
        lam = lam + op.alpha
    with np.errstate(divide="ignore"):
        inv = np.where(lam > 0, 1.0 / np.where(lam > 0, lam, 1.0), 0.0)

    def apply(r):
        rh = scipy.fft.dctn(r, type=2, norm="ortho", workers=1)
        return scipy.fft.idctn(rh * inv, type=2, norm="ortho", workers=1)

    return apply


def _l2(a) -> float:
    return float(np.sqrt(np.add.reduce((a * a).ravel())))


def solve_spd(grid: Grid, op, rhs, tol: float = 1e-10, max_iter: int = 500,
              precondition: bool = True, x0=None) -> SolveResult:
    """Preconditioned conjugate gradients for the Neumann Helmholtz/Poisson operators.

    The preconditioner is the cosine-transform diagonalisation of the
    constant-coefficient operator; pass ``precondition=False`` for plain CG.
    Raises :class:`SolverError` if the relative residual does not reach
    ``tol`` within ``max_iter`` iterations.
    """
    rhs = np.asarray(rhs, dtype=np.float64)
    singular = isinstance(op, Poisson) or (isinstance(op, Helmholtz) and op.alpha == 0)
    if singular:
        mean = float(np.mean(rhs))
        scale = max(1.0, float(np.mean(np.abs(rhs))))
        if abs(mean) > 1e-10 * scale:
            raise CompatibilityError(f"Neumann Poisson right-hand side has mean {mean:.3e}")
        rhs = rhs - mean
    bnorm = _l2(rhs)
    if bnorm == 0.0:
        return SolveResult(np.zeros_like(rhs), 0.0, 0)

    M = _spectral_inverse(grid, op) if precondition else (lambda r: r)
    x = np.zeros_like(rhs) if x0 is None else np.array(x0, dtype=np.float64)
    r = rhs - _apply(grid, op, x) if x0 is not None else rhs.copy()
    if singular:
        r -= np.mean(r)
    res = _l2(r) / bnorm
    if res <= tol:
        return SolveResult(x, res, 0)
    z = M(r)
    p = z.copy()
    rz = float(np.add.reduce((r * z).ravel()))
    for it in range(1, max_iter + 1):
        Ap = _apply(grid, op, p)
        pAp = float(np.add.reduce((p * Ap).ravel()))
        if pAp <= 0:
            raise SolverError("operator not positive definite on search direction", res)
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        if singular:
            r -= np.mean(r)
        res = _l2(r) / bnorm
        if res <= tol:
            if singular:
                x -= np.mean(x)
            return SolveResult(x, res, it)
        z = M(r)
        rz_new = float(np.add.reduce((r * z).ravel()))
        if rz == 0.0:
            raise SolverError("CG breakdown: preconditioned residual vanished", res)
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise SolverError(f"CG did not converge in {max_iter} iterations (residual {res:.3e})", res)
