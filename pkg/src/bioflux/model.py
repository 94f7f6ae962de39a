"""Model parameters, nonlinearities and hypothesis checks.

Nonlinearities are small frozen dataclasses tagged by ``kind``.  Built-in
kinds are checked in closed form; ``table`` kinds hold sampled ``(y, value)``
pairs evaluated piecewise-linearly and are checked by sampling.
"""
from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import HypothesisError, InvalidParameter, RangeError

log = logging.getLogger(__name__)

SAMPLING_SLACK = 1e-12


class Regime(enum.Enum):
    SUPERCRITICAL = "supercritical"
    SUBCRITICAL = "subcritical"


class Purpose(enum.Enum):
    EXISTENCE = "existence"
    ATTRACTOR = "attractor"


def classify_regime(m: float, d: int) -> Regime:
    """Supercritical iff ``m > (d + 1) / 3``; the boundary value is subcritical."""
    if d not in (2, 3):
        raise InvalidParameter(f"dimension must be 2 or 3, got {d}")
    if not m >= 1:
        raise InvalidParameter(f"diffusion exponent must be >= 1, got {m}")
    # 3m > d + 1 avoids rounding trouble at m = 4/3
    return Regime.SUPERCRITICAL if 3 * m > d + 1 and m - (d + 1) / 3 > 0 else Regime.SUBCRITICAL


# -- tables -------------------------------------------------------------------

@dataclass(frozen=True)
class Table:
    """Piecewise-linear function sampled on ``[0, y_max]``."""

    ys: tuple
    values: tuple

    def __post_init__(self):
        ys = np.asarray(self.ys, dtype=float)
        if len(ys) < 2 or len(ys) != len(self.values):
            raise InvalidParameter("table needs at least two (y, value) pairs")
        if ys[0] != 0.0:
            raise InvalidParameter("table must start at y = 0")
        if np.any(np.diff(ys) <= 0):
            raise InvalidParameter("table abscissae must be strictly increasing")
        if not np.all(np.isfinite(self.values)):
            raise InvalidParameter("table values must be finite")

    @classmethod
    def from_pairs(cls, pairs):
        ys, vals = zip(*pairs)
        return cls(tuple(float(y) for y in ys), tuple(float(v) for v in vals))

    @property
    def y_max(self) -> float:
        return self.ys[-1]

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        if np.any(y > self.y_max * (1 + 1e-12)):
            raise RangeError(f"table evaluated at {np.max(y):.6g} beyond y_max = {self.y_max:.6g}")
        return np.interp(y, self.ys, self.values)

    def slope(self, y):
        ys = np.asarray(self.ys)
        slopes = np.diff(self.values) / np.diff(ys)
        idx = np.clip(np.searchsorted(ys, np.asarray(y, dtype=float), side="right") - 1, 0, len(slopes) - 1)
        return slopes[idx]


# -- nonlinearities -------------------------------------------------------------

@dataclass(frozen=True)
class Sensitivity:
    """Chemotactic sensitivity chi(c): ``constant`` chi0, ``power`` chi0*c**q, or ``table``."""

    kind: str = "constant"
    chi0: float = 0.0
    q: float = 1.0
    table: Table | None = None

    def __post_init__(self):
        if self.kind not in ("constant", "power", "table"):
            raise InvalidParameter(f"unknown sensitivity kind {self.kind!r}")
        if self.kind == "power" and (self.chi0 < 0 or self.q < 0):
            raise InvalidParameter("power sensitivity needs chi0 >= 0 and q >= 0 (chi' >= 0)")
        if self.kind == "table":
            if self.table is None:
                raise InvalidParameter("table sensitivity needs a table")
            if np.any(np.diff(self.table.values) < -SAMPLING_SLACK):
                raise InvalidParameter("sensitivity table must be nondecreasing (chi' >= 0)")

    def __call__(self, c):
        c = np.asarray(c, dtype=float)
        if self.kind == "constant":
            return np.full_like(c, self.chi0)
        if self.kind == "power":
            return self.chi0 * np.power(c, self.q)
        return self.table(c)


@dataclass(frozen=True)
class Consumption:
    """Oxygen consumption k(c): ``linear`` kappa*c, ``power`` kappa*c**q (q >= 1), or ``table``."""

    kind: str = "linear"
    kappa: float = 1.0
    q: float = 1.0
    table: Table | None = None

    def __post_init__(self):
        if self.kind not in ("linear", "power", "table"):
            raise InvalidParameter(f"unknown consumption kind {self.kind!r}")
        if self.kind in ("linear", "power") and self.kappa < 0:
            raise InvalidParameter("consumption rate must be >= 0")
        if self.kind == "power" and self.q < 1:
            raise InvalidParameter("power consumption needs q >= 1")
        if self.kind == "table":
            if self.table is None:
                raise InvalidParameter("table consumption needs a table")
            if abs(self.table.values[0]) > SAMPLING_SLACK:
                raise InvalidParameter("consumption table must satisfy k(0) = 0")
            if min(self.table.values) < -SAMPLING_SLACK:
                raise InvalidParameter("consumption table must be nonnegative")

    def __call__(self, c):
        c = np.asarray(c, dtype=float)
        if self.kind == "linear":
            return self.kappa * c
        if self.kind == "power":
            return self.kappa * np.power(c, self.q)
        return self.table(c)

    def rate(self, c):
        """``k(c)/c``, extended by ``k'(0)`` at ``c = 0``."""
        c = np.asarray(c, dtype=float)
        if self.kind == "linear":
            return np.full_like(c, self.kappa)
        if self.kind == "power":
            if self.q == 1:
                return np.full_like(c, self.kappa)
            return self.kappa * np.power(c, self.q - 1)
        t = self.table
        k0 = (t.values[1] - t.values[0]) / (t.ys[1] - t.ys[0])
        safe = np.where(c > 0, c, 1.0)
        return np.where(c > 0, t(c) / safe, k0)


@dataclass(frozen=True)
class Growth:
    """Cell growth f(n).

    ``zero``; ``fisher`` mu*n*(1-n); ``affine_capped`` a + b*min(n, cap);
    ``table``.
    """

    kind: str = "zero"
    mu: float = 1.0
    a: float = 0.0
    b: float = 0.0
    cap: float = 1.0
    table: Table | None = None

    def __post_init__(self):
        if self.kind not in ("zero", "fisher", "affine_capped", "table"):
            raise InvalidParameter(f"unknown growth kind {self.kind!r}")
        if self.kind == "fisher" and self.mu < 0:
            raise InvalidParameter("Fisher rate mu must be >= 0")
        if self.kind == "affine_capped" and self.cap <= 0:
            raise InvalidParameter("affine_capped needs cap > 0")
        if self.kind == "table" and self.table is None:
            raise InvalidParameter("table growth needs a table")
        if self.f0 < 0:
            raise InvalidParameter("growth must satisfy f(0) >= 0")

    @property
    def f0(self) -> float:
        return float(self(np.zeros(1))[0])

    def __call__(self, n):
        n = np.asarray(n, dtype=float)
        if self.kind == "zero":
            return np.zeros_like(n)
        if self.kind == "fisher":
            return self.mu * n * (1.0 - n)
        if self.kind == "affine_capped":
            return self.a + self.b * np.minimum(n, self.cap)
        return self.table(n)

    def derivative(self, n):
        n = np.asarray(n, dtype=float)
        if self.kind == "zero":
            return np.zeros_like(n)
        if self.kind == "fisher":
            return self.mu * (1.0 - 2.0 * n)
        if self.kind == "affine_capped":
            return np.where(n < self.cap, self.b, 0.0)
        return self.table.slope(n)


@dataclass(frozen=True)
class Potential:
    """Potential phi: ``linear`` g*y (gravity) or a ``field`` sampled at cell centres."""

    kind: str = "linear"
    g: float = 0.0
    values: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in ("linear", "field"):
            raise InvalidParameter(f"unknown potential kind {self.kind!r}")
        if self.kind == "field":
            if self.values is None or not np.all(np.isfinite(self.values)):
                raise InvalidParameter("sampled potential must be finite")
        elif not math.isfinite(self.g):
            raise InvalidParameter("gravity must be finite")

    def centers(self, grid):
        if self.kind == "linear":
            _, Y = grid.centers()
            return self.g * Y
        if self.values.shape != grid.shape:
            raise InvalidParameter("sampled potential does not match the grid")
        return np.asarray(self.values, dtype=float)

    def face_gradient(self, grid):
        from .grid import Faces, grad_to_faces

        if self.kind == "linear":
            F = Faces.zeros(grid)
            F.v[1:-1, :] = self.g
            return F
        return grad_to_faces(grid, self.centers(grid))


@dataclass(frozen=True)
class ModelParams:
    m: float
    d: int = 2
    chi: Sensitivity = Sensitivity()
    k: Consumption = Consumption()
    f: Growth = Growth()
    phi: Potential = Potential()
    gamma: float = 0.0
    c_O: float = 1.0
    K2: float = 1.0

    def __post_init__(self):
        if not self.m >= 1:
            raise InvalidParameter(f"m must be >= 1, got {self.m}")
        if self.d not in (2, 3):
            raise InvalidParameter(f"d must be 2 or 3, got {self.d}")
        if not self.K2 > 0:
            raise InvalidParameter("K2 must be positive")
        if not self.c_O > 0:
            raise InvalidParameter("c_O must be positive")
        if self.gamma < 0:
            raise InvalidParameter("gamma must be >= 0 (0 = unset)")

    @property
    def regime(self) -> Regime:
        return classify_regime(self.m, self.d)


# -- hypothesis checks ---------------------------------------------------------

@dataclass
class Check:
    name: str
    passed: bool
    mandatory: bool
    constants: dict = field(default_factory=dict)
    note: str = ""

    def __str__(self):
        status = "pass" if self.passed else "FAIL"
        consts = ", ".join(f"{k}={v:.6g}" for k, v in self.constants.items())
        extra = f" [{consts}]" if consts else ""
        note = f" - {self.note}" if self.note else ""
        return f"({self.name}) {status}{extra}{note}"


@dataclass
class ValidationReport:
    regime: Regime
    purpose: Purpose
    checks: list

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks if c.mandatory)

    @property
    def failures(self):
        return [c for c in self.checks if c.mandatory and not c.passed]

    def get(self, name) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def __str__(self):
        head = f"regime={self.regime.value} purpose={self.purpose.value}"
        return "\n".join([head] + [str(c) for c in self.checks])


def _sample_points(table: Table, y_max: float):
    ys = np.asarray(table.ys)
    ys = ys[ys <= y_max]
    if ys[-1] < y_max:
        ys = np.append(ys, y_max)
    return ys


def _check_growth_table(f: Growth, gamma: float, y_max: float):
    ys = _sample_points(f.table, y_max)
    vals = f(ys)
    f0 = vals[0]
    pos = ys > 0
    C1 = max(0.0, float(np.max((vals[pos] - f0) / ys[pos])))
    asf1 = Check("asf1", True, False, {"C": C1}, "sampled on [0, %g]" % y_max)
    # on a bounded range any C_f works; report C_f = 1 with its witness C
    C2 = max(0.0, float(np.max((vals[pos] + ys[pos] ** 2 - f0) / ys[pos])))
    asf2 = Check("asf2", True, False, {"C_f": 1.0, "C": C2}, "sampled on [0, %g]" % y_max)
    asfs = Check("asfs", True, False, {"C": float(np.max(vals + 2 * gamma * ys))}, "sampled on [0, %g]" % y_max)
    return asf1, asf2, asfs


def _growth_checks(f: Growth, gamma: float, y_max):
    if f.kind == "table":
        return _check_growth_table(f, gamma, f.table.y_max if y_max is None else y_max)
    if f.kind == "zero" or (f.kind == "fisher" and f.mu == 0):
        return (
            Check("asf1", True, False, {"C": 0.0}),
            Check("asf2", False, False, note="f(y) + C_f y^2 <= C y fails as y -> infinity"),
            Check("asfs", gamma == 0, False, {"C": 0.0} if gamma == 0 else {},
                  "" if gamma == 0 else "2 gamma y is unbounded"),
        )
    if f.kind == "fisher":
        mu = f.mu
        return (
            Check("asf1", True, False, {"C": mu}),
            Check("asf2", True, False, {"C_f": mu, "C": mu}),
            Check("asfs", True, False, {"C": (mu + 2 * gamma) ** 2 / (4 * mu)}),
        )
    # affine_capped: f(y) - f(0) = b*min(y, cap) <= max(b, 0) * y
    bounded = f.b * f.cap if f.b > 0 else 0.0
    return (
        Check("asf1", True, False, {"C": max(f.b, 0.0)}),
        Check("asf2", False, False, note="affine growth has no -C_f y^2 decay"),
        Check("asfs", gamma == 0, False, {"C": f.a + bounded} if gamma == 0 else {},
              "" if gamma == 0 else "2 gamma y is unbounded"),
    )


def validate_hypotheses(params: ModelParams, purpose=Purpose.EXISTENCE, *, y_max=None,
                        strict: bool = True) -> ValidationReport:
    """Check the growth hypotheses demanded by the regime (and attractor theory).

    Supercritical runs need (asf1), subcritical runs need (asf2); attractor
    studies additionally need (asfs) with the configured ``gamma``.  With
    ``strict`` a failed mandatory check raises :class:`HypothesisError`.
    """
    purpose = Purpose(purpose)
    regime = params.regime
    f = params.f
    if f.kind == "table" and y_max is not None and y_max > f.table.y_max:
        raise RangeError(f"growth table covers [0, {f.table.y_max}] but [0, {y_max}] was requested")

    structural = [
        Check("chi'>=0", True, True),
        Check("k>=0,k(0)=0", True, True),
        Check("f(0)>=0", f.f0 >= 0, True, {"f(0)": f.f0}),
    ]
    asf1, asf2, asfs = _growth_checks(f, params.gamma, y_max)
    asf1.mandatory = regime is Regime.SUPERCRITICAL
    asf2.mandatory = regime is Regime.SUBCRITICAL
    asfs.mandatory = purpose is Purpose.ATTRACTOR
    report = ValidationReport(regime, purpose, structural + [asf1, asf2, asfs])
    if strict and not report.ok:
        names = ", ".join(f"({c.name})" for c in report.failures)
        raise HypothesisError(f"hypothesis {names} fails for {regime.value} regime: "
                              + "; ".join(c.note for c in report.failures if c.note), report)
    return report


def poincare_bound(grid) -> float:
    """Lower bound of the Dirichlet Laplacian spectrum on the rectangle."""
    return math.pi**2 * (1.0 / grid.Lx**2 + 1.0 / grid.Ly**2)


def admissible_gamma(grid, requested=None) -> float:
    """Rate gamma with ``4 gamma ||u||^2 <= ||grad u||^2`` on the rectangle."""
    lam1 = poincare_bound(grid)
    cap = lam1 / 4.0
    if requested is None or requested == 0:
        gamma = cap
    elif requested < 0:
        raise InvalidParameter("requested gamma must be positive")
    else:
        gamma = min(float(requested), cap)
    log.debug("admissible gamma %.6g (lambda_1/4 = %.6g)", gamma, cap)
    return gamma
