import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from bioflux.cell import assemble_cell_fluxes, cell_cfl, cell_step, drift_velocity, positivity_rate
from bioflux.errors import CFLViolation, DomainError
from bioflux.experiments import barenblatt_study, cell_mms
from bioflux.grid import Faces, Grid, entropy, integrate
from bioflux.model import Growth, Sensitivity

from conftest import random_solenoidal


def test_drift_examples():
    g = Grid(8, 8)
    X, _ = g.centers()
    assert drift_velocity(g, np.full(g.shape, 0.7), Sensitivity("constant", chi0=2.0)).max_abs() == 0
    w = drift_velocity(g, X, Sensitivity("constant", chi0=0.3))
    np.testing.assert_allclose(w.u[:, 1:-1], 0.3, rtol=1e-12)
    assert np.all(w.u[:, [0, -1]] == 0)
    assert drift_velocity(g, np.full(g.shape, 2.0), Sensitivity("power", chi0=1.0, q=1.0)).max_abs() == 0
    with pytest.raises(DomainError):
        drift_velocity(g, np.full(g.shape, -1.0), Sensitivity())


def test_flux_examples():
    g = Grid(8, 8)
    zero = Faces.zeros(g)
    F = assemble_cell_fluxes(g, np.full(g.shape, 0.4), zero, zero, 2.0)
    assert F.max_abs() == 0
    n = np.random.default_rng(0).random(g.shape)
    u = Faces.zeros(g)
    u.u[:, 1:-1] = 0.75
    F = assemble_cell_fluxes(g, n, u, zero, 1.0)
    diff = -(n[:, 1:] - n[:, :-1]) / g.dx
    np.testing.assert_allclose(F.u[:, 1:-1], 0.75 * n[:, :-1] + diff, rtol=1e-13)
    # constant n: the diffusive part vanishes and the flux is a * n_left
    F = assemble_cell_fluxes(g, np.full(g.shape, 2.0), u, zero, 3.0)
    np.testing.assert_allclose(F.u[:, 1:-1], 1.5)
    assert np.all(F.u[:, [0, -1]] == 0) and np.all(F.v[[0, -1], :] == 0)


def test_upwinding_uses_total_velocity():
    g = Grid(6, 6)
    n = np.arange(36, dtype=float).reshape(6, 6)
    u = Faces.zeros(g)
    w = Faces.zeros(g)
    u.u[:, 1:-1] = 1.0
    w.u[:, 1:-1] = -3.0
    F = assemble_cell_fluxes(g, n, u, w, 1.0)
    adv = F.u[:, 1:-1] + (n[:, 1:] - n[:, :-1]) / g.dx
    np.testing.assert_allclose(adv, -2.0 * n[:, 1:])


def test_barenblatt_profile_reproduced():
    assert barenblatt_study(nx=128, horizon=0.5) <= 0.05


def test_cell_step_examples():
    g = Grid(8, 8)
    zero = Faces.zeros(g)
    fisher = Growth("fisher", mu=1.0)
    ones = np.ones(g.shape)
    out = cell_step(g, ones, assemble_cell_fluxes(g, ones, zero, zero, 2), fisher, 0.1)
    assert np.array_equal(out, ones)
    z = np.zeros(g.shape)
    assert np.array_equal(cell_step(g, z, assemble_cell_fluxes(g, z, zero, zero, 2), fisher, 0.1), z)


def test_cell_step_rejects_negative():
    g = Grid(8, 8)
    n = np.zeros(g.shape)
    n[4, 4] = 1.0
    zero = Faces.zeros(g)
    F = assemble_cell_fluxes(g, n, zero, zero, 1.0)
    limit = cell_cfl(g, n, zero, zero, 1.0, safety=1.0)
    cell_step(g, n, F, Growth(), limit)
    with pytest.raises(CFLViolation):
        cell_step(g, n, F, Growth(), 2 * limit)


def test_cfl_examples():
    g = Grid(10, 10, 2.0, 2.0)
    zero = Faces.zeros(g)
    z = np.zeros(g.shape)
    assert cell_cfl(g, z, zero, zero, 2.0, Growth()) == math.inf
    n = np.random.default_rng(1).random(g.shape)
    h = g.dx
    assert cell_cfl(g, n, zero, zero, 1.0) == pytest.approx(0.4 * h**2 / (2 * 2))
    # with no diffusion active the advective bound scales inversely with speed
    u = random_solenoidal(g, np.random.default_rng(2))
    a = cell_cfl(g, z, u, zero, 2.0)
    b = cell_cfl(g, z, u.scaled(2.0), zero, 2.0)
    assert b == pytest.approx(a / 2)


@st.composite
def cell_inputs(draw):
    seed = draw(st.integers(0, 2**32 - 1))
    m = draw(st.sampled_from([1.0, 1.5, 2.0, 3.0]))
    nx = draw(st.integers(4, 14))
    ny = draw(st.integers(4, 14))
    g = Grid(nx, ny, draw(st.floats(0.5, 3)), draw(st.floats(0.5, 3)))
    rng = np.random.default_rng(seed)
    n = rng.random(g.shape) * draw(st.floats(0.01, 5))
    n[rng.random(g.shape) < 0.3] = 0.0
    u = random_solenoidal(g, rng, draw(st.floats(0, 10)))
    c = rng.random(g.shape)
    w = drift_velocity(g, c, Sensitivity("constant", chi0=draw(st.floats(0, 3))))
    f = draw(st.sampled_from([Growth(), Growth("fisher", mu=2.0), Growth("affine_capped", a=0.1, b=-0.5)]))
    return g, n, u, w, m, f


@given(cell_inputs(), st.floats(0.05, 1.0))
def test_positivity_and_exact_mass_law(inputs, frac):
    g, n, u, w, m, f = inputs
    dt = frac * cell_cfl(g, n, u, w, m, f, safety=1.0)
    if not math.isfinite(dt):
        dt = 0.1
    out = cell_step(g, n, assemble_cell_fluxes(g, n, u, w, m), f, dt)
    assert out.min() >= 0.0
    mass0 = integrate(g, n)
    defect = integrate(g, out) - mass0 - dt * integrate(g, f(n))
    assert abs(defect) <= 1e-13 * max(mass0, integrate(g, out), 1e-300) + 1e-300


@given(cell_inputs())
def test_positivity_rate_nonnegative(inputs):
    g, n, u, w, m, f = inputs
    assert np.all(positivity_rate(g, n, u, w, m, f) >= 0)


@given(st.integers(0, 2**32 - 1), st.sampled_from([1.0, 2.0, 3.0]))
def test_entropy_dissipation_pure_diffusion(seed, m):
    g = Grid(12, 12)
    n = np.random.default_rng(seed).random(g.shape) + 0.01
    zero = Faces.zeros(g)
    for _ in range(5):
        dt = cell_cfl(g, n, zero, zero, m)
        n1 = cell_step(g, n, assemble_cell_fluxes(g, n, zero, zero, m), Growth(), dt)
        assert entropy(g, n1) <= entropy(g, n) + 1e-12
        n = n1


def test_mms_first_order():
    conv = cell_mms(levels=(8, 16, 32), T=0.02)
    assert conv.order >= 0.8
