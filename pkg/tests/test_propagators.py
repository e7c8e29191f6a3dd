import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kgzlab import propagators as P
from kgzlab.closedform import Gaussian
from kgzlab.gamma import dirac_symbol
from kgzlab.grid import GridSpec, ScalarField, SpinorField, l2_norm, sample
from kgzlab.oracles import ode_oracle, sphere_mean_oracle

GRID = GridSpec.box(np.pi * 2, 16)
K = (1.0, -2.0, 0.5)


def plane(grid):
    return sample(grid, lambda x, y, z: np.cos(K[0] * x + K[1] * y + K[2] * z))


@pytest.mark.parametrize("kind, mass2", [(P.PropagatorKind.WAVE, 0.0), (P.PropagatorKind.KLEIN_GORDON, 1.0)])
def test_plane_wave_evolves_exactly(kind, mass2):
    u0 = plane(GRID)
    out = P.propagate(kind, P.WaveData(u0, u0.with_values(0 * u0.values)), 3.7)
    w = np.sqrt(np.dot(K, K) + mass2)
    assert np.abs(out.u0.values - np.cos(w * 3.7) * u0.values).max() < 1e-12
    assert np.abs(out.u1.values + w * np.sin(w * 3.7) * u0.values).max() < 1e-12
    assert out.t0 == pytest.approx(3.7)


def test_dirac_plane_mode_matches_ode():
    a = np.array([1.0, 0.3j, -0.2, 0.5])
    mass = 0.7
    phase = np.exp(1j * (K[0] * GRID.mesh()[0] + K[1] * GRID.mesh()[1] + K[2] * GRID.mesh()[2]))
    psi = SpinorField(GRID, a[:, None, None, None] * phase)
    D = dirac_symbol(K, mass=mass)

    def rhs(t, y):
        z = y[:4] + 1j * y[4:]
        dz = -1j * D @ z
        return np.concatenate([dz.real, dz.imag])

    y = ode_oracle(rhs, np.concatenate([a.real, a.imag]), 2.5)[-1]
    ref = (y[:4] + 1j * y[4:])[:, None, None, None] * phase
    got = P.propagate(P.PropagatorKind.DIRAC, psi, 2.5, mass=mass)
    assert np.abs(got.values - ref).max() < 1e-10


@settings(max_examples=20, deadline=None)
@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(0, 2))
def test_dirac_group_and_unitarity(t1, t2, m):
    g = GridSpec.box(4.0, 8)
    rng = np.random.default_rng(7)
    psi = rng.normal(size=(4, 8, 8, 8)) + 1j * rng.normal(size=(4, 8, 8, 8))
    a = P.dirac_evolve(P.dirac_evolve(psi, g, t1, mass=m), g, t2, mass=m)
    b = P.dirac_evolve(psi, g, t1 + t2, mass=m)
    assert np.abs(a - b).max() < 1e-11
    assert l2_norm(SpinorField(g, a)) == pytest.approx(l2_norm(SpinorField(g, psi)), rel=1e-12)


@settings(max_examples=20, deadline=None)
@given(st.floats(-4, 4), st.floats(0, 1))
def test_scalar_energy_conserved(t, m2):
    g = GridSpec.box(6.0, 16)
    rng = np.random.default_rng(3)
    u, v = rng.normal(size=(2, 16, 16, 16))
    e0 = P.natural_energy_arrays(u, v, g, m2)
    e1 = P.natural_energy_arrays(*P.scalar_evolve(u, v, g, t, m2), g, m2)
    assert e1 == pytest.approx(e0, rel=1e-12)


def test_kirchhoff_matches_sphere_means():
    g0 = Gaussian(1.0, 1.2, (0.5, 0.0, 0.0))
    g1 = Gaussian(-0.4, 1.0, (0.0, 0.0, 0.3))
    cf = P.ClosedFormData(g0, lambda a, b, c: g0.gradient(a, b, c), g1)
    x, t = np.array([0.4, -0.7, 1.1]), 1.8
    # u(t, x) = t M[u1](t) + d/dt (t M[u0](t)), the derivative by central differences
    mean = lambda f, s: sphere_mean_oracle(lambda a, b, c: float(f(a, b, c)), x, s)
    dt = 1e-3
    d = ((t + dt) * mean(g0, t + dt) - (t - dt) * mean(g0, t - dt)) / (2 * dt)
    ref = t * mean(g1, t) + d
    got = P.kirchhoff_eval(cf, t, x[None, :])[0]
    assert got == pytest.approx(ref, abs=1e-6)


def test_kirchhoff_agrees_with_spectral_wave():
    grid = GridSpec.box(12.0, 48)
    g0 = Gaussian(1.0, 1.5)
    g1 = Gaussian(0.5, 1.5, (0.0, 1.0, 0.0))
    cf = P.ClosedFormData(g0, lambda a, b, c: g0.gradient(a, b, c), g1)
    wd = P.WaveData(ScalarField(grid, g0(*grid.mesh())), ScalarField(grid, g1(*grid.mesh())))
    u = P.propagate(P.PropagatorKind.WAVE, wd, 3.0).u0.values
    idx = np.array([[24, 24, 24], [20, 30, 26], [10, 24, 30]])
    kv = P.kirchhoff_eval(cf, 3.0, grid.axis[idx])
    assert np.abs(kv - u[idx[:, 0], idx[:, 1], idx[:, 2]]).max() < 1e-6


def test_positivity_certificate_reports_witness():
    grid = GridSpec.box(10.0, 32)
    n0 = sample(grid, lambda x, y, z: np.exp(-(x * x + y * y + z * z) / 2))
    x2 = sum(c * c for c in grid.mesh())
    good = P.positivity_certificate(P.WaveData(n0, n0.with_values((1 + np.sqrt(x2)) * n0.values + 1e-3)))
    assert good.certified and good.margin > 0
    bad = P.positivity_certificate(P.WaveData(n0, n0.with_values(0 * n0.values)))
    assert not bad.certified and bad.witness is not None


def test_radial_grid_rejected():
    r = GridSpec.radial(10.0, 32)
    f = sample(r, lambda s: np.exp(-s * s))
    with pytest.raises(ValueError, match="box"):
        P.propagate(P.PropagatorKind.WAVE, P.WaveData(f, f), 1.0)
