import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from kgzlab import energy as en
from kgzlab.gamma import project_pm
from kgzlab.data import Family, make_data
from kgzlab.grid import GridSpec, sample
from kgzlab.oracles import radial_integral_oracle
from kgzlab.propagators import dirac_evolve, scalar_evolve

BOX = GridSpec.box(12.0, 48)
LINE = GridSpec.radial(30.0, 1200)


def gauss(grid):
    return sample(grid, (lambda x, y, z: np.exp(-(x * x + y * y + z * z) / 2)) if grid.dim == 3
                  else (lambda r: np.exp(-r * r / 2))).values


def natural(grid):
    u = gauss(grid)
    return en.natural_energy(u, 0 * u, grid, 1.0)


def conformal(grid):
    # u_t = 0 at t = 0 leaves only |r u_r|^2 + u^2
    u = gauss(grid)
    return en.conformal_energy(en.pair_jet(u, 0 * u, grid, 0.0))


@pytest.mark.parametrize("functional, density", [
    (natural, lambda r: (r * r + 1.0) * math.exp(-r * r)),
    (conformal, lambda r: (r**4 + 1.0) * math.exp(-r * r)),
])
def test_energies_match_quadrature(functional, density):
    exact = radial_integral_oracle(density, 30.0)
    assert functional(BOX) == pytest.approx(exact, rel=1e-9)
    # 4th-order differences on the radial line
    e1 = abs(functional(LINE) - exact)
    e2 = abs(functional(GridSpec.radial(30.0, 2400)) - exact)
    assert e1 < 1e-5 * exact and math.log2(e1 / e2) > 3.5


def ghost_drift(dt, points=48, t_end=2.0):
    grid = GridSpec.box(12.0, points)
    u0 = gauss(grid)
    u1 = 0.3 * u0
    ident = en.GhostIdentity()
    for k in range(int(round(t_end / dt)) + 1):
        t = k * dt
        u, ut = scalar_evolve(u0, u1, grid, t, 1.0)
        s, d, _, _ = en.ghost_kg_densities(u, ut, grid, t, 0.05, 1.0)
        ident.add(t, en._integrate(grid, s), en._integrate(grid, d))
    return ident.drift / ident.initial


def test_ghost_identity_second_order_in_dt():
    # signed drift = spatial floor + C dt^2; differences cancel the floor
    d = [ghost_drift(dt) for dt in (0.1, 0.05, 0.025)]
    assert math.log2((d[0] - d[1]) / (d[1] - d[2])) > 1.8
    floor48 = d[2] - (d[1] - d[2]) / 3
    floor64 = ghost_drift(0.025, 64) - (ghost_drift(0.05, 64) - ghost_drift(0.025, 64)) / 3
    assert abs(floor64) < abs(floor48) < 1e-4


def test_dirac_ghost_identity():
    grid = GridSpec.box(12.0, 32)
    d = make_data(Family.GAUSSIAN_BUMP, {"eps": 1.0, "sigma_kg": 1.5}, grid, "dkg")
    psi0 = d.state(grid).psi.values
    drifts = []
    for dt in (0.1, 0.05):
        ident = en.GhostIdentity()
        for k in range(int(round(2.0 / dt)) + 1):
            s, dd, _, _ = en.ghost_dirac_densities(dirac_evolve(psi0, grid, k * dt), grid, k * dt, 0.05)
            ident.add(k * dt, en._integrate(grid, s), en._integrate(grid, dd))
        drifts.append(ident.relative_drift)
    assert drifts[1] < 1e-4 and math.log2(drifts[0] / drifts[1]) > 1.8


@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(0.1, 5))
def test_trapezoid_exact_for_linear_rates(a, b, T):
    acc = en.Trapezoid()
    for t in np.linspace(0, T, 7):
        acc.add(t, a + b * t)
    assert acc.value == pytest.approx(a * T + 0.5 * b * T * T, abs=1e-10)


def test_trapezoid_rejects_backwards_time():
    acc = en.Trapezoid()
    acc.add(1.0, 0.0)
    with pytest.raises(ValueError):
        acc.add(0.5, 0.0)


def test_tracker_rows_and_csv(tmp_path):
    grid = GridSpec.box(12.0, 32)
    state = make_data(Family.GAUSSIAN_BUMP, {"eps": 0.1, "k0": 0.1, "sigma_kg": 1.5, "sigma_wave": 1.5},
                      grid).state(grid)
    tr = en.EnergyTracker()
    rep = tr.report(state)
    assert rep.natural > 0 and rep.conformal > 0 and math.isnan(rep.dirac_stored)
    text = en.reports_to_csv([rep], tmp_path / "energy.csv")
    head, row = text.strip().splitlines()
    assert head.split(",") == list(en.CSV_COLUMNS)
    assert float(row.split(",")[1]) == rep.natural
    assert (tmp_path / "energy.csv").read_text() == text


def test_minus_part_matches_pointwise_projection(rng):
    grid = GridSpec.box(4.0, 8)
    psi = rng.normal(size=(4,) + grid.shape) + 1j * rng.normal(size=(4,) + grid.shape)
    omega = np.stack([c / grid.radius() for c in grid.mesh()], axis=-1)
    _, minus = project_pm(np.moveaxis(psi, 0, -1), omega)
    assert np.allclose(en.minus_part(psi, grid), np.moveaxis(minus, -1, 0))
