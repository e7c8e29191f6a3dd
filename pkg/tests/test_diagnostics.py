import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kgzlab import diagnostics as dg
from kgzlab.grid import GridSpec, ScalarField, WeightKind, WeightProfile
from kgzlab.propagators import PropagatorKind, dirac_evolve, scalar_evolve
from kgzlab.systems import radial_group


@given(st.floats(-3, 1), st.floats(0.1, 10))
def test_power_law_recovered(p, c):
    t = np.linspace(2, 40, 25)
    slope, icpt, r2 = dg.fit_power_law(t, c * t**p)
    assert slope == pytest.approx(p, abs=1e-10) and np.exp(icpt) == pytest.approx(c, rel=1e-9)
    assert r2 == pytest.approx(1.0)


def test_decay_fit_window_and_ratio():
    t = np.arange(1.0, 21.0)
    fit = dg.decay_fit((t, 2.0 / t), window=(4.0, 16.0), name="u")
    assert fit.times[0] == 4.0 and fit.times[-1] == 16.0
    assert fit.ratio == pytest.approx(4.0)
    assert not fit.bounded(3.0) and fit.bounded(4.0)
    assert fit.to_csv().splitlines()[0] == "t,u"


@pytest.mark.parametrize("window, extent, radius, match", [
    ((0.0, 5.0), None, None, "0 < t_min"),
    ((2.0, 30.0), 20.0, 5.0, "uncontaminated"),
])
def test_decay_fit_window_errors(window, extent, radius, match):
    with pytest.raises(dg.DiagnosticError, match=match):
        dg.decay_fit((np.arange(1.0, 40.0), np.ones(39)), window=window, extent=extent, data_radius=radius)


def test_weighted_sup_series():
    grid = GridSpec.box(8.0, 16)
    fields = [ScalarField(grid, np.full(grid.shape, 1.0 / (1 + t)), t) for t in (1.0, 2.0, 3.0)]
    w = WeightProfile(WeightKind.T_PLUS_R, {"power": 1.0})
    t, v = dg.series_from_fields(fields, "weighted-sup", w)
    r_max = grid.radius().max()
    assert np.allclose(v, np.sqrt(1 + (t + r_max) ** 2) / (1 + t))
    with pytest.raises(dg.DiagnosticError):
        dg.series_from_fields(fields, "weighted-sup")


def free_box(kind, times):
    grid = GridSpec.box(10.0, 32)
    x, y, z = grid.mesh()
    u0 = np.exp(-(x * x + y * y + z * z))
    if kind is PropagatorKind.DIRAC:
        psi = np.stack([u0, 0 * u0, 0.5j * u0, 0 * u0])
        return grid, {t: dirac_evolve(psi, grid, t, mass=1.0) for t in times}
    m2 = 1.0 if kind is PropagatorKind.KLEIN_GORDON else 0.0
    return grid, {t: scalar_evolve(u0, 0.2 * u0, grid, t, m2) for t in times}


@pytest.mark.parametrize("kind", list(PropagatorKind))
def test_free_solutions_have_zero_scattering_distance(kind):
    pairs = dg.dyadic_pairs(1, 2)
    grid, traj = free_box(kind, (2.0, 4.0, 8.0))
    res = dg.scattering_residual(traj, kind, pairs, grid, mass=1.0)
    scale = dg.component_norm(kind, grid, traj[2.0])
    assert max(res.distances) < 1e-12 * scale
    assert res.to_json()["pairs"] == [[2.0, 4.0], [4.0, 8.0]]


def test_radial_free_distance_is_roundoff():
    grid = GridSpec.radial(40.0, 800)
    r = grid.axis
    u0, u1 = np.exp(-r * r), 0 * r
    traj = {}
    for t in (1.0, 2.0):
        w, wt = radial_group(grid.extent, grid.points, t, 1.0).evolve(r * u0, r * u1)
        traj[t] = (w / r, wt / r)
    res = dg.scattering_residual(traj, PropagatorKind.KLEIN_GORDON, ((1.0, 2.0),), grid)
    assert res.distances[0] < 1e-12 * dg.component_norm(PropagatorKind.KLEIN_GORDON, grid, traj[1.0])


def test_missing_snapshot():
    grid, traj = free_box(PropagatorKind.WAVE, (2.0, 4.0))
    with pytest.raises(dg.DiagnosticError, match="no snapshot"):
        dg.scattering_residual(traj, "wave-SW", ((2.0, 3.0),), grid)


def test_decreasing_is_strict():
    mk = lambda d: dg.ScatteringResult(PropagatorKind.WAVE, ((1, 2), (2, 4), (4, 8)), d)
    assert mk((3.0, 2.0, 1.0)).decreasing
    assert not mk((3.0, 3.0, 1.0)).decreasing


def test_summary_collects_verdicts():
    s = dg.Summary()
    s.add({"kind": "x"}, "a", True)
    s.add({"kind": "y"})
    assert s.passed and s.verdicts == {"a": True}
    s.add({"kind": "z"}, "b", False)
    assert not s.passed
