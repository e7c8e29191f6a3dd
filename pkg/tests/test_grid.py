import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kgzlab import grid as G
from kgzlab.grid import GridSpec, ScalarField, SpinorField, WeightKind, WeightProfile
from kgzlab.oracles import quadrature_oracle, radial_integral_oracle


def test_box_axis_is_periodic_and_uniform():
    g = GridSpec.box(10.0, 20)
    assert g.h == pytest.approx(1.0)
    assert g.axis[0] == pytest.approx(-9.5)
    assert 0.0 not in g.axis
    assert np.allclose(np.diff(g.axis), g.h)
    assert g.shape == (20, 20, 20)


def test_gaussian_l2_norm_matches_quadrature():
    f = G.sample(GridSpec.box(12.0, 64), lambda x, y, z: np.exp(-(x * x + y * y + z * z) / 2))
    exact = radial_integral_oracle(lambda r: np.exp(-r * r), 30.0)
    assert G.l2_norm(f) ** 2 == pytest.approx(exact, rel=1e-10)


def test_radial_norm_matches_quadrature(radial):
    f = G.sample(radial, lambda r: np.exp(-r * r / 2))
    exact = radial_integral_oracle(lambda r: np.exp(-r * r), 30.0)
    assert G.l2_norm(f) ** 2 == pytest.approx(exact, rel=1e-8)


def test_sample_reports_bad_node(box32):
    with pytest.raises(ValueError, match="non-finite"):
        G.sample(box32, lambda x, y, z: np.sqrt(x))


def test_weighted_norm_rejects_wrong_time(box32):
    f = G.sample(box32, lambda x, y, z: np.exp(-x * x), t=1.0)
    w = WeightProfile(WeightKind.T_PLUS_R)
    assert G.l2_norm(f, w) > G.l2_norm(f)
    with pytest.raises(ValueError):
        G.l2_norm(f, w, t=2.0)


def test_ghost_weight_against_quadrature():
    q = G.ghost_weight(0.05)
    w = lambda s: (1 + s * s) ** (-0.55)
    for s in (-50.0, -3.0, 0.0, 2.5, 40.0):
        lower, _ = quadrature_oracle(w, -np.inf, s, tol=1e-12)
        assert q.q(s) == pytest.approx(lower, rel=1e-9)
    total, _ = quadrature_oracle(w, -np.inf, np.inf, tol=1e-12)
    assert q.total == pytest.approx(total, rel=1e-9)


@given(st.floats(-3000, 3000), st.floats(0.01, 50))
def test_ghost_weight_monotone_and_bounded(s, ds):
    q = G.ghost_weight(0.05)
    a, b = q.q(s), q.q(s + ds)
    assert 0 < a <= b <= q.total + 1e-12


def test_chi_cutoff():
    x = np.array([0.0, 1.0, 1.5, 2.0, 5.0])
    assert np.allclose(G.chi(x), [0, 0, 0.5, 1, 1])
    assert np.all(G.chi_prime(x) >= 0)


def test_sup_shell_finds_peak(box32):
    f = G.sample(box32, lambda x, y, z: np.exp(-((x - 3.375) ** 2 + (y - 0.375) ** 2 + (z - 0.375) ** 2)))
    s = G.sup_shell(f)
    assert s.global_sup == pytest.approx(1.0)
    assert s.argmax_radius == pytest.approx(np.sqrt(3.375**2 + 2 * 0.375**2))
    assert np.all(np.diff(s.radii) > 0)


def test_binary_round_trip(tmp_path, rng):
    g = GridSpec.box(4.0, 8)
    vals = rng.normal(size=(4, 8, 8, 8)) + 1j * rng.normal(size=(4, 8, 8, 8))
    f = SpinorField(g, vals, 0.75)
    G.save(f, tmp_path / "psi.kgzf")
    back = G.load(tmp_path / "psi.kgzf")
    assert type(back) is SpinorField and back.grid == g and back.t == 0.75
    assert np.array_equal(back.values, vals)
    raw = G.to_bytes(f)
    assert raw[:4] == b"KGZF" or len(raw) > 76


@settings(max_examples=25, deadline=None)
@given(st.floats(0.5, 4.0), st.floats(-2, 2))
def test_norm_scales_linearly(c, t):
    g = GridSpec.box(6.0, 12)
    f = G.sample(g, lambda x, y, z: np.exp(-x * x - y * y - z * z), t=t)
    assert G.l2_norm(f.with_values(c * f.values)) == pytest.approx(c * G.l2_norm(f), rel=1e-12)
