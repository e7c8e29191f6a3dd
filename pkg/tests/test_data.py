import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kgzlab.closedform import Gaussian, PlaneMode, Sum, multi_indices, multinomial
from kgzlab.data import DataError, Family, certified_n1, certify, make_data
from kgzlab.grid import GridSpec
from kgzlab.oracles import fd_derivative


@pytest.mark.parametrize("alpha", [(1, 0, 0), (0, 2, 0), (1, 1, 1), (3, 0, 1)])
def test_gaussian_derivatives_match_finite_differences(alpha):
    g = Gaussian(0.8, 1.3, (0.2, -0.1, 0.4))
    p = np.array([0.5, 0.3, -0.6])
    axes = [a for a, n in enumerate(alpha) for _ in range(n)]
    ref, _ = fd_derivative(lambda y: float(g(*y)), p, direction=axes, h0=0.2, tol=1e-7)
    assert float(g.derivative(alpha, *p)) == pytest.approx(ref, abs=1e-7)


def test_plane_mode_and_sum_derivatives():
    f = Sum((PlaneMode(1.0, (1.0, 2.0, 0.0)), Gaussian(1.0, 1.0)), (2.0, -1.0))
    p = np.array([0.1, 0.2, 0.3])
    ref, _ = fd_derivative(lambda y: float(f(*y)), p, direction=1)
    assert float(f.derivative((0, 1, 0), *p)) == pytest.approx(ref, abs=1e-8)


def test_multi_index_helpers():
    assert len(multi_indices(3)) == 10
    assert sum(multinomial(a) for a in multi_indices(4)) == 3**4


@settings(max_examples=50)
@given(st.floats(0.01, 10), st.floats(0.3, 5), st.floats(0, 1), st.floats(0, 8))
def test_certified_n1_majorizes_gradient(A, s, margin, r):
    n0 = Gaussian(A, s)
    n1 = certified_n1(n0, margin)
    grad = A * r / s**2 * math.exp(-r * r / (2 * s * s))
    extra = margin * A / s * math.exp(-r * r / (4 * s * s))
    assert float(n1(r, 0.0, 0.0)) >= grad + extra - 1e-12 * A / s


def test_certified_pair_passes_certificate():
    grid = GridSpec.box(16.0, 80)
    data = make_data(Family.CERTIFIED_PAIR, {"k0": 1.0, "sigma_wave": 1.0}, grid)
    v = certify(data, grid)
    assert v.certified and v.margin > -1e-12  # far tails sit at roundoff


def test_plain_bump_is_not_certified():
    grid = GridSpec.box(16.0, 80)
    data = make_data(Family.GAUSSIAN_BUMP, {"k0": 1.0, "sigma_wave": 1.0, "n1_ratio": 0.0}, grid)
    assert not certify(data, grid).certified


def test_scaling_is_linear():
    grid = GridSpec.box(10.0, 32)
    d = make_data(Family.GAUSSIAN_BUMP, {"eps": 0.1, "k0": 0.2}, grid, "dkg")
    a, b = d.state(grid), d.scaled(3.0).state(grid)
    assert np.allclose(b.psi.values, 3 * a.psi.values)


@pytest.mark.parametrize("params, match", [
    ({"sigma_kg": -1.0}, "positive"),
    ({"bogus": 1}, "unknown"),
    ({"eps": -0.1}, "non-negative"),
    ({"sigma_kg": 0.1}, "under-resolved"),
])
def test_bad_parameters(params, match):
    with pytest.raises(DataError, match=match):
        make_data(Family.GAUSSIAN_BUMP, params, GridSpec.box(10.0, 32))


def test_radial_rules():
    r = GridSpec.radial(20.0, 200)
    with pytest.raises(DataError, match="centred"):
        make_data(Family.GAUSSIAN_BUMP, {"center": (1.0, 0.0, 0.0)}, r)
    with pytest.raises(DataError, match="box"):
        make_data(Family.GAUSSIAN_BUMP, {}, r, "dkg")


def test_certified_pair_must_fit_in_box():
    with pytest.raises(DataError, match="faces"):
        make_data(Family.CERTIFIED_PAIR, {"sigma_wave": 2.0}, GridSpec.box(16.0, 64))
