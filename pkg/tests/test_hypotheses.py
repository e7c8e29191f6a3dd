import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from kgzlab import hypotheses as hy
from kgzlab.closedform import Gaussian
from kgzlab.data import Family, make_data
from kgzlab.grid import GridSpec
from kgzlab.oracles import radial_integral_oracle

QUAD = GridSpec.box(12.0, 48)


def test_smallness_spot_value():
    assert hy.smallness_bound_exact(1, 2) == Fraction(1, 3508536)
    assert hy.smallness_bound(1.0, 2.0) == 1 / 3508536


@given(st.integers(1, 50), st.integers(1, 50))
def test_smallness_formula(c, k):
    assert hy.smallness_bound_exact(c, k) == Fraction(1, 71**2 * 174 * c**3 * k**2)
    assert hy.smallness_bound(float(c), float(k)) == pytest.approx(float(hy.smallness_bound_exact(c, k)), rel=1e-15)


def test_weighted_norm_matches_quadrature():
    g = Gaussian(1.0, 1.0)
    q = hy._Quadrature(QUAD)
    # ||<x>^2 g||^2 = 4 pi int r^2 (1 + r^2)^2 e^{-r^2} dr
    exact = math.sqrt(radial_integral_oracle(lambda r: (1 + r * r) ** 2 * math.exp(-r * r), 12.0))
    assert hy.tensor_norm(q, (g,), 0, 2) == pytest.approx(exact, rel=1e-10)
    # the full first-derivative tensor: |grad g|^2 = r^2 e^{-r^2}
    exact1 = math.sqrt(radial_integral_oracle(lambda r: r * r * math.exp(-r * r), 12.0))
    assert hy.tensor_norm(q, (g,), 1, 0) == pytest.approx(exact1, rel=1e-10)


def certified(eps=1e-13, k0=1e-10):
    grid = GridSpec.box(16.0, 64)
    return make_data(Family.CERTIFIED_PAIR, {"eps": eps, "k0": k0, "sigma_kg": 1.5, "sigma_wave": 1.5}, grid)


def test_tiny_certified_data_pass():
    rep = hy.hypothesis_check(certified(), 2.0, 0.1, 10, 1.0, QUAD)
    assert rep.passed
    assert rep.smallness_bound == 1 / 3508536
    assert rep["wave-positivity"].passed and rep.witness is None


def test_plain_bump_fails_positivity_with_witness():
    grid = GridSpec.box(16.0, 64)
    d = make_data(Family.GAUSSIAN_BUMP, {"eps": 1e-13, "k0": 1e-10, "sigma_kg": 1.5, "sigma_wave": 1.5,
                                         "n1_ratio": 0.0}, grid)
    rep = hy.hypothesis_check(d, 2.0, 0.1, 10, 1.0, QUAD)
    assert not rep["wave-positivity"].passed
    assert rep.witness is not None


def test_n_floor_and_positive_parameters():
    with pytest.raises(ValueError, match="floor"):
        hy.hypothesis_check(certified(), 2.0, 0.1, 3, 1.0, QUAD)
    with pytest.raises(ValueError):
        hy.hypothesis_check(certified(), 0.0, 0.1, 10, 1.0, QUAD)


def test_scaling_is_linear_and_monotone():
    sc = hy.scaling_check(certified(), 2.0, 0.1, 10, 1.0, count=6, grid=QUAD)
    assert sc.linear and sc.monotone
    assert sc.reports[0].passed and not sc.reports[-1].passed


def test_sobolev_ratio_prefix_monotone():
    trials = hy.shipped_trials()[:4]
    est = hy.sobolev_constant_estimate(trials, GridSpec.box(12.0, 32))
    assert est.lower_bound > 0 and est.trial_count == 4
    assert est.lower_bound == max(est.ratios)
    assert est.to_json()["kind"] == "sobolev-constant"
