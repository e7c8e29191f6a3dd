import numpy as np
import pytest
import sympy as sp

from kgzlab import inequalities as iq
from kgzlab.grid import GridSpec
from kgzlab.vectorfields import T, X1, X2, X3

R2 = X1**2 + X2**2 + X3**2
U = sp.exp(-R2 / 2) * sp.cos(T)
V = sp.exp(-R2 / 3) * sp.sin(T + X1 / 2)
PROBES = iq.ProbeSet(times=(0.5, 1.0, 2.0), n_space=16)
GRIDS = (GridSpec.box(10.0, 32), GridSpec.box(10.0, 48))


@pytest.mark.parametrize("name, second", [
    (iq.Inequality.PARTIAL_DECAY, None),
    (iq.Inequality.Q0_BOUND, V),
    (iq.Inequality.HESSIAN_EXTRA, None),
])
def test_pointwise_inequalities_have_finite_constants(name, second):
    m = iq.inequality_margin(name, U, second, PROBES)
    assert np.isfinite(m.constant) and m.constant > 0
    assert m.to_json()["probes"] == m.probes.shape[0]


def test_grid_based_constant_is_refinement_stable():
    a, b, ok = iq.refinement_check(iq.Inequality.STANDARD_SOBOLEV, U, probes=PROBES, grids=GRIDS)
    assert ok
    assert b.constant == pytest.approx(a.constant, rel=1e-3)


def test_cone_restriction_drops_early_times():
    P = iq.ProbeSet(times=(0.1, 2.0), n_space=8, r_min=0.25).points((0.5, 0.0))
    assert set(P[:, 0]) == {2.0}
    r = np.linalg.norm(P[:, 1:], axis=1)
    assert np.all(r <= 1.0 + 1e-12)


def test_dirac_decay_needs_four_components():
    with pytest.raises(ValueError, match="four"):
        iq.inequality_margin(iq.Inequality.DIRAC_DECAY, [U, U], probes=PROBES)


def test_stability_rule():
    mk = lambda c: iq.InequalityMargin(iq.Inequality.HOMO_L2, np.zeros((1, 4)), np.array([c]), np.array([1.0]))
    assert mk(1.0).stable_with(mk(1.9))
    assert not mk(1.0).stable_with(mk(2.1))
    assert not mk(np.inf).stable_with(mk(1.0))
