import numpy as np
import pytest
import sympy as sp

from kgzlab import vectorfields as vfm
from kgzlab.grid import GridSpec
from kgzlab.inequalities import closed_form_jet
from kgzlab.oracles import fd_derivative
from kgzlab.vectorfields import T, X1, X2, X3, VF

U = sp.exp(-(X1**2 + X2**2 + X3**2) / 4) * sp.cos(T - X1 / 3)


@pytest.mark.parametrize("vf", [VF.DX2, VF.OMEGA12, VF.L1, VF.L0])
def test_jet_vector_field_matches_closed_form(vf):
    grid = GridSpec.box(10.0, 48)
    jet = closed_form_jet(U, grid, 1.2, order=2)
    got = jet.apply(vf).value
    exact = vfm.as_function(vfm.sym_vf(vf, U))(np.array(1.2), *grid.mesh())
    assert np.abs(got - exact).max() < 1e-8


def test_sym_vf_matches_finite_differences():
    f = vfm.as_function(U)
    g = vfm.as_function(vfm.sym_vf(VF.L2, U))
    p = np.array([0.7, 0.3, -0.4, 1.1])
    dt, _ = fd_derivative(lambda y: float(f(*(np.array(c) for c in y))), p, direction=0)
    dx2, _ = fd_derivative(lambda y: float(f(*(np.array(c) for c in y))), p, direction=2)
    assert float(g(*(np.array(c) for c in p))) == pytest.approx(p[0] * dx2 + p[2] * dt, abs=1e-9)


@pytest.mark.parametrize("vf", [VF.OMEGA23, VF.L3, VF.L0])
def test_commutator_converges(vf):
    c = vfm.commutator_residual(vf, U, h=0.2, levels=2)
    assert c.order >= 3.5


def test_dirac_commutators():
    probes = vfm.default_probes(8)
    phi = lambda t, a, b, c: [np.exp(-(a * a + b * b + c * c) / 2) * np.cos(t + k * a) for k in range(4)]
    for vf in (VF.DT, VF.DX1, VF.DX2, VF.DX3):
        assert vfm.dirac_commutator_residual_at(vf, phi, 0.2, probes) < 1e-13
    for vf in vfm.GAMMA_HAT[4:] + (VF.L0,):
        assert vfm.dirac_commutator_residual(vf, phi, probes=probes).order >= 3.5


def test_q0_leibniz_converges():
    v = sp.sin(X2 - T) * sp.exp(-X3**2 / 3)
    c = vfm.q0_leibniz_residual(VF.L1, U, v, h=0.2, levels=2)
    assert c.order >= 3.5
    with pytest.raises(ValueError):
        vfm.q0_leibniz_residual_at(VF.L0, U, v, 0.2, vfm.default_probes(4))


def test_convergence_floor_counts_as_exact():
    c = vfm.ConvergenceResult((0.2, 0.1), (1e-12, 1e-13))
    assert c.order == float("inf")


def test_multi_index_count():
    # ordered sequences are not needed, only multisets
    assert len(vfm.enumerate_multi_indices(11, 2)) == 1 + 11 + 66
