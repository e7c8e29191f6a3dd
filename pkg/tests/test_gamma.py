import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from kgzlab import gamma as gm
from kgzlab.oracles import matrix_oracle, oracle_gammas


def test_standard_matrices_match_exact_representation():
    ex = oracle_gammas()
    for mu in range(4):
        assert np.array_equal(gm.STANDARD[mu], np.array(ex[f"g{mu}"], dtype=complex))


def test_clifford_relations_exact():
    for mu in range(4):
        for nu in range(4):
            m = matrix_oracle(f"g{mu}*g{nu} + g{nu}*g{mu}")
            eta = -1 if mu == nu == 0 else (1 if mu == nu else 0)
            assert m == -2 * eta * sp.eye(4)
    assert gm.clifford_residual() == 0.0


def test_projector_exact_on_axis():
    P = matrix_oracle("I - g0*g3")
    assert matrix_oracle("P*P - 2*P", P=P) == sp.zeros(4)


def test_clifford_invariant_under_unitary_change(rng):
    g = gm.STANDARD.conjugated(gm.random_unitary(rng))
    assert gm.clifford_residual(g) < 1e-14


def unit(v):
    return v / np.linalg.norm(v)


vec3 = arrays(float, 3, elements=st.floats(-1, 1)).filter(lambda v: np.linalg.norm(v) > 1e-3)
spinor = arrays(float, 8, elements=st.floats(-1, 1)).map(lambda a: a[:4] + 1j * a[4:])


@settings(max_examples=200)
@given(spinor, spinor, vec3)
def test_bilinear_decomposition(p1, p2, w):
    assert gm.bilinear_decomposition_residual(p1, p2, unit(w)) < 1e-13


@given(vec3)
def test_projector_relation(w):
    assert gm.projector_residual(unit(w)) < 1e-13


@given(spinor, vec3)
def test_projections_add_up(p, w):
    plus, minus = gm.project_pm(p, unit(w))
    assert np.allclose(plus + minus, 2 * p)


def test_rejects_non_unit_direction():
    with pytest.raises(ValueError, match="unit"):
        gm.project_pm(np.ones(4), [1.0, 1.0, 0.0])


@given(vec3, st.floats(0, 3))
def test_dirac_symbol_squares_to_energy(k, m):
    D = gm.dirac_symbol(k, mass=m)
    assert np.allclose(D @ D, (k @ k + m * m) * np.eye(4), atol=1e-12)
