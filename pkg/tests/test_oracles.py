import math

import numpy as np
import pytest
import sympy as sp

from kgzlab import oracles as orc
from kgzlab.grid import GridSpec


def test_fd_derivative_of_sine():
    val, err = orc.fd_derivative(math.sin, 0.3, order=2)
    assert val == pytest.approx(-math.sin(0.3), abs=1e-9) and err < 1e-8


def test_fd_derivative_mixed():
    f = lambda x: math.exp(x[0]) * math.cos(x[1])
    val, _ = orc.fd_derivative(f, [0.2, 0.4], direction=(0, 1))
    assert val == pytest.approx(-math.exp(0.2) * math.sin(0.4), abs=1e-9)


def test_fd_derivative_reports_non_convergence():
    with pytest.raises(orc.OracleError):
        orc.fd_derivative(lambda x: math.sin(1.0 / x), 0.05, h0=0.01, levels=3, tol=1e-10)


def test_quadrature_and_radial_integral():
    assert orc.quadrature_oracle(math.exp, 0.0, 1.0)[0] == pytest.approx(math.e - 1, rel=1e-13)
    assert orc.radial_integral_oracle(lambda r: math.exp(-r * r), 20.0) == pytest.approx(math.pi**1.5, rel=1e-12)


def test_sphere_mean_of_harmonic_function_is_centre_value():
    f = lambda x, y, z: x * x - y * y + 3 * z
    assert orc.sphere_mean_oracle(f, (1.0, 2.0, 0.5), 1.7) == pytest.approx(1.0 - 4.0 + 1.5, abs=1e-10)


def test_ode_oracle_oscillator():
    y = orc.ode_oracle(lambda t, y: [y[1], -y[0]], [1.0, 0.0], 5.0, t_eval=[2.0, 5.0])
    assert np.allclose(y[:, 0], np.cos([2.0, 5.0]), atol=1e-11)


def test_matrix_oracle_binds_names():
    m = orc.matrix_oracle("P*P - 2*P", P=orc.matrix_oracle("I - w*g0*g1", w=1))
    assert m == sp.zeros(4)
    with pytest.raises(ValueError):
        orc.OracleConfig(levels=((0.5, 0.1), (0.5, 0.05)))


def test_reference_integrator_fourth_order_in_space():
    errs = []
    for n in (12, 24):
        grid = GridSpec.box(math.pi, n)
        x = grid.mesh()[0] + 0 * grid.mesh()[1] + 0 * grid.mesh()[2]
        k = 1.0
        out = orc.explicit_reference_integrator("kg", {"u": np.cos(k * x), "u_t": 0 * x}, grid, 0.01, 1.0)
        w = math.sqrt(k * k + 1)
        errs.append(np.abs(out[-1][1]["u"] - math.cos(w) * np.cos(k * x)).max())
    assert math.log(errs[0] / errs[1]) / math.log(2.0) > 3.5


def test_reference_integrator_guards():
    with pytest.raises(orc.OracleError, match="CFL"):
        orc.explicit_reference_integrator("wave", {"u": np.zeros((8,) * 3), "u_t": np.zeros((8,) * 3)},
                                          GridSpec.box(2.0, 8), 0.4, 1.0)
    with pytest.raises(ValueError, match="limited"):
        orc.explicit_reference_integrator("wave", {}, GridSpec.box(2.0, 64), 0.01, 1.0)
