import numpy as np
import pytest
from scipy.interpolate import CubicSpline

from kgzlab.data import Family, make_data
from kgzlab.grid import GridSpec, l2_norm
from kgzlab.spectral import laplacian
from kgzlab.oracles import explicit_reference_integrator
from kgzlab.systems import (BlowUpError, DKGState, IntegratorConfig, KGZState, Scheme, evolve,
                            load_checkpoint, reconstruct, save_checkpoint)

BOX = GridSpec.box(8.0, 32)


def kgz_state(grid=BOX, **p):
    params = {"eps": 0.2, "k0": 0.3, "sigma_kg": 1.5, "sigma_wave": 1.5} | p
    return make_data(Family.GAUSSIAN_BUMP, params, grid).state(grid)


def dkg_state(grid=BOX):
    return make_data(Family.GAUSSIAN_BUMP, {"eps": 0.3, "k0": 0.3, "sigma_kg": 1.5, "sigma_wave": 1.5},
                     grid, "dkg").state(grid)


def rel(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


def test_kgz_agrees_with_reference_integrator():
    s = kgz_state()
    out = evolve(s, IntegratorConfig(0.05), 1.0)
    n, nt = reconstruct(s)
    a = s.arrays()
    ref = explicit_reference_integrator(
        "kgz", dict(E=a["E"], E_t=a["E_t"], n0=n.values, n0_t=nt.values, n1=a["n1"], n1_t=a["n1_t"]),
        BOX, 0.025, 1.0)[-1][1]
    assert rel(out.E.values, ref["E"]) < 2e-3
    n_ref = ref["n0"] + laplacian(ref["n1"], BOX.wavenumbers())
    assert rel(reconstruct(out)[0].values, n_ref) < 2e-3


def test_dkg_agrees_with_reference_integrator():
    # the gap is the reference's 4th-order spatial error, so it must shrink with h
    cfg = IntegratorConfig(0.05, dirac_mass=1.0)
    gaps = []
    for grid in (BOX, GridSpec.box(8.0, 48)):
        s = dkg_state(grid)
        out = evolve(s, cfg, 1.0)
        a = s.arrays()
        ref = explicit_reference_integrator(
            "dkg", dict(psi=a["psi"], V0=a["V0"], V0_t=a["V0_t"], V1=a["V1"], V1_t=a["V1_t"]),
            grid, 0.025, 1.0, mass=1.0)[-1][1]
        gaps.append(rel(out.psi.values, ref["psi"]))
        assert rel(reconstruct(out)[0].values, ref["V0"] + ref["V1"]) < 2e-3
    assert gaps[0] < 5e-3
    assert np.log(gaps[0] / gaps[1]) / np.log(1.5) > 3.5


@pytest.mark.parametrize("make", [kgz_state, dkg_state])
def test_strang_converges_in_dt(make):
    s = make()
    cfgs = [IntegratorConfig(dt, dirac_mass=1.0) for dt in (0.2, 0.1, 0.05)]
    ends = [evolve(s, c, 2.0) for c in cfgs]
    key = "E" if isinstance(s, KGZState) else "psi"
    e1 = np.linalg.norm(ends[0].arrays()[key] - ends[1].arrays()[key])
    e2 = np.linalg.norm(ends[1].arrays()[key] - ends[2].arrays()[key])
    assert np.log2(e1 / e2) > 1.8


def test_rk4_matches_strang():
    s = kgz_state()
    a = evolve(s, IntegratorConfig(0.0625), 1.0)
    b = evolve(s, IntegratorConfig(0.0625, Scheme.RK4), 1.0)
    assert rel(a.E.values, b.E.values) < 1e-3


def test_radial_reduction_matches_box():
    box = GridSpec.box(16.0, 64)
    line = GridSpec.radial(16.0, 512)
    cfg = IntegratorConfig(0.05)
    a = evolve(kgz_state(box), cfg, 2.0)
    b = evolve(kgz_state(line), cfg, 2.0)
    r = box.radius()
    inside = r < 6
    e_line = CubicSpline(line.axis, b.E.values[0])(r[inside])
    assert np.abs(a.E.values[0][inside] - e_line).max() < 1e-4 * np.abs(e_line).max() + 1e-8
    n_box, n_line = reconstruct(a)[0].values, reconstruct(b)[0].values
    assert np.abs(n_box[inside] - CubicSpline(line.axis, n_line)(r[inside])).max() < 1e-4


def test_free_dirac_l2_conserved():
    s = dkg_state()
    s = DKGState.from_arrays(BOX, 0.0, **(s.arrays() | {"V0": 0 * s.V0.values, "V0_t": 0 * s.V0.values}))
    # zero wave data and tiny spinor: the quadratic source is negligible
    s = s.scaled(1e-6)
    out = evolve(s, IntegratorConfig(0.1), 2.0)
    assert l2_norm(out.psi) == pytest.approx(l2_norm(s.psi), rel=1e-12)


def test_blow_up_is_reported():
    # |E|^2 overflows in the first step
    s = kgz_state(eps=1e200)
    with pytest.raises(BlowUpError) as err:
        evolve(s, IntegratorConfig(0.1), 1.0)
    assert err.value.t == pytest.approx(0.1)


def test_config_checks():
    with pytest.raises(ValueError, match="positive"):
        IntegratorConfig(-0.1)
    with pytest.raises(ValueError, match="0.5 h"):
        IntegratorConfig(0.3, Scheme.RK4).validate(BOX)
    with pytest.raises(ValueError, match="multiple"):
        evolve(kgz_state(), IntegratorConfig(0.3), 1.0)


@pytest.mark.parametrize("make", [kgz_state, dkg_state])
def test_checkpoint_round_trip(tmp_path, make):
    s = evolve(make(), IntegratorConfig(0.1), 0.3)
    save_checkpoint(s, tmp_path / "ck", IntegratorConfig(0.1))
    back = load_checkpoint(tmp_path / "ck")
    assert type(back) is type(s) and back.t == pytest.approx(s.t)
    for k, v in s.arrays().items():
        assert np.array_equal(back.arrays()[k], v)
