import pytest
from hypothesis import given, strategies as st

from kgzlab import config as C
from kgzlab.config import ConfigError

BASE = """
system.kind = kgz
grid.kind = periodic-box-3d
grid.extent = 12
grid.points = 32
integrator.dt = 0.1
integrator.t_end = 1
data.sigma_kg = 1.5
data.sigma_wave = 1.5
"""


def cfg(**extra):
    return C.from_mapping(C.parse_text(BASE) | extra)


def bad(key, **extra):
    with pytest.raises(ConfigError) as e:
        cfg(**extra)
    assert e.value.key == key
    return str(e.value)


def test_defaults_and_typed_access():
    c = cfg()
    assert c.system == "kgz" and c.grid.points == 32
    assert c.integrator.dt == 0.1 and c["data.center"] == (0.0, 0.0, 0.0)
    assert isinstance(c.diagnostics, tuple)


def test_comments_and_whitespace():
    c = C.loads(BASE + "   # a comment\n\nseed = 7   # trailing\n")
    assert c.seed == 7


def test_unknown_and_duplicate_keys():
    with pytest.raises(ConfigError, match="unknown key"):
        C.loads(BASE + "grid.spacing = 1\n")
    with pytest.raises(ConfigError, match="set twice"):
        C.loads(BASE + "seed = 1\nseed = 2\n")
    with pytest.raises(ConfigError, match="key = value"):
        C.loads(BASE + "just words\n")


@pytest.mark.parametrize("key, extra", [
    ("integrator.dt", {"integrator.dt": "-0.1"}),
    ("integrator.t_end", {"integrator.t_end": "1.05"}),
    ("integrator.dt", {"integrator.scheme": "rk4-mol", "integrator.dt": "0.5", "integrator.t_end": "1"}),
    ("grid.points", {"grid.points": "31"}),
    ("system.kind", {"system.kind": "maxwell"}),
    ("data.path", {"data.family": "from-file", "data.path": "/nonexistent"}),
    ("grid.kind", {"system.kind": "dkg", "grid.kind": "radial-line-1d", "grid.points": "64"}),
    ("diagnostics.list", {"diagnostics.list": "transforms"}),
    ("diagnostics.list", {"diagnostics.list": "ghost"}),
    ("diagnostics.decay.window", {"diagnostics.list": "decay", "diagnostics.decay.window": "0.5, 1"}),
    ("diagnostics.scattering.k_max", {"diagnostics.list": "scattering", "integrator.t_end": "4"}),
    ("output.checkpoints", {"output.checkpoints": "2"}),
    ("data.eps", {"data.eps": "-1"}),
])
def test_each_error_names_its_key(key, extra):
    bad(key, **extra)


def test_window_must_stay_clear_of_images():
    msg = bad("diagnostics.decay.window", **{"diagnostics.list": "decay", "integrator.t_end": "10",
                                             "diagnostics.decay.window": "1, 10"})
    assert "uncontaminated" in msg


def test_zero_amplitudes_allowed():
    assert cfg(**{"data.eps": "0", "data.k0": "0"})["data.eps"] == 0.0


def test_canonical_text_round_trips_and_hashes():
    c = cfg(seed="3")
    again = C.loads(c.to_text())
    assert again.to_text() == c.to_text() and again.hash() == c.hash()
    assert c.with_overrides(seed="4").hash() != c.hash()


@given(st.integers(0, 2**31 - 1))
def test_seed_changes_hash_only_through_seed(seed):
    a, b = cfg(seed=str(seed)), cfg(seed=str(seed))
    assert a.hash() == b.hash()


def test_presets_load_and_validate():
    names = C.preset_names()
    assert {"kgz-small", "linear-conservation", "ghost-radial", "dkg-transforms", "kgz-radial-decay",
            "dkg-decay", "hypotheses", "integrator-crosscheck"} <= set(names)
    for name in names:
        C.load_preset(name)
    with pytest.raises(ConfigError, match="no preset"):
        C.load_preset("nope")


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError) as e:
        C.load(tmp_path / "absent.cfg")
    assert e.value.key == "--config"
