"""Experiment configuration: flat ``dotted.key = value`` text.

One assignment per line; ``#`` starts a comment; lists are comma-separated.
Every key, its type and default are listed in :data:`KEYS`. Validation errors
name the offending key.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Callable, Mapping

from .data import Family
from .grid import GridKind, GridSpec
from .propagators import PropagatorKind
from .systems import IntegratorConfig, Scheme


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


SYSTEMS = ("kgz", "dkg", "linear-only")
DIAGNOSTICS = ("energy", "ghost", "decay", "scattering", "hypotheses", "transforms", "positivity")


# ---------------------------------------------------------------- value parsers


def _float(s: str) -> float:
    v = float(s)
    if not math.isfinite(v):
        raise ValueError("must be finite")
    return v


def _int(s: str) -> int:
    return int(s)


def _bool(s: str) -> bool:
    low = s.lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"expected true or false, got {s!r}")


def _str(s: str) -> str:
    return s


def _floats(s: str) -> tuple[float, ...]:
    return tuple(_float(x) for x in s.split(",") if x.strip()) if s.strip() else ()


def _ints(s: str) -> tuple[int, ...]:
    return tuple(int(x) for x in s.split(",") if x.strip())


def _names(s: str) -> tuple[str, ...]:
    return tuple(x.strip() for x in s.split(",") if x.strip())


def _enum(*values: str) -> Callable[[str], str]:
    def parse(s: str) -> str:
        if s not in values:
            raise ValueError(f"expected one of {', '.join(values)}, got {s!r}")
        return s

    return parse


def _fmt(v: Any) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        return ", ".join(_fmt(x) for x in v)
    return "" if v is None else str(v)


@dataclass(frozen=True)
class Key:
    parse: Callable[[str], Any]
    default: Any
    doc: str


KEYS: dict[str, Key] = {
    "system.kind": Key(_enum(*SYSTEMS), None, "kgz, dkg or linear-only (required)"),
    "linear.kind": Key(_enum(*(k.value for k in PropagatorKind)), PropagatorKind.KLEIN_GORDON.value,
                       "free equation for linear-only runs"),
    "grid.kind": Key(_enum(*(k.value for k in GridKind)), GridKind.BOX.value, "periodic box or radial line"),
    "grid.extent": Key(_float, 16.0, "half-width L"),
    "grid.points": Key(_int, 64, "nodes per axis (box) or across [-L, L] (radial)"),
    "integrator.dt": Key(_float, 0.05, "time step"),
    "integrator.scheme": Key(_enum(*(s.value for s in Scheme)), Scheme.STRANG.value, "time integrator"),
    "integrator.dealias": Key(_bool, True, "2/3-rule filter on nonlinear increments"),
    "integrator.dirac_mass": Key(_float, 0.0, "0 or 1"),
    "integrator.t_end": Key(_float, 1.0, "final time, a multiple of dt"),
    "data.family": Key(_enum(*(f.value for f in Family)), Family.GAUSSIAN_BUMP.value, "initial data family"),
    "data.eps": Key(_float, 0.01, "amplitude of the Klein-Gordon/Dirac data"),
    "data.k0": Key(_float, 1.0, "amplitude of the wave data"),
    "data.sigma_kg": Key(_float, 1.0, "width of the Klein-Gordon/Dirac bump"),
    "data.sigma_wave": Key(_float, 1.0, "width of the wave bump"),
    "data.center": Key(_floats, (0.0, 0.0, 0.0), "bump centre"),
    "data.e1_ratio": Key(_float, 0.3, "time derivative as a multiple of the value"),
    "data.n1_ratio": Key(_float, 0.5, "n1 as a multiple of n0 (gaussian-bump)"),
    "data.margin": Key(_float, 0.1, "positivity margin (certified-positive-pair)"),
    "data.mode": Key(_ints, (1, 0, 0), "plane-mode wave vector in units of pi/L"),
    "data.path": Key(_str, None, "checkpoint directory (from-file)"),
    "data.radius": Key(_float, None, "support radius; defaults to 6 widths past the centre"),
    "diagnostics.list": Key(_names, ("energy",), "diagnostics to run: " + ", ".join(DIAGNOSTICS)),
    "diagnostics.energy.tol": Key(_float, 1e-10, "relative natural-energy drift (linear-only, box)"),
    "diagnostics.energy.ghost_tol": Key(_float, 1e-6, "relative ghost-identity drift (linear-only)"),
    "diagnostics.decay.window": Key(_floats, (1.0, 2.0), "fit window t_min, t_max"),
    "diagnostics.decay.every": Key(_float, 0.5, "time between decay samples"),
    "diagnostics.decay.max_ratio": Key(_float, 3.0, "bound on max/min of weighted sups"),
    "diagnostics.scattering.k_min": Key(_int, 2, "first dyadic pair (2^k, 2^(k+1))"),
    "diagnostics.scattering.k_max": Key(_int, 4, "last dyadic pair"),
    "diagnostics.hypotheses.K0": Key(_float, 1.0, "wave-data bound"),
    "diagnostics.hypotheses.epsilon": Key(_float, 0.1, "Klein-Gordon/Dirac data bound"),
    "diagnostics.hypotheses.N": Key(_int, 10, "regularity index"),
    "diagnostics.hypotheses.C_KS": Key(_float, 1.0, "Klainerman-Sobolev constant"),
    "diagnostics.transforms.times": Key(_floats, (), "times at which to evaluate the DKG identities"),
    "diagnostics.transforms.tol": Key(_float, 1e-2, "largest accepted residual"),
    "output.dir": Key(_str, "out", "output directory"),
    "output.energy_every": Key(_int, 1, "steps between energy rows"),
    "output.checkpoints": Key(_floats, (), "checkpoint times"),
    "seed": Key(_int, 0, "seed for randomized probe sets"),
}


# ---------------------------------------------------------------- parsing


def parse_text(text: str, source: str = "<config>") -> dict[str, str]:
    """Raw key -> value strings; rejects unknown and repeated keys."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ConfigError(f"{source}:{lineno}", "expected 'key = value'")
        if key not in KEYS:
            raise ConfigError(key, "unknown key")
        if key in out:
            raise ConfigError(key, f"set twice (line {lineno})")
        out[key] = value.strip()
    return out


def _typed(raw: Mapping[str, str]) -> dict[str, Any]:
    values = {k: spec.default for k, spec in KEYS.items()}
    for key, s in raw.items():
        if key not in KEYS:
            raise ConfigError(key, "unknown key")
        try:
            values[key] = KEYS[key].parse(s)
        except ValueError as e:
            raise ConfigError(key, str(e)) from None
    return values


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated configuration. ``values`` holds every key, defaults filled in."""

    values: Mapping[str, Any]

    def __getitem__(self, key: str) -> Any:
        return self.values[key]

    @property
    def system(self) -> str:
        return self.values["system.kind"]

    @property
    def grid(self) -> GridSpec:
        v = self.values
        return GridSpec(v["grid.kind"], v["grid.extent"], v["grid.points"])

    @property
    def integrator(self) -> IntegratorConfig:
        v = self.values
        return IntegratorConfig(v["integrator.dt"], v["integrator.scheme"], v["integrator.dealias"],
                                v["integrator.dirac_mass"])

    @property
    def diagnostics(self) -> tuple[str, ...]:
        return self.values["diagnostics.list"]

    @property
    def output_dir(self) -> Path:
        return Path(self.values["output.dir"])

    @property
    def seed(self) -> int:
        return self.values["seed"]

    def data_parameters(self) -> dict:
        v = self.values
        keys = ("eps", "k0", "sigma_kg", "sigma_wave", "center", "e1_ratio", "n1_ratio", "margin", "mode", "path")
        return {k: v[f"data.{k}"] for k in keys}

    @property
    def data_radius(self) -> float:
        v = self.values
        if v["data.radius"] is not None:
            return v["data.radius"]
        widest = max(v["data.sigma_kg"], v["data.sigma_wave"] * math.sqrt(2.0))
        return math.hypot(*v["data.center"]) + 6.0 * widest

    def to_text(self) -> str:
        """Canonical form: every key with a value, sorted, one per line."""
        return "".join(f"{k} = {_fmt(v)}\n" for k, v in sorted(self.values.items()) if v is not None)

    def hash(self) -> str:
        return hashlib.sha256(self.to_text().encode()).hexdigest()

    def with_overrides(self, **raw: str) -> "ExperimentConfig":
        merged = {k: _fmt(v) for k, v in self.values.items() if v is not None}
        merged.update(raw)
        return from_mapping(merged)


def _validate(v: dict[str, Any]) -> None:
    def need(key, ok, msg):
        if not ok:
            raise ConfigError(key, msg)

    need("system.kind", v["system.kind"] is not None, "required")
    for key in ("grid.extent", "integrator.dt", "integrator.t_end", "diagnostics.decay.every",
                "diagnostics.energy.tol", "diagnostics.energy.ghost_tol", "diagnostics.transforms.tol",
                "diagnostics.decay.max_ratio", "diagnostics.hypotheses.epsilon", "diagnostics.hypotheses.K0",
                "diagnostics.hypotheses.C_KS"):
        need(key, v[key] > 0, f"must be positive, got {v[key]}")
    for key in ("data.eps", "data.k0"):
        # zero is allowed so that zero data can be configured
        need(key, v[key] >= 0, f"the amplitude scale must be non-negative, got {v[key]}")
    for key in ("data.sigma_kg", "data.sigma_wave"):
        need(key, v[key] > 0, f"must be positive, got {v[key]}")
    need("data.margin", v["data.margin"] >= 0, "must be non-negative")
    need("data.center", len(v["data.center"]) == 3, "needs three coordinates")
    need("data.mode", len(v["data.mode"]) == 3, "needs three integers")
    need("output.energy_every", v["output.energy_every"] >= 1, "must be at least 1")
    need("integrator.dirac_mass", v["integrator.dirac_mass"] in (0.0, 1.0), "must be 0 or 1")
    try:
        grid = GridSpec(v["grid.kind"], v["grid.extent"], v["grid.points"])
    except ValueError as e:
        raise ConfigError("grid.points", str(e)) from None
    nsteps = v["integrator.t_end"] / v["integrator.dt"]
    need("integrator.t_end", abs(nsteps - round(nsteps)) < 1e-9 * max(1.0, nsteps),
         "must be a whole number of time steps")
    if v["integrator.scheme"] == Scheme.RK4.value:
        need("integrator.dt", v["integrator.dt"] <= 0.5 * grid.h + 1e-15,
             f"rk4-mol needs dt <= h/2 = {0.5 * grid.h:.6g}")
    for name in v["diagnostics.list"]:
        need("diagnostics.list", name in DIAGNOSTICS, f"unknown diagnostic {name!r}")
    if v["data.family"] == Family.FROM_FILE.value:
        p = v["data.path"]
        need("data.path", p is not None and Path(p).exists(), f"referenced file {p!r} does not exist")
    system = v["system.kind"]
    if system == "dkg" or v["linear.kind"] == PropagatorKind.DIRAC.value and system == "linear-only":
        need("grid.kind", grid.kind is GridKind.BOX, "the Dirac equation runs on the periodic box")
    diags = v["diagnostics.list"]
    if "transforms" in diags:
        need("diagnostics.list", system == "dkg", "transforms apply to dkg runs")
    if "ghost" in diags:
        need("diagnostics.list", system == "linear-only", "the ghost identity is tracked for linear-only runs")
    if "hypotheses" in diags:
        need("diagnostics.list", system in ("kgz", "dkg"), "hypotheses apply to kgz and dkg data")
    if "positivity" in diags:
        need("diagnostics.list", system == "kgz" and grid.kind is GridKind.BOX,
             "the positivity certificate applies to kgz data on the box")
    if "decay" in diags:
        w = v["diagnostics.decay.window"]
        need("diagnostics.decay.window", len(w) == 2 and 0 < w[0] < w[1], "needs 0 < t_min < t_max")
        need("diagnostics.decay.window", w[1] <= v["integrator.t_end"] + 1e-12, "ends after integrator.t_end")
        radius = ExperimentConfig(v).data_radius
        need("diagnostics.decay.window", w[1] <= grid.extent - radius,
             f"t_max = {w[1]} leaves the uncontaminated region L - R = {grid.extent - radius:.6g}")
    if "scattering" in diags:
        k0, k1 = v["diagnostics.scattering.k_min"], v["diagnostics.scattering.k_max"]
        need("diagnostics.scattering.k_max", 0 <= k0 <= k1, "needs 0 <= k_min <= k_max")
        need("diagnostics.scattering.k_max", 2 ** (k1 + 1) <= v["integrator.t_end"] + 1e-12,
             "the last pair ends after integrator.t_end")
    for t in v["output.checkpoints"] + v["diagnostics.transforms.times"]:
        need("output.checkpoints" if t in v["output.checkpoints"] else "diagnostics.transforms.times",
             0 <= t <= v["integrator.t_end"], f"time {t} lies outside [0, t_end]")


def from_mapping(raw: Mapping[str, str]) -> ExperimentConfig:
    values = _typed(raw)
    _validate(values)
    return ExperimentConfig(values)


def loads(text: str, source: str = "<config>") -> ExperimentConfig:
    return from_mapping(parse_text(text, source))


def load(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError("--config", f"file {path} does not exist")
    return loads(path.read_text(), str(path))


# ---------------------------------------------------------------- presets


def preset_names() -> list[str]:
    root = resources.files("kgzlab") / "presets"
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".cfg"))


def preset_text(name: str) -> str:
    f = resources.files("kgzlab") / "presets" / f"{name}.cfg"
    if not f.is_file():
        raise ConfigError("--preset", f"no preset named {name!r}; available: {', '.join(preset_names())}")
    return f.read_text()


def load_preset(name: str, **overrides: str) -> ExperimentConfig:
    raw = parse_text(preset_text(name), name)
    raw.update(overrides)
    return from_mapping(raw)
