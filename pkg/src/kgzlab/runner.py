"""Config-driven runs: build data, evolve, sample diagnostics, write artifacts.

Artifacts in the output directory:

    manifest.json     config hash, code version, seed, wall-clock per phase, verdicts
    config.txt        the canonical configuration
    energy.csv        one EnergyReport row every ``output.energy_every`` steps
    decay_<name>.csv  sampled decay series, and decay_<name>.json with the fit
    scattering.csv    pull-back distances per component and dyadic pair
    transforms.csv    DKG identity residuals
    hypotheses.json   the data-hypothesis report
    diagnostics.json  every record and verdict in one document
    checkpoints/      state snapshots at the configured times

Everything except manifest.json is a deterministic function of the config.
"""
from __future__ import annotations

import csv
import io
import json
import math
import time
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, ExperimentConfig
from .data import certify, make_data
from .diagnostics import SCHEMA_VERSION, Observable, Summary, component_norm, decay_fit, dyadic_pairs, scattering_residual
from .energy import EnergyTracker, GhostIdentity, ghost_dirac_densities, ghost_kg_densities, reports_to_csv
from .grid import GridKind, GridSpec, ScalarField, SpinorField, integrate, japanese
from .grid import save as save_field
from .hypotheses import hypothesis_check
from .propagators import PropagatorKind, dirac_evolve, scalar_evolve
from .systems import BlowUpError, DKGState, KGZState, evolve, radial_group, reconstruct, save_checkpoint, transform_residuals

EXIT_OK = 0
EXIT_VERDICT = 1
EXIT_CONFIG = 2
EXIT_BLOWUP = 3


@dataclass
class RunManifest:
    config_hash: str
    code_version: str
    seed: int
    phases: dict[str, float] = field(default_factory=dict)
    verdicts: dict[str, bool] = field(default_factory=dict)
    exit_code: int = EXIT_OK
    blowup_time: float | None = None

    def to_json(self) -> str:
        doc = {
            "schema": "kgzlab.manifest/1",
            "config_hash": self.config_hash,
            "code_version": self.code_version,
            "seed": self.seed,
            "wall_clock_seconds": self.phases,
            "verdicts": self.verdicts,
            "exit_code": self.exit_code,
            "blowup_time": self.blowup_time,
        }
        return json.dumps(doc, indent=2, sort_keys=True)


@dataclass
class RunResult:
    manifest: RunManifest
    summary: Summary
    energy: list = field(default_factory=list)
    decay: dict = field(default_factory=dict)
    scattering: dict = field(default_factory=dict)
    transforms: dict = field(default_factory=dict)
    hypotheses: object = None
    final_state: object = None

    @property
    def exit_code(self) -> int:
        return self.manifest.exit_code


class _Phases:
    def __init__(self):
        self.seconds: dict[str, float] = {}

    def __call__(self, name: str):
        phases = self

        class _Timer:
            def __enter__(self):
                self.t0 = time.perf_counter()

            def __exit__(self, *exc):
                phases.seconds[name] = phases.seconds.get(name, 0.0) + time.perf_counter() - self.t0

        return _Timer()


# ---------------------------------------------------------------- linear-only states


@dataclass(frozen=True)
class LinearState:
    """Free evolution sample; scalar kinds carry (u, u_t), Dirac carries psi."""

    grid: GridSpec
    t: float
    u: np.ndarray | None = None
    u_t: np.ndarray | None = None
    psi: np.ndarray | None = None


def _linear_initial(cfg: ExperimentConfig, grid: GridSpec) -> LinearState:
    """Wave runs take (n0, n1), Klein-Gordon runs (E0, E1) first component, Dirac runs psi0."""
    kind = PropagatorKind(cfg["linear.kind"])
    family, params = cfg["data.family"], cfg.data_parameters()
    if kind is PropagatorKind.DIRAC:
        st = make_data(family, params, grid, "dkg").state(grid)
        return LinearState(grid, 0.0, psi=st.psi.values)
    st = make_data(family, params, grid, "kgz").state(grid)
    if kind is PropagatorKind.WAVE:
        return LinearState(grid, 0.0, st.n0.values, st.n0_t.values)
    return LinearState(grid, 0.0, st.E.values[0], st.E_t.values[0])


def _linear_trajectory(init: LinearState, kind: PropagatorKind, dt: float, t_end: float, mass: float, callback):
    """Exact free samples at t_n = n dt, each computed from the initial data."""
    grid = init.grid
    nsteps = int(round(t_end / dt))
    m2 = 1.0 if kind is PropagatorKind.KLEIN_GORDON else 0.0
    r = grid.axis if grid.kind is GridKind.RADIAL else None
    state = init
    for n in range(nsteps + 1):
        t = n * dt
        if n:
            if kind is PropagatorKind.DIRAC:
                state = LinearState(grid, t, psi=dirac_evolve(init.psi, grid, t, mass=mass))
            elif r is None:
                u, ut = scalar_evolve(init.u, init.u_t, grid, t, m2)
                state = LinearState(grid, t, u, ut)
            else:
                w, wt = radial_group(grid.extent, grid.points, t, m2).evolve(r * init.u, r * init.u_t)
                state = LinearState(grid, t, w / r, wt / r)
            arrays = (state.psi,) if state.psi is not None else (state.u, state.u_t)
            if not all(np.all(np.isfinite(a)) for a in arrays):
                raise BlowUpError(t)
        callback(state)
    return state


# ---------------------------------------------------------------- observables


def _magnitude(values: np.ndarray, grid: GridSpec) -> np.ndarray:
    scalar_ndim = 3 if grid.kind is GridKind.BOX else 1
    a2 = np.abs(values) ** 2
    return np.sqrt(a2 if values.ndim == scalar_ndim else a2.sum(axis=0))


def _decay_fields(state) -> dict[str, np.ndarray]:
    if isinstance(state, KGZState):
        E = state.E.values
        if state.grid.kind is GridKind.RADIAL:
            E = E[0]
        return {"E": E, "n": reconstruct(state)[0].values}
    if isinstance(state, DKGState):
        return {"v": reconstruct(state)[0].values, "psi": state.psi.values}
    return {"u": state.psi if state.psi is not None else state.u}


def _weights(system: str) -> dict:
    """Weighted-sup statistics matching the expected pointwise rates."""
    if system == "kgz":
        return {"E": lambda t, r: japanese(t + r) ** 1.5,
                "n": lambda t, r: japanese(t + r) * japanese(t - r) ** 0.5}
    if system == "dkg":
        return {"v": lambda t, r: japanese(t + r) ** 1.5, "psi": lambda t, r: japanese(t + r)}
    return {}


def _scatter_components(state, system: str, cfg: ExperimentConfig) -> dict[str, tuple[PropagatorKind, object]]:
    radial = state.grid.kind is GridKind.RADIAL
    if isinstance(state, KGZState):
        E, Et = state.E.values, state.E_t.values
        if radial:
            E, Et = E[0], Et[0]
        n, nt = reconstruct(state)
        return {"E": (PropagatorKind.KLEIN_GORDON, (E, Et)), "n": (PropagatorKind.WAVE, (n.values, nt.values))}
    if isinstance(state, DKGState):
        v, vt = reconstruct(state)
        return {"psi": (PropagatorKind.DIRAC, state.psi.values),
                "v": (PropagatorKind.KLEIN_GORDON, (v.values, vt.values))}
    kind = PropagatorKind(cfg["linear.kind"])
    return {"u": (kind, state.psi if kind is PropagatorKind.DIRAC else (state.u, state.u_t))}


def _save_linear(state: LinearState, directory: Path) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    if state.psi is not None:
        save_field(SpinorField(state.grid, state.psi, state.t), directory / "psi.kgzf")
    else:
        save_field(ScalarField(state.grid, state.u, state.t), directory / "u.kgzf")
        save_field(ScalarField(state.grid, state.u_t, state.t), directory / "u_t.kgzf")
    comps = "psi" if state.psi is not None else "u,u_t"
    (directory / "manifest.txt").write_text(f"system=linear-only\nt={state.t!r}\ncomponents={comps}\n")


def _conserved(state: LinearState, kind: PropagatorKind) -> float:
    """Natural energy (scalars) or L^2 mass (Dirac); on the radial line the
    quadratic form of the operator generating the free group."""
    if kind is PropagatorKind.DIRAC:
        return component_norm(kind, state.grid, state.psi) ** 2
    return component_norm(kind, state.grid, (state.u, state.u_t)) ** 2


def _rel(a: float, b: float) -> float:
    if a == b:
        return 0.0
    return abs(a - b) / abs(b) if b else math.inf


def _csv(rows, header) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _ckpt_name(t: float) -> str:
    return f"t={t:.6f}"


# ---------------------------------------------------------------- run


class _Sampler:
    """Callback seeing every state; keeps only what the diagnostics need."""

    def __init__(self, cfg: ExperimentConfig, out: Path | None):
        self.cfg = cfg
        self.out = out
        self.dt = cfg["integrator.dt"]
        self.diags = set(cfg.diagnostics)
        self.tracker = EnergyTracker()
        self.reports = []
        self.series: dict[str, list[tuple[float, float, float]]] = {}
        self.snapshots: dict[str, dict[float, object]] = {}
        self.scatter_times = ()
        if "scattering" in self.diags:
            pairs = dyadic_pairs(cfg["diagnostics.scattering.k_min"], cfg["diagnostics.scattering.k_max"])
            self.scatter_times = tuple(sorted({t for p in pairs for t in p}))
        self.transform_steps = {self._step(t) for t in cfg["diagnostics.transforms.times"]}
        self.transforms: dict[float, dict[str, float]] = {}
        self.bracket: deque = deque(maxlen=5)
        self.checkpoint_steps = {self._step(t) for t in cfg["output.checkpoints"]}
        self.ghost = GhostIdentity()
        self.conserved: list[tuple[float, float]] = []
        self.weights = _weights(cfg.system)
        self.decay_every = max(1, int(round(cfg["diagnostics.decay.every"] / self.dt)))
        self.linear_kind = PropagatorKind(cfg["linear.kind"]) if cfg.system == "linear-only" else None

    def _step(self, t: float) -> int:
        return int(round(t / self.dt))

    def __call__(self, state) -> None:
        n = self._step(state.t)
        if "energy" in self.diags or "ghost" in self.diags:
            if n % self.cfg["output.energy_every"] == 0:
                self._energy(state)
        if "decay" in self.diags and n % self.decay_every == 0 and state.t > 0:
            self._decay(state)
        if any(abs(state.t - t) < 1e-9 * max(1.0, t) for t in self.scatter_times):
            for name, (kind, data) in _scatter_components(state, self.cfg.system, self.cfg).items():
                self.snapshots.setdefault(name, {})[float(round(state.t / self.dt) * self.dt)] = (kind, data)
        if self.transform_steps:
            self.bracket.append(state)
            if n - 2 in self.transform_steps and len(self.bracket) == 5:
                self.transforms[(n - 2) * self.dt] = transform_residuals(list(self.bracket))
        if n in self.checkpoint_steps and self.out is not None:
            d = self.out / "checkpoints" / _ckpt_name(state.t)
            if isinstance(state, LinearState):
                _save_linear(state, d)
            else:
                save_checkpoint(state, d, self.cfg.integrator)

    def _energy(self, state) -> None:
        if not isinstance(state, LinearState):
            self.reports.append(self.tracker.report(state))
            return
        kind, grid, t = self.linear_kind, state.grid, state.t
        if kind is PropagatorKind.DIRAC:
            rep = self.tracker.report_linear(t, grid, psi=state.psi)
            s_eq, d_eq, _, _ = ghost_dirac_densities(state.psi, grid, t, self.tracker.delta)
        else:
            m2 = 1.0 if kind is PropagatorKind.KLEIN_GORDON else 0.0
            rep = self.tracker.report_linear(t, grid, state.u, state.u_t, m2)
            s_eq, d_eq, _, _ = ghost_kg_densities(state.u, state.u_t, grid, t, self.tracker.delta, m2)
        self.reports.append(rep)
        self.ghost.add(t, integrate(grid, s_eq), integrate(grid, d_eq))
        self.conserved.append((t, _conserved(state, kind)))

    def _decay(self, state) -> None:
        r = state.grid.radius()
        for name, values in _decay_fields(state).items():
            mag = _magnitude(values, state.grid)
            w = self.weights.get(name)
            weighted = float(np.max(mag * w(state.t, r))) if w is not None else math.nan
            self.series.setdefault(name, []).append((state.t, float(np.max(mag)), weighted))


def _initial_state(cfg: ExperimentConfig, grid: GridSpec, data):
    if cfg.system == "linear-only":
        return _linear_initial(cfg, grid)
    return data.state(grid)


def run(cfg: ExperimentConfig, out: str | Path | None = None) -> RunResult:
    """Execute one configured run. ``out`` overrides ``output.dir``; None with
    no directory configured keeps everything in memory."""
    phases = _Phases()
    out = Path(out) if out is not None else cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    grid, icfg = cfg.grid, cfg.integrator
    summary = Summary()
    manifest = RunManifest(cfg.hash(), __version__, cfg.seed)
    result = RunResult(manifest, summary)

    with phases("data"):
        data = None
        if cfg.system != "linear-only":
            data = make_data(cfg["data.family"], cfg.data_parameters(), grid, cfg.system)
        state = _initial_state(cfg, grid, data)

    diags = set(cfg.diagnostics)
    if "positivity" in diags:
        with phases("positivity"):
            verdict = certify(data, grid)
            summary.add({"schema": SCHEMA_VERSION, "kind": "positivity", "certified": verdict.certified,
                         "margin": verdict.margin, "witness": verdict.witness}, "positivity", verdict.certified)
    if "hypotheses" in diags:
        with phases("hypotheses"):
            rep = hypothesis_check(data, cfg["diagnostics.hypotheses.K0"], cfg["diagnostics.hypotheses.epsilon"],
                                   cfg["diagnostics.hypotheses.N"], cfg["diagnostics.hypotheses.C_KS"])
            result.hypotheses = rep
            summary.add(rep.to_json(), "hypotheses", rep.passed)
            (out / "hypotheses.json").write_text(json.dumps(rep.to_json(), indent=2, sort_keys=True))

    for t in cfg["diagnostics.transforms.times"]:
        n = round(t / icfg.dt)
        if n < 2 or (n + 2) * icfg.dt > cfg["integrator.t_end"] + 1e-12:
            raise ConfigError("diagnostics.transforms.times", f"t = {t} needs two steps on each side inside [0, t_end]")

    sampler = _Sampler(cfg, out)
    t_end = cfg["integrator.t_end"]
    with phases("evolve"):
        try:
            if cfg.system == "linear-only":
                final = _linear_trajectory(state, sampler.linear_kind, icfg.dt, t_end, icfg.dirac_mass, sampler)
            else:
                icfg.validate(grid)
                final = evolve(state, icfg, t_end, sampler)
        except BlowUpError as e:
            manifest.exit_code = EXIT_BLOWUP
            manifest.blowup_time = e.t
            final = None
    result.final_state = final
    result.energy = sampler.reports

    with phases("diagnostics"):
        if final is not None:
            _diagnostics(cfg, grid, sampler, result)

    with phases("write"):
        _write(cfg, out, sampler, result)
    manifest.phases = {k: round(v, 6) for k, v in phases.seconds.items()}
    manifest.verdicts = dict(summary.verdicts)
    if manifest.exit_code == EXIT_OK and not summary.passed:
        manifest.exit_code = EXIT_VERDICT
    (out / "manifest.json").write_text(manifest.to_json())
    return result


def _diagnostics(cfg: ExperimentConfig, grid: GridSpec, sampler: _Sampler, result: RunResult) -> None:
    summary = result.summary
    diags = set(cfg.diagnostics)
    if sampler.conserved and "energy" in diags:
        e0 = sampler.conserved[0][1]
        drift = max(_rel(e, e0) for _, e in sampler.conserved)
        tol = cfg["diagnostics.energy.tol"]
        summary.add({"schema": SCHEMA_VERSION, "kind": "conservation", "initial": e0, "max_relative_drift": drift,
                     "tol": tol}, "energy", drift <= tol)
    if sampler.conserved and "ghost" in diags:
        drift = sampler.ghost.relative_drift
        tol = cfg["diagnostics.energy.ghost_tol"]
        summary.add({"schema": SCHEMA_VERSION, "kind": "ghost-identity", "relative_drift": drift, "tol": tol},
                    "ghost", drift <= tol)
    if "decay" in diags:
        window = tuple(cfg["diagnostics.decay.window"])
        max_ratio = cfg["diagnostics.decay.max_ratio"]
        for name, rows in sampler.series.items():
            arr = np.array(rows)
            fit = decay_fit((arr[:, 0], arr[:, 1]), Observable.SUP_FIELD, window=window, name=name)
            result.decay[name] = fit
            summary.add(fit.to_json())
            if not np.isnan(arr[0, 2]):
                wfit = decay_fit((arr[:, 0], arr[:, 2]), Observable.WEIGHTED_SUP, window=window, name=f"{name}-weighted")
                result.decay[wfit.name] = wfit
                rec = wfit.to_json() | {"max_ratio": max_ratio}
                summary.add(rec, f"decay.{name}", wfit.bounded(max_ratio))
    if "scattering" in diags:
        pairs = dyadic_pairs(cfg["diagnostics.scattering.k_min"], cfg["diagnostics.scattering.k_max"])
        for name, snaps in sampler.snapshots.items():
            kind = next(iter(snaps.values()))[0]
            traj = {t: d for t, (_, d) in snaps.items()}
            mass = cfg["integrator.dirac_mass"] if kind is PropagatorKind.DIRAC else 0.0
            res = scattering_residual(traj, kind, pairs, grid, mass=mass)
            result.scattering[name] = res
            summary.add(res.to_json() | {"name": name}, f"scattering.{name}", res.decreasing)
    if sampler.transforms:
        tol = cfg["diagnostics.transforms.tol"]
        result.transforms = sampler.transforms
        worst = max(v for res in sampler.transforms.values() for v in res.values())
        summary.add({"schema": SCHEMA_VERSION, "kind": "transforms", "residuals": sampler.transforms,
                     "tol": tol}, "transforms", worst <= tol)


def _write(cfg: ExperimentConfig, out: Path, sampler: _Sampler, result: RunResult) -> None:
    (out / "config.txt").write_text(cfg.to_text())
    if sampler.reports:
        reports_to_csv(sampler.reports, out / "energy.csv")
    for name, fit in result.decay.items():
        (out / f"decay_{name}.csv").write_text(fit.to_csv())
        (out / f"decay_{name}.json").write_text(json.dumps(fit.to_json(), indent=2, sort_keys=True))
    if result.scattering:
        rows = [(name, repr(a), repr(b), repr(d)) for name, res in result.scattering.items()
                for (a, b), d in zip(res.pairs, res.distances)]
        (out / "scattering.csv").write_text(_csv(rows, ("component", "t1", "t2", "distance")))
    if result.transforms:
        rows = [(repr(t), k, repr(v)) for t, res in sorted(result.transforms.items()) for k, v in res.items()]
        (out / "transforms.csv").write_text(_csv(rows, ("t", "identity", "residual")))
    (out / "diagnostics.json").write_text(result.summary.to_json())
