"""Self-contained check suites behind ``kgzlab identities``.

Each suite returns a :class:`SuiteResult` of named checks with a measured
value and the bound it is held to.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
import sympy as sp

from .closedform import Gaussian
from .data import Family, make_data
from .gamma import bilinear_decomposition_residual, clifford_residual, projector_residual, random_unit_vectors
from .grid import GridSpec, ScalarField
from .hypotheses import shipped_trials, sobolev_constant_estimate
from .propagators import ClosedFormData, PropagatorKind, WaveData, kirchhoff_eval, propagate
from .vectorfields import ALL_GAMMA_AND_L0, ConvergenceResult, T, X1, X2, X3, commutator_residual


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    bound: float
    passed: bool
    kind: str = "max"  # "max": value <= bound, "min": value >= bound

    def to_json(self) -> dict:
        return {"name": self.name, "value": self.value, "bound": self.bound, "kind": self.kind, "passed": self.passed}


def _at_most(name, value, bound):
    return Check(name, float(value), float(bound), bool(value <= bound), "max")


def _at_least(name, value, bound):
    return Check(name, float(value), float(bound), bool(value >= bound), "min")


@dataclass
class SuiteResult:
    name: str
    checks: list[Check] = field(default_factory=list)
    seconds: float = 0.0
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_json(self) -> dict:
        return {"suite": self.name, "passed": self.passed, "seconds": self.seconds,
                "checks": [c.to_json() for c in self.checks], "details": self.details}


# ---------------------------------------------------------------- algebra


def algebra_suite(samples: int = 10_000, seed: int = 0) -> SuiteResult:
    """Clifford relations, the bilinear null decomposition on random unit
    spinors, and P^2 = 2P on random directions."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    z = rng.normal(size=(2, samples, 4)) + 1j * rng.normal(size=(2, samples, 4))
    z /= np.linalg.norm(z, axis=-1, keepdims=True)
    omega = random_unit_vectors(rng, samples)
    bil = float(bilinear_decomposition_residual(z[0], z[1], omega).max())
    proj = max(projector_residual(w) for w in omega)
    res = SuiteResult("algebra", [
        _at_most("clifford", clifford_residual(), 1e-15),
        _at_most("bilinear-decomposition", bil, 1e-13),
        _at_most("projector", proj, 1e-13),
    ])
    res.seconds = time.perf_counter() - t0
    return res


# ---------------------------------------------------------------- commutators


def manufactured_functions() -> dict[str, sp.Expr]:
    r2 = X1**2 + X2**2 + X3**2
    return {
        "gauss": sp.exp(-r2 / 4) * sp.sin(T + X2 / 2),
        "mixed": sp.cos(X1 + 2 * X2 - X3 + T / 2) * (1 + sp.Rational(3, 10) * X3**2),
        "trig-poly": sp.sin(X1) * sp.cos(2 * T) + X2**2 * T,
    }


def commutator_suite(h: float = 0.2, min_order: float = 3.5) -> SuiteResult:
    """Discrete commutators [-Box, Gamma_k] u and [-Box, L0] u + 2 Box u at
    h, h/2, h/4; each must converge at ``min_order`` or sit at roundoff."""
    t0 = time.perf_counter()
    res = SuiteResult("commutators")
    for fname, u in manufactured_functions().items():
        for vf in ALL_GAMMA_AND_L0:
            c = commutator_residual(vf, u, h=h, levels=3)
            res.details[f"{fname}/{vf.value}"] = {"residuals": list(c.residuals), "orders": list(c.orders)}
            res.checks.append(_at_least(f"{fname}/{vf.value}", c.order, min_order))
    res.seconds = time.perf_counter() - t0
    return res


# ---------------------------------------------------------------- Kirchhoff


def kirchhoff_suite(probes: int = 10_000, times=(1.0, 5.0, 10.0), seed: int = 0) -> SuiteResult:
    """Kirchhoff positivity for a certified pair and agreement with the
    spectral free wave on smooth compact data."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    res = SuiteResult("kirchhoff")
    # h = 0.4 resolves the unit-width pair; the agreement check below runs at 64^3
    data = make_data(Family.CERTIFIED_PAIR, {"k0": 1.0, "sigma_wave": 1.0}, GridSpec.box(16.0, 80))
    cf = ClosedFormData(data.n0, lambda a, b, c: data.n0.gradient(a, b, c), data.n1)
    for t in times:
        # uniform points in the ball where the solution can be non-negligible
        radius = t + 8.0
        d = rng.normal(size=(probes, 3))
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        pts = d * radius * rng.random((probes, 1)) ** (1.0 / 3.0)
        vals = kirchhoff_eval(cf, t, pts, n_theta=96, n_phi=192, tol=1e-10)
        res.checks.append(_at_least(f"positivity/t={t:g}", float(vals.min()), -1e-10))

    grid = GridSpec.box(16.0, 64)
    s = 1.5
    g0 = Gaussian(1.0, s, (1.0, 0.0, 0.0))
    g1 = Gaussian(0.5, s, (0.0, -0.5, 0.0))
    cf = ClosedFormData(g0, lambda a, b, c: g0.gradient(a, b, c), g1)
    wd = WaveData(ScalarField(grid, g0(*grid.mesh())), ScalarField(grid, g1(*grid.mesh())))
    idx = rng.integers(0, grid.points, size=(400, 3))
    pts = grid.axis[idx]
    for t in (2.0, 4.0, 8.0):
        kv = kirchhoff_eval(cf, t, pts)
        sv = propagate(PropagatorKind.WAVE, wd, t).u0.values[idx[:, 0], idx[:, 1], idx[:, 2]]
        res.checks.append(_at_most(f"agreement/t={t:g}", float(np.abs(kv - sv).max()), 1e-6))
    res.seconds = time.perf_counter() - t0
    return res


# ---------------------------------------------------------------- Sobolev constant


def sobolev_suite(points=(64, 80), extent: float = 12.0, max_change: float = 0.05) -> SuiteResult:
    """Lower bound for the Klainerman-Sobolev constant on the shipped trials:
    positive, monotone in the trial-family prefix, stable under refinement."""
    t0 = time.perf_counter()
    trials = shipped_trials()
    est = [sobolev_constant_estimate(trials, GridSpec.box(extent, n)) for n in points]
    coarse, fine = est
    prefix = [max(coarse.ratios[:k]) for k in range(1, len(trials) + 1)]
    monotone = all(b >= a for a, b in zip(prefix, prefix[1:]))
    change = abs(fine.lower_bound - coarse.lower_bound) / coarse.lower_bound
    res = SuiteResult("sobolev", [
        _at_least("positive", coarse.lower_bound, math.ulp(0.0)),
        Check("prefix-monotone", float(monotone), 1.0, monotone, "min"),
        _at_most("refinement-change", change, max_change),
    ])
    res.details = {"lower_bound": {str(n): e.lower_bound for n, e in zip(points, est)},
                   "maximizer": fine.maximizer, "trial_count": fine.trial_count, "prefix_maxima": prefix}
    res.seconds = time.perf_counter() - t0
    return res


# ---------------------------------------------------------------- integrator cross-check


def crosscheck_suite(preset: str = "integrator-crosscheck", dts=(0.1, 0.05, 0.025),
                     factor: float = 5.0, min_order: float = 1.8) -> SuiteResult:
    """Strang splitting against rk4-mol on the same data and grid.

    The disagreement at t_end (sup over E and the reconstructed n) must stay
    below factor * (h^2 + dt^2) * size, size being the sup of the data, and
    shrink at ``min_order`` along the dt ladder.
    """
    from .config import load_preset
    from .systems import IntegratorConfig, Scheme, evolve, reconstruct

    t0 = time.perf_counter()
    cfg = load_preset(preset)
    grid, t_end = cfg.grid, cfg["integrator.t_end"]
    state = make_data(cfg["data.family"], cfg.data_parameters(), grid, cfg.system).state(grid)
    size = max(np.abs(state.E.values).max(), np.abs(reconstruct(state)[0].values).max())
    res = SuiteResult("crosscheck")
    gaps = []
    for dt in dts:
        a, b = (evolve(state, IntegratorConfig(dt, scheme), t_end) for scheme in (Scheme.STRANG, Scheme.RK4))
        gap = max(np.abs(a.E.values - b.E.values).max(),
                  np.abs(reconstruct(a)[0].values - reconstruct(b)[0].values).max())
        gaps.append(gap)
        res.checks.append(_at_most(f"bound/dt={dt:g}", gap, factor * (grid.h**2 + dt**2) * size))
    conv = ConvergenceResult(tuple(dts), tuple(gaps), floor=0.0)
    res.checks.append(_at_least("joint-order", conv.order, min_order))
    res.details = {"h": grid.h, "size": float(size), "gaps": gaps, "orders": list(conv.orders)}
    res.seconds = time.perf_counter() - t0
    return res


SUITES = {
    "algebra": algebra_suite,
    "commutators": commutator_suite,
    "kirchhoff": kirchhoff_suite,
    "sobolev": sobolev_suite,
    "crosscheck": crosscheck_suite,
}
