"""Checks of the data hypotheses and a lower bound for the Klainerman-Sobolev constant."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .closedform import ClosedForm, Gaussian, GridFunction, multi_indices, multinomial
from .data import DKGData, KGZData
from .diagnostics import SCHEMA_VERSION
from .grid import GridKind, GridSpec, ScalarField, japanese
from .propagators import PropagatorKind, WaveData, free_jet, scalar_evolve
from .vectorfields import Z, sum_norms

KGZ_MIN_N = 10
DKG_MIN_N = 13
_SMALLNESS_DENOMINATOR = 71**2 * 174


def smallness_bound(C_KS: float, K0: float) -> float:
    """1 / (71^2 * 174 * C_KS^3 * K0^2)."""
    if C_KS <= 0 or K0 <= 0:
        raise ValueError("C_KS and K0 must be positive")
    return 1.0 / (_SMALLNESS_DENOMINATOR * C_KS**3 * K0**2)


def smallness_bound_exact(C_KS: int | Fraction, K0: int | Fraction) -> Fraction:
    """Rational form of :func:`smallness_bound` for rational inputs."""
    return Fraction(1) / (_SMALLNESS_DENOMINATOR * Fraction(C_KS) ** 3 * Fraction(K0) ** 2)


# ---------------------------------------------------------------- weighted norms


class _Quadrature:
    """Box trapezoid quadrature with cached derivative densities."""

    def __init__(self, grid: GridSpec):
        if grid.kind is not GridKind.BOX:
            raise ValueError("hypothesis quadrature runs on the box grid")
        self.grid = grid
        self.coords = grid.coords()
        self.bracket2 = 1.0 + grid.radius() ** 2  # <x>^2
        self._cache: dict = {}

    def deriv(self, f: ClosedForm, alpha) -> np.ndarray:
        if isinstance(f, GridFunction) and f.grid != self.grid:
            raise ValueError("grid data must be checked on their own grid")
        return np.broadcast_to(f.derivative(alpha, *self.coords), self.grid.shape)

    def abs2(self, comps: Sequence[ClosedForm], alpha) -> np.ndarray:
        return sum(np.abs(self.deriv(f, alpha)) ** 2 for f in comps)

    def tensor_density(self, comps: Sequence[ClosedForm], order: int) -> np.ndarray:
        """sum over ordered k-tuples of |d^k f|^2, i.e. multinomial-weighted."""
        key = (tuple(id(f) for f in comps), order)
        if key not in self._cache:
            dens = sum(multinomial(a) * self.abs2(comps, a) for a in multi_indices(order))
            self._cache[key] = (tuple(comps), dens)
        return self._cache[key][1]

    def integral(self, dens: np.ndarray, power: int) -> float:
        return float(np.sum(dens * self.bracket2**power)) * self.grid.h**3


def tensor_norm(q: _Quadrature, comps: Sequence[ClosedForm], order: int, weight_power: int) -> float:
    """|| <x>^p nabla^k f ||, the derivative tensor counted with multiplicity."""
    return math.sqrt(q.integral(q.tensor_density(comps, order), weight_power))


def multi_index_sum(q: _Quadrature, comps: Sequence[ClosedForm], max_order: int, weight_power: int) -> float:
    """sum_{|I| <= M} || <x>^p d^I f ||, each multi-index alpha once."""
    w = q.bracket2**weight_power
    total = 0.0
    for k in range(max_order + 1):
        for a in multi_indices(k):
            total += math.sqrt(float(np.sum(q.abs2(comps, a) * w)) * q.grid.h**3)
    return total


# ---------------------------------------------------------------- report


@dataclass(frozen=True)
class Condition:
    name: str
    measured: float
    bound: float
    strict: bool = False

    @property
    def margin(self) -> float:
        return self.bound - self.measured

    @property
    def passed(self) -> bool:
        return self.margin > 0 if self.strict else self.margin >= 0

    def to_json(self) -> dict:
        return {"name": self.name, "measured": self.measured, "bound": self.bound,
                "margin": self.margin, "strict": self.strict, "passed": self.passed}


@dataclass(frozen=True)
class HypothesisReport:
    system: str
    K0: float
    epsilon: float
    N: int
    C_KS: float
    smallness_bound: float
    conditions: tuple[Condition, ...]
    witness: tuple[int, ...] | None = None

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.conditions)

    def __getitem__(self, name: str) -> Condition:
        for c in self.conditions:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_json(self) -> dict:
        return {
            "schema": SCHEMA_VERSION, "kind": "hypotheses", "system": self.system,
            "K0": self.K0, "epsilon": self.epsilon, "N": self.N, "C_KS": self.C_KS,
            "smallness_bound": self.smallness_bound, "passed": self.passed,
            "witness": list(self.witness) if self.witness is not None else None,
            "conditions": [c.to_json() for c in self.conditions],
        }


def default_quadrature_grid() -> GridSpec:
    return GridSpec.box(12.0, 64)


def _kgz_conditions(data: KGZData, q: _Quadrature, K0, eps, N, C_KS):
    n0, n1 = (data.n0,), (data.n1,)
    wave = sum(tensor_norm(q, n0, i + j, i) for i in range(11) for j in range(N - i + 1))
    wave += sum(tensor_norm(q, n1, i + j, i + 1) for i in range(10) for j in range(N - 1 - i + 1))
    kg = sum(tensor_norm(q, data.E0, i, 12) for i in range(N + 2))
    kg += sum(tensor_norm(q, data.E1, i, 12) for i in range(N + 1))
    small = sum(tensor_norm(q, n0, i + 2, i) for i in range(3))
    small += sum(tensor_norm(q, n1, i + 1, i) for i in range(3))
    # pointwise n0 >= 0 and n1 >= |grad n0| at the nodes
    v0 = np.real(q.deriv(data.n0, (0, 0, 0)))
    v1 = np.real(q.deriv(data.n1, (0, 0, 0)))
    gabs = np.sqrt(sum(np.abs(q.deriv(data.n0, e)) ** 2 for e in ((1, 0, 0), (0, 1, 0), (0, 0, 1))))
    slack = np.minimum(v0, v1 - gabs)
    j = int(np.argmin(slack))
    witness = tuple(int(i) for i in np.unravel_index(j, slack.shape)) if slack.flat[j] < 0 else None
    bound = smallness_bound(C_KS, K0)
    conds = (
        Condition("wave-data-norm", wave, K0, strict=True),
        Condition("kg-data-norm", kg, eps, strict=True),
        Condition("wave-positivity", -float(slack.flat[j]) if slack.size else 0.0, 0.0),
        Condition("wave-smallness", small, bound),
    )
    return conds, bound, witness


def _dkg_conditions(data: DKGData, q: _Quadrature, K0, eps, N):
    kg = multi_index_sum(q, (data.v0,), N + 1, N + 2) + multi_index_sum(q, (data.v1,), N, N + 1)
    dirac = multi_index_sum(q, data.psi0, N, N + 1)
    return (Condition("kg-data-norm", kg, K0), Condition("dirac-data-norm", dirac, eps)), None


def hypothesis_check(
    data: KGZData | DKGData, K0: float, epsilon: float, N: int, C_KS: float = 1.0,
    grid: GridSpec | None = None,
) -> HypothesisReport:
    """Evaluate the data conditions by quadrature and report margins.

    Norms are weighted L^2 norms of exact derivatives, integrated with the
    trapezoid rule on ``grid`` (the data must be negligible at its boundary).
    For KGZ, |nabla^k f| is the full derivative tensor norm; for DKG each
    multi-index is a separate term, matching the two sums' notation.
    """
    if K0 <= 0 or epsilon <= 0:
        raise ValueError("K0 and epsilon must be positive")
    floor = KGZ_MIN_N if isinstance(data, KGZData) else DKG_MIN_N
    if N < floor:
        raise ValueError(f"N = {N} is below the required floor N >= {floor} for {data.system.upper()}")
    grid = grid or default_quadrature_grid()
    q = _Quadrature(grid)
    if isinstance(data, KGZData):
        conds, bound, witness = _kgz_conditions(data, q, K0, epsilon, N, C_KS)
    else:
        conds, witness = _dkg_conditions(data, q, K0, epsilon, N)
        bound = smallness_bound(C_KS, K0)
    return HypothesisReport(data.system, float(K0), float(epsilon), int(N), float(C_KS), bound, conds, witness)


@dataclass(frozen=True)
class ScalingCheck:
    """Reports for ``data.scaled(c)`` over random scalings ``c``.

    ``linear``: every measured quantity equals c times its unscaled value.
    ``monotone``: sorted by c, the verdicts never go from fail back to pass.
    """

    scales: tuple[float, ...]
    reports: tuple[HypothesisReport, ...]
    linear: bool
    monotone: bool

    @property
    def passed(self) -> bool:
        return self.linear and self.monotone

    def to_json(self) -> dict:
        return {"schema": SCHEMA_VERSION, "kind": "hypothesis-scaling", "scales": list(self.scales),
                "verdicts": [r.passed for r in self.reports], "linear": self.linear,
                "monotone": self.monotone, "passed": self.passed}


def scaling_check(
    data: KGZData | DKGData, K0: float, epsilon: float, N: int, C_KS: float = 1.0,
    count: int = 20, span: tuple[float, float] = (1e-2, 1e2), seed: int = 0,
    grid: GridSpec | None = None, rtol: float = 1e-10,
) -> ScalingCheck:
    """Evaluate the conditions on ``count`` log-uniform scalings within ``span``."""
    rng = np.random.default_rng(seed)
    scales = np.sort(np.exp(rng.uniform(math.log(span[0]), math.log(span[1]), count)))
    base = hypothesis_check(data, K0, epsilon, N, C_KS, grid)
    reports = tuple(hypothesis_check(data.scaled(float(c)), K0, epsilon, N, C_KS, grid) for c in scales)
    linear = all(
        math.isclose(got.measured, c * ref.measured, rel_tol=rtol, abs_tol=1e-300)
        for c, rep in zip(scales, reports) for got, ref in zip(rep.conditions, base.conditions)
    )
    verdicts = [r.passed for r in reports]
    monotone = all(a or not b for a, b in zip(verdicts, verdicts[1:]))
    return ScalingCheck(tuple(float(c) for c in scales), reports, linear, monotone)


# ---------------------------------------------------------------- Klainerman-Sobolev constant


@dataclass(frozen=True)
class Trial:
    """Free-wave trial with u0 = G_sigma(x - c) and u1 = (beta / sigma) u0."""

    sigma: float
    center: tuple[float, float, float] = (0.0, 0.0, 0.0)
    beta: float = 0.0

    def describe(self) -> dict:
        return {"sigma": self.sigma, "center": list(self.center), "beta": self.beta}


def shipped_trials() -> tuple[Trial, ...]:
    """The 20-trial family: five widths, two centres, two velocity profiles."""
    out = []
    for s in (0.75, 1.0, 1.25, 1.5, 2.0):
        for c in ((0.0, 0.0, 0.0), (1.5, 0.0, 0.0)):
            for b in (0.0, 1.0):
                out.append(Trial(s, c, b))
    return tuple(out)


@dataclass(frozen=True)
class SobolevEstimate:
    lower_bound: float
    maximizer: dict
    trial_count: int
    ratios: tuple[float, ...] = field(default=())

    def to_json(self) -> dict:
        return {"schema": SCHEMA_VERSION, "kind": "sobolev-constant", "lower_bound": self.lower_bound,
                "maximizer": self.maximizer, "trial_count": self.trial_count, "ratios": list(self.ratios)}


def _ray_sup(g: Gaussian, t: float, n: int = 8001) -> float:
    """sup over a line through the origin and the centre of |u0| <t+r><t-r>^{1/2}; t = 0 only."""
    c = np.asarray(g.center, float)
    d = c / np.linalg.norm(c) if np.linalg.norm(c) > 0 else np.array([1.0, 0.0, 0.0])
    s = np.linspace(-12.0 * g.sigma - np.linalg.norm(c), 12.0 * g.sigma + np.linalg.norm(c), n)
    pts = s[:, None] * d[None, :]
    r = np.abs(s)
    vals = np.abs(g(pts[:, 0], pts[:, 1], pts[:, 2])) * japanese(t + r) * np.sqrt(japanese(t - r))
    return float(vals.max())


def _trial_ratio(trial: Trial, grid: GridSpec, t: float) -> float:
    g = Gaussian(1.0, trial.sigma, trial.center)
    u0 = np.asarray(g(*grid.mesh()))
    u1 = (trial.beta / trial.sigma) * u0
    if t:
        u, ut = scalar_evolve(u0, u1, grid, t, 0.0)
        r = grid.radius()
        num = float(np.max(np.abs(u) * japanese(t + r) * np.sqrt(japanese(t - r))))
    else:
        u, ut = u0, u1
        num = _ray_sup(g, 0.0)
    data = WaveData(ScalarField(grid, u, t), ScalarField(grid, ut, t), t)
    jet = free_jet(PropagatorKind.WAVE, data, order=2)
    return num / sum_norms(jet, Z, 2)


def sobolev_constant_estimate(
    trials: Sequence[Trial] | None = None, grid: GridSpec | None = None, times: Sequence[float] = (0.0,),
) -> SobolevEstimate:
    """max over trials and times of sup_x |u| <t+r> <t-r>^{1/2} / sum_{|I|<=2} ||Z^I u||.

    At t = 0 the supremum is taken from the closed form along the line through
    the origin and the trial centre (where it is attained); at t > 0 it is taken
    over grid nodes after exact free evolution.
    """
    trials = tuple(trials) if trials is not None else shipped_trials()
    grid = grid or GridSpec.box(12.0, 64)
    if not trials:
        raise ValueError("the trial family is empty")
    best, arg, ratios = -math.inf, {}, []
    for tr in trials:
        for t in times:
            r = _trial_ratio(tr, grid, float(t))
            ratios.append(r)
            if r > best:
                best, arg = r, dict(tr.describe(), t=float(t))
    return SobolevEstimate(best, arg, len(trials), tuple(ratios))
