"""Empirical constants for the pointwise decay and Sobolev-type inequalities.

Each inequality is evaluated as lhs <= C * rhs at spacetime probes and the
reported constant is max(lhs / rhs). Pointwise quantities come from closed
forms (sympy); L^2 norms of vector-field derivatives come from spectral jets
on a box grid. Magnitudes of families are sums: |Gamma u| = sum_k |Gamma_k u|
and |d u| = sum_mu |d_mu u|.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np
import sympy as sp

from . import spectral
from .diagnostics import SCHEMA_VERSION, DiagnosticError
from .gamma import STANDARD
from .grid import GridSpec, japanese
from .propagators import scalar_evolve
from .vectorfields import (
    GAMMA, GAMMA_HAT, OMEGAS, VF, Z, Jet, T, X1, X2, X3, as_function, hat_matrix, multi_index_jets,
    sym_minus_box, sym_q0, sym_vf, sum_norms,
)


class Inequality(str, Enum):
    PARTIAL_DECAY = "partial-decay"
    KLAINERMAN_SOBOLEV = "klainerman-sobolev"
    STANDARD_SOBOLEV = "standard-sobolev"
    CONE_INTERIOR = "cone-interior"
    GLOBAL_SOBOLEV = "global-sobolev"
    MKS_DECAY = "mks-decay"
    HESSIAN_EXTRA = "hessian-extra"
    KG_WEIGHTED = "kg-weighted"
    DIRAC_DECAY = "dirac-decay"
    Q0_BOUND = "q0-bound"
    Q0_INTERIOR = "q0-interior"
    HOMO_L2 = "homo-L2"


# probes must satisfy r <= a t + b
_CONE = {
    Inequality.CONE_INTERIOR: (0.5, 0.0),
    Inequality.HESSIAN_EXTRA: (2.0, 0.0),
    Inequality.DIRAC_DECAY: (3.0, 3.0),
    Inequality.Q0_INTERIOR: (3.0, 3.0),
}
_XS = (X1, X2, X3)


@dataclass(frozen=True)
class ProbeSet:
    """``n_space`` random points with r_min <= r <= radius at each probe time.

    A cone (a, b) caps the radius at a t + b; times where the cap falls
    below ``r_min`` get no points.
    """

    times: tuple[float, ...] = (0.5, 1.0, 2.0, 4.0)
    n_space: int = 64
    radius: float = 6.0
    r_min: float = 0.25
    seed: int = 0

    def points(self, cone: tuple[float, float] | None = None) -> np.ndarray:
        rng = np.random.default_rng(self.seed)
        out = [np.empty((0, 4))]
        for t in self.times:
            d = rng.normal(size=(self.n_space, 3))
            d /= np.linalg.norm(d, axis=1, keepdims=True)
            u = rng.uniform(size=self.n_space)
            top = self.radius if cone is None else min(self.radius, cone[0] * t + cone[1])
            if top < self.r_min:
                continue
            r = self.r_min + (top - self.r_min) * u ** (1 / 3)
            out.append(np.column_stack([np.full(self.n_space, float(t)), d * r[:, None]]))
        return np.concatenate(out)


@dataclass(frozen=True)
class InequalityMargin:
    name: Inequality
    probes: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray

    @property
    def ratios(self) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            q = self.lhs / self.rhs
        return np.where(self.lhs == 0, 0.0, q)

    @property
    def constant(self) -> float:
        return float(np.max(self.ratios))

    def stable_with(self, other: "InequalityMargin", factor: float = 2.0) -> bool:
        a, b = self.constant, other.constant
        if not (math.isfinite(a) and math.isfinite(b)):
            return False
        if a == 0 or b == 0:
            return a == b
        return max(a, b) / min(a, b) <= factor

    def to_json(self) -> dict:
        return {"schema": SCHEMA_VERSION, "kind": "inequality", "name": self.name.value,
                "constant": self.constant, "probes": int(self.probes.shape[0])}


# ---------------------------------------------------------------- pointwise pieces


def _eval(expr, P: np.ndarray) -> np.ndarray:
    f = as_function(sp.sympify(expr))
    return np.asarray(f(P[:, 0], P[:, 1], P[:, 2], P[:, 3]), dtype=complex)


def _abs_sum(exprs, P) -> np.ndarray:
    return sum(np.abs(_eval(e, P)) for e in exprs)


def _grad_exprs(u) -> list:
    return [sp.diff(u, T)] + [sp.diff(u, x) for x in _XS]


def _gamma_exprs(u) -> list:
    return [sym_vf(vf, u) for vf in GAMMA]


def _brackets(P):
    t, r = P[:, 0], np.linalg.norm(P[:, 1:], axis=1)
    return t, r, japanese(t + r), japanese(t - r)


def _partial_decay(u, P):
    t, r, tp, tm = _brackets(P)
    du = [_eval(e, P) for e in _grad_exprs(u)]
    good = sum(np.abs(du[a + 1] + P[:, a + 1] / r * du[0]) for a in range(3))
    lhs = tp * good + tm * sum(np.abs(d) for d in du)
    rhs = np.abs(_eval(sym_vf(VF.L0, u), P)) + _abs_sum(_gamma_exprs(u), P)
    return lhs, rhs


def _d_gamma_sum(u, P):
    """sum_{|J| <= 1} |d Gamma^J u|."""
    out = _abs_sum(_grad_exprs(u), P)
    for g in _gamma_exprs(u):
        out = out + _abs_sum(_grad_exprs(g), P)
    return out


def _hessian_extra(u, P):
    t, r, tp, tm = _brackets(P)
    vars_ = (T,) + _XS
    lhs = sum(np.abs(_eval(sp.diff(u, vars_[i], vars_[j]), P)) for i in range(4) for j in range(i, 4))
    G = np.abs(_eval(sym_minus_box(u), P))
    return lhs, t / tm * G + _d_gamma_sum(u, P) / tm


def _kg_weighted(u, P):
    t, r, tp, tm = _brackets(P)
    G = np.abs(_eval(sym_minus_box(u) + u, P))
    return tp / tm * np.abs(_eval(u, P)), _d_gamma_sum(u, P) + tp / tm * G


def _spinor_norm(comps) -> np.ndarray:
    return np.sqrt(sum(np.abs(c) ** 2 for c in comps))


def _dirac_decay(phi, P):
    t, r, tp, tm = _brackets(P)
    g = STANDARD
    vals = np.stack([_eval(c, P) for c in phi])
    grads = [np.stack([_eval(e, P) for e in comp]) for comp in zip(*(_grad_exprs(c) for c in phi))]
    lhs = sum(_spinor_norm(d) for d in grads)
    # F = -i g^mu d_mu phi
    F = -1j * sum(np.tensordot(g[mu], grads[mu], axes=(1, 0)) for mu in range(4))
    hat = 0.0
    for vf in GAMMA_HAT:
        base = np.stack([_eval(sym_vf(vf.unhatted, c), P) for c in phi])
        m = hat_matrix(vf, g)
        if m is not None:
            base = base + np.tensordot(m, vals, axes=(1, 0))
        hat = hat + _spinor_norm(base)
    rhs = (hat + _spinor_norm(vals)) / tm + t / tm * _spinor_norm(F)
    return lhs, rhs


def _q0_bound(f, g, P):
    t, r, tp, tm = _brackets(P)
    lhs = np.abs(_eval(sym_q0(f, g), P))
    gf = np.abs(_eval(sym_vf(VF.L0, f), P)) + _abs_sum(_gamma_exprs(f), P)
    return lhs, gf * _abs_sum(_gamma_exprs(g), P) / tp


def _q0_interior(f, g, P):
    t, r, tp, tm = _brackets(P)
    lhs = np.abs(_eval(sym_q0(f, g), P))
    rhs = tm / tp * _abs_sum(_grad_exprs(f), P) * _abs_sum(_grad_exprs(g), P)
    rhs = rhs + _abs_sum(_gamma_exprs(f), P) * _abs_sum(_gamma_exprs(g), P) / japanese(t)
    return lhs, rhs


# ---------------------------------------------------------------- grid-norm pieces


def closed_form_jet(u, grid: GridSpec, t: float, order: int) -> Jet:
    """Jet of d_t^k u sampled at the grid nodes, k <= order."""
    x1, x2, x3 = grid.mesh()
    tt = np.full(grid.shape, float(t))
    derivs = []
    e = sp.sympify(u)
    for _ in range(order + 1):
        derivs.append(np.real(np.asarray(as_function(e)(tt, x1, x2, x3), dtype=complex)))
        e = sp.diff(e, T)
    return Jet(grid, t, derivs)


def _radial_derivative(arr: np.ndarray, grid: GridSpec) -> np.ndarray:
    r = grid.radius()
    grads = spectral.gradient(arr, grid.wavenumbers())
    return sum(c / r * gq for c, gq in zip(grid.coords(), grads))


def _standard_sobolev_norm(u, grid: GridSpec, t: float) -> float:
    w = grid.volume_weights()
    total = 0.0
    for _, j in multi_index_jets(closed_form_jet(u, grid, t, 0), OMEGAS, 2):
        for arr in (j.value, _radial_derivative(j.value, grid)):
            total += math.sqrt(float(np.sum(np.abs(arr) ** 2 * w)))
    return total


def _grid_rhs(name: Inequality, u, grid: GridSpec, times) -> dict[float, float]:
    out = {}
    for t in times:
        if name is Inequality.KLAINERMAN_SOBOLEV:
            out[t] = sum_norms(closed_form_jet(u, grid, t, 2), Z, 2)
        elif name is Inequality.STANDARD_SOBOLEV:
            out[t] = _standard_sobolev_norm(u, grid, t)
        elif name in (Inequality.CONE_INTERIOR, Inequality.GLOBAL_SOBOLEV):
            out[t] = sum_norms(closed_form_jet(u, grid, t, 3), GAMMA, 3)
        elif name is Inequality.MKS_DECAY:
            samples = np.linspace(0.0, 2.0 * t, 5)
            out[t] = max(sum_norms(closed_form_jet(u, grid, s, 3), GAMMA, 3) for s in samples)
    return out


def _homo_l2(data, grid: GridSpec, times):
    u0, u1 = data
    x = grid.mesh()
    a0 = np.real(np.asarray(as_function(sp.sympify(u0))(np.zeros(grid.shape), *x), dtype=complex))
    a1 = np.real(np.asarray(as_function(sp.sympify(u1))(np.zeros(grid.shape), *x), dtype=complex))
    dv = grid.h**3
    rhs = math.sqrt(np.sum(a0**2) * dv) + float(np.sum(np.abs(a1))) * dv + math.sqrt(np.sum(a1**2) * dv)
    lhs = [math.sqrt(np.sum(scalar_evolve(a0, a1, grid, t, 0.0)[0] ** 2) * dv) for t in times]
    P = np.column_stack([np.asarray(times, float), np.zeros((len(times), 3))])
    return P, np.asarray(lhs), np.full(len(times), rhs)


# ---------------------------------------------------------------- entry point


def default_grid() -> GridSpec:
    return GridSpec.box(10.0, 48)


def inequality_margin(
    name: Inequality | str,
    subject,
    second=None,
    probes: ProbeSet | None = None,
    grid: GridSpec | None = None,
) -> InequalityMargin:
    """Evaluate lhs and rhs (constant omitted) of one inequality at the probes.

    ``subject`` is a sympy expression in (t, x1, x2, x3); a sequence of four
    for dirac-decay; the pair (u0, u1) of expressions in x for homo-L2, whose
    probes are the probe times. ``second`` is g for the Q0 estimates. The
    grid-based entries need ``subject`` negligible at the faces of ``grid``.
    """
    name = Inequality(name)
    probes = probes or ProbeSet()
    grid = grid or default_grid()
    if name is Inequality.HOMO_L2:
        P, lhs, rhs = _homo_l2(subject, grid, probes.times)
        return InequalityMargin(name, P, lhs, rhs)
    P = probes.points(_CONE.get(name))
    if P.shape[0] == 0:
        raise DiagnosticError(f"probe set is empty after the restrictions of {name.value}")
    if name in (Inequality.Q0_BOUND, Inequality.Q0_INTERIOR):
        g = subject if second is None else second
        lhs, rhs = (_q0_bound if name is Inequality.Q0_BOUND else _q0_interior)(subject, g, P)
    elif name is Inequality.DIRAC_DECAY:
        if len(subject) != 4:
            raise ValueError("dirac-decay needs four spinor components")
        lhs, rhs = _dirac_decay(subject, P)
    elif name is Inequality.PARTIAL_DECAY:
        lhs, rhs = _partial_decay(subject, P)
    elif name is Inequality.HESSIAN_EXTRA:
        lhs, rhs = _hessian_extra(subject, P)
    elif name is Inequality.KG_WEIGHTED:
        lhs, rhs = _kg_weighted(subject, P)
    else:
        lhs = np.abs(_eval(subject, P))
        norms = _grid_rhs(name, subject, grid, sorted(set(P[:, 0].tolist())))
        S = np.array([norms[t] for t in P[:, 0]])
        t, r, tp, tm = _brackets(P)
        if name is Inequality.KLAINERMAN_SOBOLEV:
            rhs = S / (tp * np.sqrt(tm))
        elif name is Inequality.STANDARD_SOBOLEV:
            rhs = S / japanese(r)
        elif name is Inequality.CONE_INTERIOR:
            rhs = S * japanese(t) ** -0.75
        elif name is Inequality.GLOBAL_SOBOLEV:
            rhs = S * tp**-0.75
        else:
            rhs = S / tp
    return InequalityMargin(name, P, np.asarray(lhs, float), np.asarray(rhs, float))


def refinement_check(name, subject, second=None, probes: ProbeSet | None = None,
                     grids: Sequence[GridSpec] = (GridSpec.box(10.0, 32), GridSpec.box(10.0, 48))):
    """Margins on two grids and the PASS verdict: finite and within a factor 2."""
    a = inequality_margin(name, subject, second, probes, grids[0])
    b = inequality_margin(name, subject, second, probes, grids[1])
    return a, b, a.stable_with(b)
