"""Energy functionals, ghost-weight identities and their running accumulators.

Functionals take plain (u, u_t) arrays on a grid so that the same code serves
scalars (shape ``grid.shape``), vector fields and spinors (a leading component
axis). Spatial gradients are spectral on the box and 4th-order on the radial
line.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import spectral
from .gamma import STANDARD, GammaSet
from .grid import DEFAULT_DELTA, GridKind, GridSpec, chi, ghost_weight, japanese
from .vectorfields import OMEGAS, VF, Jet, TimeBracket, radial_derivative

CSV_COLUMNS = (
    "t", "natural", "conformal", "ghost_stored", "ghost_acc", "dirac_stored", "dirac_acc",
    "exterior", "matter_weighted", "min_n0", "min_sign2",
)


def _abs2(a: np.ndarray, grid: GridSpec) -> np.ndarray:
    """|a|^2 summed over any leading component axis."""
    d = np.abs(a) ** 2
    return d.sum(axis=0) if d.ndim > len(grid.shape) else d


def _grad(u: np.ndarray, grid: GridSpec) -> list[np.ndarray]:
    if grid.kind is GridKind.BOX:
        return spectral.gradient(u, grid.wavenumbers())
    return [radial_derivative(u, grid.h)]


def _integrate(grid: GridSpec, dens: np.ndarray) -> float:
    return float(np.sum(dens * grid.volume_weights()))


def natural_energy(u: np.ndarray, u_t: np.ndarray, grid: GridSpec, mass2: float = 0.0) -> float:
    """int |d_t u|^2 + sum_a |d_a u|^2 (+ mass2 |u|^2)."""
    dens = _abs2(u_t, grid) + sum(_abs2(g, grid) for g in _grad(u, grid))
    if mass2:
        dens = dens + mass2 * _abs2(u, grid)
    return _integrate(grid, dens)


def conformal_energy(source: Jet | TimeBracket) -> float:
    """int |L0 u|^2 + u^2 + sum |Omega_ab u|^2 + sum |L_a u|^2.

    Only first time derivatives enter, so a jet of order 1 (for instance the
    pair (u, u_t) of a state) is enough; a bracket is differenced in time.
    """
    jet = source.jet(order=1) if isinstance(source, TimeBracket) else source
    grid = jet.grid
    dens = jet.abs2() + jet.abs2(jet.apply(VF.L0).value)
    if grid.kind is GridKind.RADIAL:
        # rotations vanish; sum_a |L_a u|^2 = |t u_r + r u_t|^2 for radial u
        ur = radial_derivative(jet.value, grid.h)
        dens = dens + np.abs(jet.t * ur + grid.axis * jet.derivs[1]) ** 2
    else:
        for vf in OMEGAS + (VF.L1, VF.L2, VF.L3):
            dens = dens + jet.abs2(jet.apply(vf).value)
    return _integrate(grid, dens)


def pair_jet(u: np.ndarray, u_t: np.ndarray, grid: GridSpec, t: float) -> Jet:
    ncomp = u.shape[0] if u.ndim > len(grid.shape) else 0
    return Jet(grid, t, [u, u_t], ncomp)


# ---------------------------------------------------------------- ghost weight


def ghost_profile(grid: GridSpec, t: float, delta: float) -> tuple[np.ndarray, np.ndarray]:
    """(e^q, q') at time t, q evaluated at r - t."""
    gw = ghost_weight(delta)
    s = grid.radius() - t
    return np.exp(gw.q(s)), gw.weight(s)


def good_derivatives(u: np.ndarray, u_t: np.ndarray, grid: GridSpec) -> list[np.ndarray]:
    """G_a u = d_a u + omega_a u_t; no exclusion, since the integrands stay bounded at r -> 0."""
    if grid.kind is GridKind.RADIAL:
        return [radial_derivative(u, grid.h) + u_t]
    r = grid.radius()
    safe = np.where(r > 0, r, 1.0)
    grads = spectral.gradient(u, grid.wavenumbers())
    return [grads[a] + (grid.coords()[a] / safe) * u_t for a in range(3)]


def ghost_kg_densities(u, u_t, grid: GridSpec, t: float, delta: float, mass2: float = 1.0):
    """Stored 1/2 e^q (|du|^2 + m u^2), dissipation 1/2 q' e^q (sum |G_a u|^2 + m u^2), and the
    plain stored / dissipation densities without e^q."""
    eq, w = ghost_profile(grid, t, delta)
    grads = _grad(u, grid)
    u2 = _abs2(u, grid)
    stored = _abs2(u_t, grid) + sum(_abs2(g, grid) for g in grads) + mass2 * u2
    diss = sum(_abs2(g, grid) for g in good_derivatives(u, u_t, grid)) + mass2 * u2
    return 0.5 * eq * stored, 0.5 * w * eq * diss, stored, w * diss


def minus_part(psi: np.ndarray, grid: GridSpec, g: GammaSet = STANDARD) -> np.ndarray:
    """[psi]_- = psi - omega_a g0 g^a psi (zero direction at the origin)."""
    r = grid.radius()
    safe = np.where(r > 0, r, 1.0)
    out = psi.copy()
    for a in range(3):
        out = out - (grid.coords()[a] / safe) * np.tensordot(g.alpha[a], psi, axes=(1, 0))
    return out


def ghost_dirac_densities(psi: np.ndarray, grid: GridSpec, t: float, delta: float, g: GammaSet = STANDARD):
    """Stored e^q |psi|^2, dissipation 1/2 q' e^q |[psi]_-|^2, and their plain counterparts."""
    if grid.kind is not GridKind.BOX:
        raise ValueError("spinor energies need the box grid")
    eq, w = ghost_profile(grid, t, delta)
    p2 = _abs2(psi, grid)
    m2 = _abs2(minus_part(psi, grid, g), grid)
    return eq * p2, 0.5 * w * eq * m2, p2, w * m2


def exterior_energy(u: np.ndarray, u_t: np.ndarray, grid: GridSpec, t: float, shift: float = 0.0) -> float:
    """||<r-t> chi(r-2t-shift) u|| + ||<r-t> chi(r-2t-shift) du||."""
    r = grid.radius()
    wt = (japanese(r - t) * chi(r - 2.0 * t - shift)) ** 2
    du2 = _abs2(u_t, grid) + sum(_abs2(gq, grid) for gq in _grad(u, grid))
    return math.sqrt(_integrate(grid, wt * _abs2(u, grid))) + math.sqrt(_integrate(grid, wt * du2))


def matter_weighted_densities(E, E_t, n0, n0_t, grid: GridSpec, t: float, delta: float):
    """1/2 e^q (|dE|^2 + |E|^2 + n0 |E|^2) and the dissipation
    1/2 e^q (q'|E|^2 + n0 q'|E|^2 + q' sum |G_a E|^2 - d_t n0 |E|^2)."""
    eq, w = ghost_profile(grid, t, delta)
    E2 = _abs2(E, grid)
    stored = 0.5 * eq * (_abs2(E_t, grid) + sum(_abs2(gq, grid) for gq in _grad(E, grid)) + E2 + n0 * E2)
    G2 = sum(_abs2(gq, grid) for gq in good_derivatives(E, E_t, grid))
    diss = 0.5 * eq * (w * E2 + n0 * w * E2 + w * G2 - n0_t * E2)
    sign2 = w - n0_t
    return stored, diss, sign2


def matter_weighted_ghost(E, E_t, n0, n0_t, grid: GridSpec, t: float, delta: float = DEFAULT_DELTA):
    """(functional value, min n0, min(q' - d_t n0)) on one slice."""
    stored, _, sign2 = matter_weighted_densities(E, E_t, n0, n0_t, grid, t, delta)
    return _integrate(grid, stored), float(np.min(n0)), float(np.min(sign2))


# ---------------------------------------------------------------- time accumulation


class Trapezoid:
    """Running trapezoid integral of a sampled non-negative rate."""

    def __init__(self):
        self.value = 0.0
        self._last: tuple[float, float] | None = None

    def add(self, t: float, rate: float) -> float:
        if self._last is not None:
            t0, r0 = self._last
            if t < t0:
                raise ValueError("samples must advance in time")
            self.value += 0.5 * (t - t0) * (r0 + rate)
        self._last = (t, rate)
        return self.value


@dataclass
class GhostIdentity:
    """Tracks S(t) + int_0^t D - S(0) for a ghost-weight identity, where S is the
    e^q-weighted stored part and D the dissipation; zero for free evolution."""

    initial: float | None = None
    acc: Trapezoid = field(default_factory=Trapezoid)
    last_stored: float = 0.0

    def add(self, t: float, stored: float, rate: float) -> None:
        if self.initial is None:
            self.initial = stored
        self.acc.add(t, rate)
        self.last_stored = stored

    @property
    def drift(self) -> float:
        if self.initial is None:
            return 0.0
        return self.last_stored + self.acc.value - self.initial

    @property
    def relative_drift(self) -> float:
        if not self.initial:
            return 0.0 if self.drift == 0 else math.inf
        return abs(self.drift) / self.initial


def ghost_energy_kg(trajectory, grid: GridSpec, delta: float = DEFAULT_DELTA, mass2: float = 1.0):
    """Stored part, accumulated dissipation and e^q-identity drift along ``(t, u, u_t)`` samples.

    Returns a list of dicts ``{t, stored, acc, drift}`` where ``stored`` and
    ``acc`` use the plain weights int(|du|^2 + u^2) and int int q'(|u|^2 + sum |G_a u|^2),
    and ``drift`` is the relative drift of the e^q identity.
    """
    ident = GhostIdentity()
    acc = Trapezoid()
    out = []
    for t, u, u_t in trajectory:
        s_eq, d_eq, s_plain, d_plain = ghost_kg_densities(u, u_t, grid, t, delta, mass2)
        ident.add(t, _integrate(grid, s_eq), _integrate(grid, d_eq))
        acc.add(t, _integrate(grid, d_plain))
        out.append({"t": t, "stored": _integrate(grid, s_plain), "acc": acc.value, "drift": ident.relative_drift})
    return out


def ghost_energy_dirac(trajectory, grid: GridSpec, delta: float = DEFAULT_DELTA, g: GammaSet = STANDARD):
    """As :func:`ghost_energy_kg` for ``(t, psi)`` samples: stored int|psi|^2,
    accumulated int int q' |[psi]_-|^2, and the relative drift of the e^q identity."""
    ident = GhostIdentity()
    acc = Trapezoid()
    out = []
    for t, psi in trajectory:
        s_eq, d_eq, s_plain, d_plain = ghost_dirac_densities(psi, grid, t, delta, g)
        ident.add(t, _integrate(grid, s_eq), _integrate(grid, d_eq))
        acc.add(t, _integrate(grid, d_plain))
        out.append({"t": t, "stored": _integrate(grid, s_plain), "acc": acc.value, "drift": ident.relative_drift})
    return out


# ---------------------------------------------------------------- reports


@dataclass(frozen=True)
class EnergyReport:
    """One CSV row. Entries that do not apply to a system are NaN."""

    t: float
    natural: float = math.nan
    conformal: float = math.nan
    ghost_stored: float = math.nan
    ghost_acc: float = math.nan
    dirac_stored: float = math.nan
    dirac_acc: float = math.nan
    exterior: float = math.nan
    matter_weighted: float = math.nan
    min_n0: float = math.nan
    min_sign2: float = math.nan
    delta: float = DEFAULT_DELTA

    def row(self) -> list[str]:
        d = asdict(self)
        return [format_float(d[c]) for c in CSV_COLUMNS]


def format_float(x: float) -> str:
    """Shortest round-trip repr; 'nan' for not-applicable entries."""
    return "nan" if math.isnan(x) else repr(float(x))


def reports_to_csv(reports, path: str | Path | None = None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in reports:
        w.writerow(r.row())
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


class EnergyTracker:
    """Builds an :class:`EnergyReport` per state, owning the time accumulators.

    Roles per system: KGZ uses E for natural/ghost/exterior energies, the
    reconstructed n for the conformal energy and (E, n0) for the matter-weighted
    functional. DKG uses v for natural/ghost/exterior energies, Psi for the
    conformal energy and psi for the Dirac entries.
    """

    def __init__(self, delta: float = DEFAULT_DELTA, exterior_shift: float = 0.0):
        self.delta = delta
        self.exterior_shift = exterior_shift
        self._ghost = Trapezoid()
        self._dirac = Trapezoid()
        self._matter_min_n0 = math.inf
        self._matter_min_sign = math.inf

    def _ghost_entries(self, u, u_t, grid, t, mass2):
        _, _, s_plain, d_plain = ghost_kg_densities(u, u_t, grid, t, self.delta, mass2)
        self._ghost.add(t, _integrate(grid, d_plain))
        return _integrate(grid, s_plain), self._ghost.value

    def report(self, state) -> EnergyReport:
        from .systems import DKGState, KGZState, reconstruct

        t, grid = state.t, state.grid
        if isinstance(state, KGZState):
            E, Et = state.E.values, state.E_t.values
            if grid.kind is GridKind.RADIAL:
                E, Et = E[0], Et[0]
            n, n_t = reconstruct(state)
            gs, ga = self._ghost_entries(E, Et, grid, t, 1.0)
            mw, mn0, ms = matter_weighted_ghost(E, Et, state.n0.values, state.n0_t.values, grid, t, self.delta)
            self._matter_min_n0 = min(self._matter_min_n0, mn0)
            self._matter_min_sign = min(self._matter_min_sign, ms)
            return EnergyReport(
                t=t,
                natural=natural_energy(E, Et, grid, 1.0),
                conformal=conformal_energy(pair_jet(n.values, n_t.values, grid, t)),
                ghost_stored=gs, ghost_acc=ga,
                exterior=exterior_energy(E, Et, grid, t, self.exterior_shift),
                matter_weighted=mw, min_n0=self._matter_min_n0, min_sign2=self._matter_min_sign,
                delta=self.delta,
            )
        if isinstance(state, DKGState):
            v, v_t = reconstruct(state)
            gs, ga = self._ghost_entries(v.values, v_t.values, grid, t, 1.0)
            _, _, p2, m2 = ghost_dirac_densities(state.psi.values, grid, t, self.delta)
            self._dirac.add(t, _integrate(grid, m2))
            return EnergyReport(
                t=t,
                natural=natural_energy(v.values, v_t.values, grid, 1.0),
                conformal=conformal_energy(pair_jet(state.Psi.values, state.Psi_t.values, grid, t)),
                ghost_stored=gs, ghost_acc=ga,
                dirac_stored=_integrate(grid, p2), dirac_acc=self._dirac.value,
                exterior=exterior_energy(v.values, v_t.values, grid, t, self.exterior_shift),
                delta=self.delta,
            )
        raise TypeError(f"no energy roles for {type(state).__name__}")

    def report_linear(self, t: float, grid: GridSpec, u=None, u_t=None, mass2: float = 0.0, psi=None) -> EnergyReport:
        """Report for a free scalar (wave or KG) and/or free spinor sample."""
        kw = {}
        if u is not None:
            gs, ga = self._ghost_entries(u, u_t, grid, t, mass2)
            kw.update(
                natural=natural_energy(u, u_t, grid, mass2),
                conformal=conformal_energy(pair_jet(u, u_t, grid, t)),
                ghost_stored=gs, ghost_acc=ga,
                exterior=exterior_energy(u, u_t, grid, t, self.exterior_shift),
            )
        if psi is not None:
            _, _, p2, m2 = ghost_dirac_densities(psi, grid, t, self.delta)
            self._dirac.add(t, _integrate(grid, m2))
            kw.update(dirac_stored=_integrate(grid, p2), dirac_acc=self._dirac.value)
        return EnergyReport(t=t, delta=self.delta, **kw)
