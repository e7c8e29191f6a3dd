"""Decomposed KGZ and DKG systems and their time integrators.

KGZ unknowns (E, n0, n1) solve
    -Box E + E = -n0 E - Lap(n1) E,   -Box n0 = 0,   -Box n1 = |E|^2,
with n = n0 + Lap(n1). DKG unknowns (psi, V0, V1) solve
    -i g^mu d_mu psi = (V0 + V1) psi,   -Box V0 + V0 = 0,   -Box V1 + V1 = psi^* g0 psi,
and the auxiliary wave Psi (-Box Psi = v psi, Psi = 0, Psi_t = -i g0 psi at t0)
is carried along so that i g^mu d_mu Psi = psi can be monitored.

Both systems run on the periodic box. KGZ also runs on the radial line for a
field E = E_s(r) e_1, using w = r u and a 4th-order stencil with odd reflection
at r = 0 and zero values beyond the last node.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, fields
from enum import Enum
from functools import lru_cache
from pathlib import Path

import numpy as np

from . import grid as gridmod
from . import spectral
from .gamma import STANDARD
from .grid import GridKind, GridSpec, ScalarField, SpinorField, Vec3Field
from .propagators import dirac_evolve_hat, dirac_symbol_apply, scalar_evolve_hat


class Scheme(str, Enum):
    STRANG = "strang-splitting"
    RK4 = "rk4-mol"


class BlowUpError(RuntimeError):
    def __init__(self, t: float, what: str = "state"):
        super().__init__(f"non-finite {what} after the step ending at t={t:.6g}")
        self.t = t


@dataclass(frozen=True)
class IntegratorConfig:
    dt: float
    scheme: Scheme = Scheme.STRANG
    dealias: bool = True
    dirac_mass: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.dirac_mass not in (0.0, 1.0):
            raise ValueError("the Dirac mass must be 0 or 1")

    def validate(self, grid: GridSpec) -> None:
        if self.scheme is Scheme.RK4 and self.dt > 0.5 * grid.h + 1e-15:
            raise ValueError(f"rk4-mol needs dt <= 0.5 h = {0.5 * grid.h:.6g}, got dt={self.dt}")


# ---------------------------------------------------------------- states


@dataclass(frozen=True)
class KGZState:
    E: Vec3Field
    E_t: Vec3Field
    n0: ScalarField
    n0_t: ScalarField
    n1: ScalarField
    n1_t: ScalarField
    t: float

    def __post_init__(self):
        g = self.E.grid
        if any(getattr(self, f.name).grid != g for f in fields(self) if f.name != "t"):
            raise ValueError("KGZ state components live on different grids")

    @property
    def grid(self) -> GridSpec:
        return self.E.grid

    def arrays(self) -> dict[str, np.ndarray]:
        return {f.name: getattr(self, f.name).values for f in fields(self) if f.name != "t"}

    @classmethod
    def from_arrays(cls, grid: GridSpec, t: float, **a) -> "KGZState":
        vec = {"E", "E_t"}
        return cls(
            **{k: (Vec3Field if k in vec else ScalarField)(grid, v, t) for k, v in a.items()}, t=t
        )

    @classmethod
    def from_data(cls, grid: GridSpec, E0, E1, n0, n1, t0: float = 0.0) -> "KGZState":
        """Cauchy data (E, E_t, n, n_t); n1 starts from (0, 0)."""
        z = np.zeros(grid.shape)
        return cls.from_arrays(grid, t0, E=E0, E_t=E1, n0=n0, n0_t=n1, n1=z, n1_t=z)

    def scaled(self, c: float) -> "KGZState":
        return self.from_arrays(self.grid, self.t, **{k: c * v for k, v in self.arrays().items()})


@dataclass(frozen=True)
class DKGState:
    psi: SpinorField
    V0: ScalarField
    V0_t: ScalarField
    V1: ScalarField
    V1_t: ScalarField
    Psi: SpinorField
    Psi_t: SpinorField
    t: float

    def __post_init__(self):
        g = self.psi.grid
        if any(getattr(self, f.name).grid != g for f in fields(self) if f.name != "t"):
            raise ValueError("DKG state components live on different grids")
        if g.kind is not GridKind.BOX:
            raise ValueError("the DKG system runs on the periodic box")

    @property
    def grid(self) -> GridSpec:
        return self.psi.grid

    def arrays(self) -> dict[str, np.ndarray]:
        return {f.name: getattr(self, f.name).values for f in fields(self) if f.name != "t"}

    @classmethod
    def from_arrays(cls, grid: GridSpec, t: float, **a) -> "DKGState":
        spin = {"psi", "Psi", "Psi_t"}
        return cls(
            **{k: (SpinorField if k in spin else ScalarField)(grid, v, t) for k, v in a.items()}, t=t
        )

    @classmethod
    def from_data(cls, grid: GridSpec, psi0, v0, v1, t0: float = 0.0, g=STANDARD) -> "DKGState":
        """Cauchy data (psi, v, v_t); V1 and Psi start as prescribed by the reformulation."""
        psi0 = np.asarray(psi0, dtype=complex)
        z = np.zeros(grid.shape)
        return cls.from_arrays(
            grid, t0, psi=psi0, V0=v0, V0_t=v1, V1=z, V1_t=z,
            Psi=np.zeros_like(psi0), Psi_t=-1j * np.tensordot(g[0], psi0, axes=(1, 0)),
        )

    def scaled(self, c: float) -> "DKGState":
        return self.from_arrays(self.grid, self.t, **{k: c * v for k, v in self.arrays().items()})


# ---------------------------------------------------------------- helpers

_G0_DIAG = np.real(np.diag(STANDARD[0]))  # (1, 1, -1, -1)


def _sig(ndim_tail: int) -> np.ndarray:
    return _G0_DIAG.reshape((4,) + (1,) * ndim_tail)


def _bar_density(psi: np.ndarray) -> np.ndarray:
    """psi^* g0 psi, real."""
    a2 = np.abs(psi) ** 2
    return a2[0] + a2[1] - a2[2] - a2[3]


def _lap(a: np.ndarray, wn) -> np.ndarray:
    return spectral.laplacian(a, wn)


def _maybe_dealias(a: np.ndarray, wn, on: bool) -> np.ndarray:
    return spectral.dealias(a, wn) if on else a


def _check_finite(t: float, *arrays) -> None:
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise BlowUpError(t)


# ---------------------------------------------------------------- radial operator


@lru_cache(maxsize=8)
def radial_operator(extent: float, points: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(A, lam, Q): 4th-order d^2/dr^2 on odd w, A = Q diag(lam) Q^T."""
    grid = GridSpec.radial(extent, points)
    n = grid.shape[0]
    h = grid.h
    A = np.zeros((n, n))
    c = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / (12.0 * h * h)
    for i in range(n):
        for off, w in zip(range(-2, 3), c):
            j = i + off
            if j >= n:
                continue
            if j < 0:
                A[i, -j - 1] -= w  # w(-r) = -w(r); index -1 -> 0, -2 -> 1
            else:
                A[i, j] += w
    lam, Q = np.linalg.eigh(A)
    for arr in (A, lam, Q):
        arr.setflags(write=False)
    return A, lam, Q


@dataclass(frozen=True)
class _RadialGroup:
    Q: np.ndarray
    cos: np.ndarray
    sinc: np.ndarray
    wsin: np.ndarray

    def evolve(self, w: np.ndarray, wt: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        a = self.Q.T @ w
        b = self.Q.T @ wt
        return self.Q @ (self.cos * a + self.sinc * b), self.Q @ (-self.wsin * a + self.cos * b)


@lru_cache(maxsize=32)
def radial_group(extent: float, points: int, t: float, mass2: float) -> _RadialGroup:
    _, lam, Q = radial_operator(extent, points)
    om = np.sqrt(np.maximum(-lam, 0.0) + mass2)
    zero = om == 0.0
    s = np.sin(t * om)
    return _RadialGroup(Q, np.cos(t * om), np.where(zero, t, s / np.where(zero, 1.0, om)), om * s)


def radial_laplacian(u: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Lap u = (r u)'' / r for a radial function u."""
    A, _, _ = radial_operator(grid.extent, grid.points)
    r = grid.axis
    return (A @ (r * u)) / r


# ---------------------------------------------------------------- KGZ integrators


def _kgz_box_step(a: dict, t: float, grid: GridSpec, cfg: IntegratorConfig) -> dict:
    wn = grid.wavenumbers()
    dt = cfg.dt
    E, Et, n0, n0t, n1, n1t = (a[k] for k in ("E", "E_t", "n0", "n0_t", "n1", "n1_t"))
    if cfg.scheme is Scheme.STRANG:

        def kick(E, Et, n0, n1, n1t, tau):
            m = n0 + _lap(n1, wn)
            force = _maybe_dealias(m * E, wn, cfg.dealias)
            src = _maybe_dealias(np.sum(E * E, axis=0), wn, cfg.dealias)
            return Et - tau * force, n1t + tau * src

        Et, n1t = kick(E, Et, n0, n1, n1t, 0.5 * dt)
        Eh, Eth = scalar_evolve_hat(spectral.fft3(E), spectral.fft3(Et), grid, dt, 1.0)
        Wh = spectral.fft3(np.stack([n0, n1]))
        Wth = spectral.fft3(np.stack([n0t, n1t]))
        Wh, Wth = scalar_evolve_hat(Wh, Wth, grid, dt, 0.0)
        E, Et = spectral.ifft3(Eh, real=True), spectral.ifft3(Eth, real=True)
        (n0, n1), (n0t, n1t) = spectral.ifft3(Wh, real=True), spectral.ifft3(Wth, real=True)
        Et, n1t = kick(E, Et, n0, n1, n1t, 0.5 * dt)
    else:
        n0h, n0th = spectral.fft3(n0), spectral.fft3(n0t)

        def n0_at(s):
            return spectral.ifft3(scalar_evolve_hat(n0h, n0th, grid, s, 0.0)[0], real=True)

        def rhs(y, m0):
            E, Et, n1, n1t = y
            lap_n1 = _lap(n1, wn)
            force = _maybe_dealias((m0 + lap_n1) * E, wn, cfg.dealias)
            src = _maybe_dealias(np.sum(E * E, axis=0), wn, cfg.dealias)
            return (Et, _lap(E, wn) - E - force, n1t, lap_n1 + src)

        y = (E, Et, n1, n1t)
        n0_mid, n0_end = n0_at(0.5 * dt), n0_at(dt)
        y = _rk4(rhs, y, dt, (n0, n0_mid, n0_mid, n0_end))
        E, Et, n1, n1t = y
        n0, n0t = (spectral.ifft3(x, real=True) for x in scalar_evolve_hat(n0h, n0th, grid, dt, 0.0))
    return dict(E=E, E_t=Et, n0=n0, n0_t=n0t, n1=n1, n1_t=n1t)


def _rk4(rhs, y, dt, aux):
    k1 = rhs(y, aux[0])
    k2 = rhs(tuple(v + 0.5 * dt * k for v, k in zip(y, k1)), aux[1])
    k3 = rhs(tuple(v + 0.5 * dt * k for v, k in zip(y, k2)), aux[2])
    k4 = rhs(tuple(v + dt * k for v, k in zip(y, k3)), aux[3])
    return tuple(v + dt / 6.0 * (p + 2 * q + 2 * s + w) for v, p, q, s, w in zip(y, k1, k2, k3, k4))


def _kgz_radial_step(a: dict, t: float, grid: GridSpec, cfg: IntegratorConfig) -> dict:
    """Radial KGZ in w = r u variables; only the first component of E is evolved."""
    r = grid.axis
    A, _, _ = radial_operator(grid.extent, grid.points)
    dt = cfg.dt
    wE, wEt = r * a["E"][0], r * a["E_t"][0]
    w0, w0t = r * a["n0"], r * a["n0_t"]
    w1, w1t = r * a["n1"], r * a["n1_t"]
    wave = radial_group(grid.extent, grid.points, dt, 0.0)
    if cfg.scheme is Scheme.STRANG:
        kg = radial_group(grid.extent, grid.points, dt, 1.0)

        def kick(wE, wEt, w0, w1, w1t, tau):
            n = (w0 + A @ w1) / r
            return wEt - tau * n * wE, w1t + tau * wE * wE / r

        wEt, w1t = kick(wE, wEt, w0, w1, w1t, 0.5 * dt)
        wE, wEt = kg.evolve(wE, wEt)
        w0, w0t = wave.evolve(w0, w0t)
        w1, w1t = wave.evolve(w1, w1t)
        wEt, w1t = kick(wE, wEt, w0, w1, w1t, 0.5 * dt)
    else:
        half = radial_group(grid.extent, grid.points, 0.5 * dt, 0.0)
        w0_mid = half.evolve(w0, w0t)[0]
        w0_end, w0t_end = wave.evolve(w0, w0t)

        def rhs(y, m0):
            wE, wEt, w1, w1t = y
            lap_w1 = A @ w1
            n = (m0 + lap_w1) / r
            return (wEt, A @ wE - wE - n * wE, w1t, lap_w1 + wE * wE / r)

        wE, wEt, w1, w1t = _rk4(rhs, (wE, wEt, w1, w1t), dt, (w0, w0_mid, w0_mid, w0_end))
        w0, w0t = w0_end, w0t_end
    z = np.zeros_like(r)
    return dict(
        E=np.stack([wE / r, z, z]), E_t=np.stack([wEt / r, z, z]),
        n0=w0 / r, n0_t=w0t / r, n1=w1 / r, n1_t=w1t / r,
    )


def kgz_step(state: KGZState, cfg: IntegratorConfig) -> KGZState:
    """One step of length ``cfg.dt``; raises :class:`BlowUpError` on non-finite output."""
    grid = state.grid
    cfg.validate(grid)
    a = state.arrays()
    if grid.kind is GridKind.BOX:
        out = _kgz_box_step(a, state.t, grid, cfg)
    else:
        if np.any(a["E"][1:] != 0) or np.any(a["E_t"][1:] != 0):
            raise ValueError("the radial reduction carries E along e_1 only")
        out = _kgz_radial_step(a, state.t, grid, cfg)
    t = state.t + cfg.dt
    _check_finite(t, *out.values())
    return KGZState.from_arrays(grid, t, **out)


# ---------------------------------------------------------------- DKG integrators


def _dkg_kick(psi, V1t, Psit, v, tau, wn, dealias):
    """Exact flow of the node-wise couplings over time tau with v frozen."""
    sig = _sig(v.ndim)
    dpsi = (np.exp(1j * sig * v * tau) - 1.0) * psi
    dV1t = tau * _bar_density(psi)
    if dealias:
        dpsi = spectral.dealias(dpsi, wn)
        dV1t = spectral.dealias(dV1t, wn)
    # int_0^tau v psi(s) ds = -i sig (phase - 1) psi, sig constant per component
    return psi + dpsi, V1t + dV1t, Psit - 1j * sig * dpsi


def _dkg_step_arrays(a: dict, t: float, grid: GridSpec, cfg: IntegratorConfig) -> dict:
    wn = grid.wavenumbers()
    dt, m = cfg.dt, cfg.dirac_mass
    psi, V0, V0t, V1, V1t, Psi, Psit = (a[k] for k in ("psi", "V0", "V0_t", "V1", "V1_t", "Psi", "Psi_t"))
    if cfg.scheme is Scheme.STRANG:
        psi, V1t, Psit = _dkg_kick(psi, V1t, Psit, V0 + V1, 0.5 * dt, wn, cfg.dealias)
        psi = spectral.ifft3(dirac_evolve_hat(spectral.fft3(psi), grid, dt, STANDARD, m))
        Vh, Vth = scalar_evolve_hat(spectral.fft3(np.stack([V0, V1])), spectral.fft3(np.stack([V0t, V1t])),
                                    grid, dt, 1.0)
        (V0, V1), (V0t, V1t) = spectral.ifft3(Vh, real=True), spectral.ifft3(Vth, real=True)
        Ph, Pth = scalar_evolve_hat(spectral.fft3(Psi), spectral.fft3(Psit), grid, dt, 0.0)
        Psi, Psit = spectral.ifft3(Ph), spectral.ifft3(Pth)
        psi, V1t, Psit = _dkg_kick(psi, V1t, Psit, V0 + V1, 0.5 * dt, wn, cfg.dealias)
    else:
        V0h, V0th = spectral.fft3(V0), spectral.fft3(V0t)

        def V0_at(s):
            return spectral.ifft3(scalar_evolve_hat(V0h, V0th, grid, s, 1.0)[0], real=True)

        sig = _sig(3)

        def rhs(y, w0):
            psi, V1, V1t, Psi, Psit = y
            v = w0 + V1
            ph = spectral.fft3(psi)
            lin = -1j * spectral.ifft3(dirac_symbol_apply(ph, wn, STANDARD, m))
            coup = _maybe_dealias(1j * sig * v * psi, wn, cfg.dealias)
            src = _maybe_dealias(_bar_density(psi), wn, cfg.dealias)
            vpsi = _maybe_dealias(v * psi, wn, cfg.dealias)
            return (lin + coup, V1t, _lap(V1, wn) - V1 + src, Psit, _lap(Psi, wn) + vpsi)

        mid = V0_at(0.5 * dt)
        y = _rk4(rhs, (psi, V1, V1t, Psi, Psit), dt, (V0, mid, mid, V0_at(dt)))
        psi, V1, V1t, Psi, Psit = y
        V0, V0t = (spectral.ifft3(x, real=True) for x in scalar_evolve_hat(V0h, V0th, grid, dt, 1.0))
    return dict(psi=psi, V0=V0, V0_t=V0t, V1=V1, V1_t=V1t, Psi=Psi, Psi_t=Psit)


def dkg_step(state: DKGState, cfg: IntegratorConfig) -> DKGState:
    grid = state.grid
    cfg.validate(grid)
    out = _dkg_step_arrays(state.arrays(), state.t, grid, cfg)
    t = state.t + cfg.dt
    _check_finite(t, *out.values())
    return DKGState.from_arrays(grid, t, **out)


def step(state, cfg: IntegratorConfig):
    return kgz_step(state, cfg) if isinstance(state, KGZState) else dkg_step(state, cfg)


def evolve(state, cfg: IntegratorConfig, t_end: float, callback=None):
    """Step until ``t_end`` (rounded to a whole number of steps); ``callback(state)`` sees every state."""
    nsteps = int(round((t_end - state.t) / cfg.dt))
    if nsteps < 0 or abs(state.t + nsteps * cfg.dt - t_end) > 1e-9 * max(1.0, abs(t_end)):
        raise ValueError("t_end - t must be a non-negative multiple of dt")
    if callback is not None:
        callback(state)
    for _ in range(nsteps):
        state = step(state, cfg)
        if callback is not None:
            callback(state)
    return state


# ---------------------------------------------------------------- reconstruction


def reconstruct(state) -> tuple[ScalarField, ScalarField]:
    """(n, n_t) = n0 + Lap n1 for KGZ, (v, v_t) = V0 + V1 for DKG."""
    grid = state.grid
    if isinstance(state, KGZState):
        if grid.kind is GridKind.BOX:
            wn = grid.wavenumbers()
            lap = _lap(np.stack([state.n1.values, state.n1_t.values]), wn)
        else:
            lap = np.stack([radial_laplacian(state.n1.values, grid), radial_laplacian(state.n1_t.values, grid)])
        return (
            ScalarField(grid, state.n0.values + lap[0], state.t),
            ScalarField(grid, state.n0_t.values + lap[1], state.t),
        )
    return (
        ScalarField(grid, state.V0.values + state.V1.values, state.t),
        ScalarField(grid, state.V0_t.values + state.V1_t.values, state.t),
    )


# ---------------------------------------------------------------- transformation identities

TRANSFORM_NAMES = ("wave-representation", "transformed-wave", "wave-dirac", "transformed-kg", "ghost-representation")


def _time_derivs(series: list[np.ndarray], dt: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    v = series
    d1 = (v[0] - 8 * v[1] + 8 * v[3] - v[4]) / (12 * dt)
    d2 = (-v[0] + 16 * v[1] - 30 * v[2] + 16 * v[3] - v[4]) / (12 * dt * dt)
    return v[2], d1, d2


def transform_residuals(bracket: list[DKGState], exclusion: float = 2.0) -> dict[str, float]:
    """L^2 residuals of the five identities at the centre of ``bracket`` (5 states).

    * wave-representation:  i g^mu d_mu Psi - psi
    * transformed-wave:     -Box(Psi + v psi) - [(psi^* g0 psi) psi + i g^mu v d_mu(v psi) + 2 Q0(v, psi)]
    * wave-dirac:           -Box psi - [i (d_mu v) g^mu psi - v^2 psi]
    * transformed-kg:       (-Box + 1)(V1 - psi^* g0 psi) - [2 v^2 psi^* g0 psi - 2 Q0(psi^*, g0 psi)]
    * ghost-representation: [psi]_- - i (I - w_b g0 g^b) g^a G_a Psi, off the origin ball
    """
    if len(bracket) < 5:
        raise ValueError(f"transform residuals need >= 5 adjacent states, got {len(bracket)}")
    c = len(bracket) // 2
    states = bracket[c - 2 : c + 3]
    ts = np.array([s.t for s in states])
    dts = np.diff(ts)
    dt = float(dts.mean())
    if np.ptp(dts) > 1e-9 * dt:
        raise ValueError("states must be equally spaced in time")
    grid = states[0].grid
    wn = grid.wavenumbers()
    g = STANDARD
    hv = grid.h**3

    def ap(m, x):
        return np.tensordot(m, x, axes=(1, 0))

    def grad(x):
        return spectral.gradient(x, wn)

    def nrm(x, mask=None):
        d = np.abs(x) ** 2
        if d.ndim == 4:
            d = d.sum(axis=0)
        if mask is not None:
            d = d * mask
        return float(np.sqrt(d.sum() * hv))

    psi, psi_t, psi_tt = _time_derivs([s.psi.values for s in states], dt)
    Psi, Psi_t, _ = _time_derivs([s.Psi.values for s in states], dt)
    vs = [s.V0.values + s.V1.values for s in states]
    v, v_t, _ = _time_derivs(vs, dt)
    gv = grad(v)
    gpsi = grad(psi)
    out = {}

    # wave representation
    r1 = 1j * ap(g[0], Psi_t) + sum(1j * ap(g[a + 1], q) for a, q in enumerate(grad(Psi))) - psi
    out["wave-representation"] = nrm(r1)

    # transformed wave equation
    tilde = [s.Psi.values + vv * s.psi.values for s, vv in zip(states, vs)]
    T0, _, T_tt = _time_derivs(tilde, dt)
    vpsi_series = [vv * s.psi.values for s, vv in zip(states, vs)]
    vpsi, vpsi_t, _ = _time_derivs(vpsi_series, dt)
    mbox_tilde = T_tt - _lap(T0, wn)
    bar = _bar_density(psi)
    gamma_term = 1j * v * (ap(g[0], vpsi_t) + sum(ap(g[a + 1], q) for a, q in enumerate(grad(vpsi))))
    q0_vpsi = v_t * psi_t - sum(gv[a] * gpsi[a] for a in range(3))
    r2 = mbox_tilde - (bar * psi + gamma_term + 2 * q0_vpsi)
    out["transformed-wave"] = nrm(r2)

    # second-order Dirac equation
    dv_gamma_psi = ap(g[0], v_t * psi) + sum(ap(g[a + 1], gv[a] * psi) for a in range(3))
    r3 = psi_tt - _lap(psi, wn) - (1j * dv_gamma_psi - v * v * psi)
    out["wave-dirac"] = nrm(r3)

    # transformed KG equation
    Vt_series = [s.V1.values - _bar_density(s.psi.values) for s in states]
    Vt, _, Vt_tt = _time_derivs(Vt_series, dt)
    g0psi_t = ap(g[0], psi_t)
    q0_bar = np.real(np.sum(np.conj(psi_t) * g0psi_t, axis=0))
    for a in range(3):
        q0_bar -= np.real(np.sum(np.conj(gpsi[a]) * ap(g[0], gpsi[a]), axis=0))
    r4 = Vt_tt - _lap(Vt, wn) + Vt - (2 * v * v * bar - 2 * q0_bar)
    out["transformed-kg"] = nrm(r4)

    # ghost representation
    r = grid.radius()
    keep = r >= exclusion * grid.h
    safe = np.where(keep, r, 1.0)
    om = [c_ / safe for c_ in grid.coords()]
    gPsi = grad(Psi)

    def minus(x):
        return x - sum(om[a] * ap(g.alpha[a], x) for a in range(3))

    G = [gPsi[a] + om[a] * Psi_t for a in range(3)]
    rhs = 1j * minus(sum(ap(g[a + 1], G[a]) for a in range(3)))
    out["ghost-representation"] = nrm(minus(psi) - rhs, keep)
    return out


# ---------------------------------------------------------------- checkpoints

CHECKPOINT_MANIFEST = "manifest.txt"


def save_checkpoint(state, directory: str | Path, cfg: IntegratorConfig | None = None) -> Path:
    """One binary snapshot per component plus a key=value manifest."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    kind = "kgz" if isinstance(state, KGZState) else "dkg"
    g = state.grid
    lines = [
        f"system={kind}",
        f"t={state.t!r}",
        f"grid.kind={g.kind.value}",
        f"grid.extent={g.extent!r}",
        f"grid.points={g.points}",
    ]
    if cfg is not None:
        lines += [
            f"dt={cfg.dt!r}",
            f"scheme={cfg.scheme.value}",
            f"dealias={'true' if cfg.dealias else 'false'}",
            f"dirac_mass={cfg.dirac_mass!r}",
        ]
    names = []
    for f in fields(state):
        if f.name == "t":
            continue
        gridmod.save(getattr(state, f.name), d / f"{f.name}.kgzf")
        names.append(f.name)
    lines.append("components=" + ",".join(names))
    (d / CHECKPOINT_MANIFEST).write_text("\n".join(lines) + "\n")
    return d


def read_manifest(path: str | Path) -> dict[str, str]:
    out = {}
    for line in Path(path).read_text().splitlines():
        if line.strip() and not line.startswith("#"):
            k, _, v = line.partition("=")
            out[k.strip()] = v.strip()
    return out


def load_checkpoint(directory: str | Path):
    d = Path(directory)
    man = read_manifest(d / CHECKPOINT_MANIFEST)
    cls = KGZState if man["system"] == "kgz" else DKGState
    comps = {name: gridmod.load(d / f"{name}.kgzf") for name in man["components"].split(",")}
    return cls(**comps, t=float(man["t"]))
