"""Exact free evolution on the periodic box and the Kirchhoff spherical-mean formula."""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.special import roots_legendre

from . import spectral
from .gamma import STANDARD, GammaSet
from .grid import GridKind, GridSpec, ScalarField, SpinorField
from .vectorfields import Jet


class PropagatorKind(str, Enum):
    WAVE = "wave-SW"
    KLEIN_GORDON = "kleinGordon-SKG"
    DIRAC = "dirac-expD"


@dataclass(frozen=True)
class WaveData:
    """Cauchy data (u, u_t) at time ``t0`` for the wave or Klein-Gordon equation."""

    u0: ScalarField
    u1: ScalarField
    t0: float = 0.0

    def __post_init__(self):
        if self.u0.grid != self.u1.grid:
            raise ValueError("u0 and u1 live on different grids")
        for f in (self.u0, self.u1):
            if abs(f.t - self.t0) > 1e-12 * max(1.0, abs(self.t0)):
                raise ValueError(f"field time {f.t} differs from data time {self.t0}")

    @property
    def grid(self) -> GridSpec:
        return self.u0.grid


def _check_box(grid: GridSpec) -> None:
    if grid.kind is not GridKind.BOX:
        raise ValueError("exact propagators act on the periodic box")


# ---------------------------------------------------------------- Fourier multipliers


@dataclass(frozen=True)
class _ScalarMultipliers:
    cos: np.ndarray  # cos(t w)
    sinc: np.ndarray  # sin(t w) / w, with limit t at w = 0
    wsin: np.ndarray  # w sin(t w)


@lru_cache(maxsize=32)
def _scalar_multipliers(n: int, h: float, t: float, mass2: float) -> _ScalarMultipliers:
    wn = spectral.wavenumbers(n, h)
    w = np.sqrt(wn.k2 + mass2)
    c = np.cos(t * w)
    s = np.sin(t * w)
    zero = w == 0.0
    sinc = np.where(zero, t, s / np.where(zero, 1.0, w))
    return _ScalarMultipliers(c, sinc, w * s)


def scalar_evolve_hat(uhat, vhat, grid: GridSpec, t: float, mass2: float):
    """Fourier-space (u, u_t) -> values at time +t for -Box u + mass2 u = 0."""
    m = _scalar_multipliers(grid.points, grid.h, float(t), float(mass2))
    return m.cos * uhat + m.sinc * vhat, -m.wsin * uhat + m.cos * vhat


def scalar_evolve(u: np.ndarray, v: np.ndarray, grid: GridSpec, t: float, mass2: float):
    real = not (np.iscomplexobj(u) or np.iscomplexobj(v))
    uh, vh = scalar_evolve_hat(spectral.fft3(u), spectral.fft3(v), grid, t, mass2)
    return spectral.ifft3(uh, real=real), spectral.ifft3(vh, real=real)


def dirac_symbol_apply(psi_hat: np.ndarray, wn: spectral.Wavenumbers, g: GammaSet = STANDARD,
                       mass: float = 0.0) -> np.ndarray:
    """D(k) psi_hat = (gamma^0 gamma^a k_a + mass gamma^0) psi_hat on (4, N, N, N) arrays."""
    out = np.zeros_like(psi_hat)
    for a in range(3):
        out += wn.k[a] * np.tensordot(g.alpha[a], psi_hat, axes=(1, 0))
    if mass:
        out += mass * np.tensordot(g[0], psi_hat, axes=(1, 0))
    return out


def dirac_evolve_hat(psi_hat: np.ndarray, grid: GridSpec, t: float, g: GammaSet = STANDARD,
                     mass: float = 0.0) -> np.ndarray:
    """exp(-i t D(k)) = cos(t l) I - i sin(t l) D(k) / l, l = sqrt(|k|^2 + m^2)."""
    wn = grid.wavenumbers()
    lam = np.sqrt(wn.k2 + mass * mass)
    zero = lam == 0.0
    c = np.cos(t * lam)
    s_over = np.where(zero, 0.0, np.sin(t * lam) / np.where(zero, 1.0, lam))
    return c * psi_hat - 1j * s_over * dirac_symbol_apply(psi_hat, wn, g, mass)


def dirac_evolve(psi: np.ndarray, grid: GridSpec, t: float, g: GammaSet = STANDARD, mass: float = 0.0):
    return spectral.ifft3(dirac_evolve_hat(spectral.fft3(psi), grid, t, g, mass))


def propagate(kind: PropagatorKind, state, dt: float, mass: float = 0.0, g: GammaSet = STANDARD):
    """Exact free evolution by ``dt``.

    ``state`` is :class:`WaveData` for the wave and Klein-Gordon kinds and a
    :class:`SpinorField` for the Dirac kind. ``mass`` only affects Dirac.
    """
    kind = PropagatorKind(kind)
    if kind is PropagatorKind.DIRAC:
        if not isinstance(state, SpinorField):
            raise TypeError("Dirac propagation needs a SpinorField")
        _check_box(state.grid)
        return SpinorField(state.grid, dirac_evolve(state.values, state.grid, dt, g, mass), state.t + dt)
    if not isinstance(state, WaveData):
        raise TypeError("wave and Klein-Gordon propagation need WaveData")
    _check_box(state.grid)
    m2 = 1.0 if kind is PropagatorKind.KLEIN_GORDON else 0.0
    u, v = scalar_evolve(state.u0.values, state.u1.values, state.grid, dt, m2)
    t = state.t0 + dt
    return WaveData(ScalarField(state.grid, u, t), ScalarField(state.grid, v, t), t)


def natural_energy_arrays(u: np.ndarray, v: np.ndarray, grid: GridSpec, mass2: float) -> float:
    """1/2 int (u_t^2 + |grad u|^2 + mass2 u^2) dx by Parseval.

    Uses the same symbol |k|^2 as the propagator, so the value is conserved
    to roundoff even for data with content at the Nyquist frequency.
    """
    wn = grid.wavenumbers()
    uh, vh = spectral.fft3(u), spectral.fft3(v)
    dens = np.abs(vh) ** 2 + (wn.k2 + mass2) * np.abs(uh) ** 2
    return 0.5 * float(np.sum(dens)) * grid.h**3 / uh.size


def free_jet(kind: PropagatorKind, state, order: int, mass: float = 0.0, g: GammaSet = STANDARD) -> Jet:
    """Time-derivative jet from the free equation, exact up to spectral accuracy."""
    kind = PropagatorKind(kind)
    if kind is PropagatorKind.DIRAC:
        grid = state.grid
        wn = grid.wavenumbers()
        hats = [spectral.fft3(state.values)]
        for _ in range(order):
            hats.append(-1j * dirac_symbol_apply(hats[-1], wn, g, mass))
        return Jet(grid, state.t, [spectral.ifft3(x) for x in hats], 4)
    grid = state.grid
    wn = grid.wavenumbers()
    m2 = 1.0 if kind is PropagatorKind.KLEIN_GORDON else 0.0
    hats = [spectral.fft3(state.u0.values), spectral.fft3(state.u1.values)]
    while len(hats) < order + 1:
        hats.append(-(wn.k2 + m2) * hats[-2])
    return Jet(grid, state.t0, [spectral.ifft3(x, real=True) for x in hats[: order + 1]], 0)


# ---------------------------------------------------------------- Kirchhoff formula


@dataclass(frozen=True)
class ClosedFormData:
    """Wave data as callables of (x1, x2, x3); ``grad_u0`` returns three arrays."""

    u0: Callable
    grad_u0: Callable
    u1: Callable
    t0: float = 0.0


class QuadratureError(RuntimeError):
    pass


@lru_cache(maxsize=16)
def sphere_rule(n_theta: int, n_phi: int) -> tuple[np.ndarray, np.ndarray]:
    """Unit-sphere nodes (M, 3) and weights summing to 1 (normalized area measure)."""
    z, wz = roots_legendre(n_theta)
    phi = 2.0 * np.pi * np.arange(n_phi) / n_phi
    st = np.sqrt(1.0 - z * z)
    nodes = np.stack(
        [np.outer(st, np.cos(phi)).ravel(), np.outer(st, np.sin(phi)).ravel(), np.repeat(z, n_phi)], axis=1
    )
    w = np.repeat(wz, n_phi) / (2.0 * n_phi)
    return nodes, w


def _kirchhoff_once(data: ClosedFormData, t: float, x: np.ndarray, n_theta: int, n_phi: int,
                    chunk: int = 2_000_000) -> np.ndarray:
    nodes, w = sphere_rule(n_theta, n_phi)
    s = t - data.t0
    out = np.empty(x.shape[0])
    step = max(1, chunk // nodes.shape[0])
    for i in range(0, x.shape[0], step):
        xs = x[i : i + step, None, :] + s * nodes[None, :, :]
        y1, y2, y3 = xs[..., 0], xs[..., 1], xs[..., 2]
        g1, g2, g3 = data.grad_u0(y1, y2, y3)
        radial = g1 * nodes[:, 0] + g2 * nodes[:, 1] + g3 * nodes[:, 2]
        integrand = data.u0(y1, y2, y3) + s * radial + s * data.u1(y1, y2, y3)
        out[i : i + step] = np.asarray(integrand) @ w
    return out


def kirchhoff_eval(
    data: ClosedFormData, t: float, x, n_theta: int = 64, n_phi: int = 128, tol: float = 1e-8,
    return_error: bool = False,
):
    """u(t, x) = mean over |w|=1 of [u0 + s grad u0 . w + s u1](x + s w), s = t - t0.

    Product Gauss-Legendre (cos theta) by uniform-azimuth rule. The error is
    estimated against the rule with half the points in each direction;
    :class:`QuadratureError` is raised when it exceeds ``tol``.
    """
    if t < data.t0:
        raise ValueError("Kirchhoff evaluation needs t >= t0")
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    if pts.shape[-1] != 3:
        raise ValueError("points must have three coordinates")
    fine = _kirchhoff_once(data, t, pts, n_theta, n_phi)
    coarse = _kirchhoff_once(data, t, pts, max(2, n_theta // 2), max(2, n_phi // 2))
    err = float(np.max(np.abs(fine - coarse))) if fine.size else 0.0
    if err > tol:
        raise QuadratureError(
            f"sphere quadrature error estimate {err:.3g} exceeds tolerance {tol:.3g}; raise n_theta/n_phi"
        )
    vals = fine if np.ndim(x) > 1 else fine[0]
    return (vals, err) if return_error else vals


# ---------------------------------------------------------------- positivity


@dataclass(frozen=True)
class PositivityVerdict:
    certified: bool
    witness: tuple[int, ...] | None = None
    reason: str = ""
    margin: float = 0.0  # min over nodes of min(u0, u1 - |grad u0|)

    def __bool__(self) -> bool:
        return self.certified


def positivity_certificate(data: WaveData, atol: float | None = None) -> PositivityVerdict:
    """Certified iff u0 >= -atol and u1 >= |grad u0| - atol at every node (spectral gradient).

    The default ``atol`` is the roundoff level of the spectral gradient,
    32 eps (max|u1| + k_max max|u0|). The witness is the first violating node
    in row-major order.
    """
    grid = data.grid
    _check_box(grid)
    u0, u1 = data.u0.values, data.u1.values
    gabs = np.sqrt(sum(gq**2 for gq in spectral.gradient(u0, grid.wavenumbers())))
    if atol is None:
        atol = 32.0 * np.finfo(float).eps * (np.abs(u1).max() + np.pi / grid.h * np.abs(u0).max())
    m0 = u0
    m1 = u1 - gabs
    margin = float(min(m0.min(), m1.min()))
    bad0 = m0 < -atol
    bad1 = m1 < -atol
    bad = bad0 | bad1
    if not bad.any():
        return PositivityVerdict(True, None, "", margin)
    flat = int(np.flatnonzero(bad.ravel())[0])
    idx = tuple(int(i) for i in np.unravel_index(flat, bad.shape))
    reason = "u0 < 0" if bad0[idx] else "u1 < |grad u0|"
    return PositivityVerdict(False, idx, reason, margin)
