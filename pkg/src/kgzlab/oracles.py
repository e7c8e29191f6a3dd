"""Slow, independent reference computations.

Nothing here reuses the spectral machinery: derivatives are finite
differences, integrals go through scipy's adaptive quadrature, gamma-matrix
identities are evaluated in exact arithmetic, and the reference integrator is
classical rk4 on 4th-order periodic stencils.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
import sympy as sp
from scipy import integrate

from .grid import GridKind, GridSpec


class OracleError(RuntimeError):
    pass


@dataclass(frozen=True)
class OracleConfig:
    """Refinement ladder of (h, dt) pairs and per-check tolerances."""

    levels: tuple[tuple[float, float], ...] = ((0.5, 0.1), (0.25, 0.05))
    tolerances: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        lv = tuple((float(h), float(dt)) for h, dt in self.levels)
        object.__setattr__(self, "levels", lv)
        for (h0, d0), (h1, d1) in zip(lv, lv[1:]):
            if not (h1 < h0 and d1 < d0):
                raise ValueError("refinement levels must be strictly decreasing in h and dt")
        if any(h <= 0 or dt <= 0 for h, dt in lv):
            raise ValueError("refinement levels must be positive")
        for k, v in self.tolerances.items():
            if not v > 0:
                raise ValueError(f"tolerance {k!r} must be positive")

    def tolerance(self, name: str, default: float | None = None) -> float:
        if name in self.tolerances:
            return float(self.tolerances[name])
        if default is None:
            raise KeyError(name)
        return default


# ---------------------------------------------------------------- derivatives


def _nested_central(f: Callable, x: np.ndarray, axes: Sequence[int], h: float) -> float:
    if not axes:
        return f(x)
    a, rest = axes[0], axes[1:]
    e = np.zeros_like(x)
    e[a] = h
    return (_nested_central(f, x + e, rest, h) - _nested_central(f, x - e, rest, h)) / (2.0 * h)


def fd_derivative(
    f: Callable, point, order: int = 1, direction: int | Sequence[int] = 0,
    h0: float = 0.1, levels: int = 6, tol: float = 1e-8,
) -> tuple[float, float]:
    """Richardson-extrapolated central difference and its error estimate.

    ``direction`` is an axis, differentiated ``order`` times, or a sequence of
    axes for a mixed derivative. Nested central differences have an error
    expansion in even powers of h, so the Neville tableau uses factors 4^k.
    Raises :class:`OracleError` when the error estimate stays above ``tol``.
    """
    x = np.atleast_1d(np.asarray(point, dtype=float))
    g = (lambda y: f(y[0])) if np.ndim(point) == 0 else f
    axes = tuple(direction) if not isinstance(direction, (int, np.integer)) else (int(direction),) * order
    table: list[list[float]] = []
    best, err = None, math.inf
    for k in range(levels):
        row = [_nested_central(g, x, axes, h0 / 2**k)]
        for j in range(1, k + 1):
            row.append(row[j - 1] + (row[j - 1] - table[k - 1][j - 1]) / (4**j - 1))
        table.append(row)
        if k:
            e = abs(row[-1] - table[k - 1][-1])
            if e < err:
                best, err = row[-1], e
    if err > tol:
        raise OracleError(f"Richardson extrapolation did not converge (error estimate {err:.3g})")
    return best, err


# ---------------------------------------------------------------- quadrature and ODEs


def quadrature_oracle(f: Callable[[float], float], a: float, b: float, tol: float = 1e-12) -> tuple[float, float]:
    """Adaptive Gauss-Kronrod integral of f over [a, b] with its error estimate."""
    val, err = integrate.quad(f, a, b, epsabs=tol, epsrel=tol, limit=500)
    return float(val), float(err)


def radial_integral_oracle(f: Callable[[float], float], r_max: float, tol: float = 1e-12) -> float:
    """4 pi int_0^R r^2 f(r) dr."""
    return 4.0 * math.pi * quadrature_oracle(lambda r: r * r * f(r), 0.0, r_max, tol)[0]


def sphere_mean_oracle(f: Callable, x: Sequence[float], s: float, tol: float = 1e-11) -> float:
    """Mean of f over the sphere |y - x| = s by nested adaptive quadrature."""
    x = np.asarray(x, float)

    def integrand(phi, theta):
        w = np.array([math.sin(theta) * math.cos(phi), math.sin(theta) * math.sin(phi), math.cos(theta)])
        return float(f(*(x + s * w))) * math.sin(theta)

    val, _ = integrate.dblquad(integrand, 0.0, math.pi, 0.0, 2.0 * math.pi, epsabs=tol, epsrel=tol)
    return val / (4.0 * math.pi)


def ode_oracle(rhs: Callable, y0: Sequence[float], t_end: float, t_eval: Sequence[float] | None = None,
               rtol: float = 1e-12, atol: float = 1e-14) -> np.ndarray:
    """High-order adaptive solution of y' = rhs(t, y); rows follow ``t_eval``."""
    t_eval = np.asarray(t_eval if t_eval is not None else [t_end], float)
    sol = integrate.solve_ivp(rhs, (0.0, t_end), np.asarray(y0, float), method="DOP853",
                              t_eval=t_eval, rtol=rtol, atol=atol)
    if not sol.success:
        raise OracleError(sol.message)
    return sol.y.T


# ---------------------------------------------------------------- gamma matrices


def oracle_gammas() -> dict[str, sp.Matrix]:
    """Dirac representation in exact arithmetic: g0 = diag(1,1,-1,-1), g^a = [[0, s_a], [-s_a, 0]]."""
    s = [sp.Matrix([[0, 1], [1, 0]]), sp.Matrix([[0, -sp.I], [sp.I, 0]]), sp.Matrix([[1, 0], [0, -1]])]
    z = sp.zeros(2)
    out = {"g0": sp.diag(1, 1, -1, -1), "I": sp.eye(4), "Z": sp.zeros(4)}
    for a in range(3):
        out[f"g{a + 1}"] = sp.Matrix(sp.BlockMatrix([[z, s[a]], [-s[a], z]]))
    return out


def matrix_oracle(expression: str, **symbols) -> sp.Matrix:
    """Evaluate a matrix expression in g0..g3 and I exactly.

    Extra names may be bound to numbers or matrices, e.g.
    ``matrix_oracle("P*P - 2*P", P=matrix_oracle("I - w1*g0*g1", w1=1))``.
    Floats are converted to exact rationals.
    """
    env = oracle_gammas()
    for k, v in symbols.items():
        if isinstance(v, (sp.MatrixBase, np.ndarray)):
            env[k] = sp.Matrix(v).applyfunc(sp.nsimplify)
        else:
            env[k] = sp.nsimplify(v)
    out = sp.sympify(expression, locals=env)
    if not isinstance(out, sp.MatrixBase):
        out = out * sp.eye(4)
    return sp.simplify(out)


# ---------------------------------------------------------------- reference integrator

_C1 = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0  # f' * h, offsets -2..2
_C2 = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0  # f'' * h^2
MAX_REFERENCE_POINTS = 48


def _d1(a: np.ndarray, axis: int, h: float) -> np.ndarray:
    ax = a.ndim - 3 + axis
    return sum(c * np.roll(a, -o, axis=ax) for c, o in zip(_C1, range(-2, 3)) if c) / h


def _lap(a: np.ndarray, h: float) -> np.ndarray:
    out = 0.0
    for axis in range(3):
        ax = a.ndim - 3 + axis
        out = out + sum(c * np.roll(a, -o, axis=ax) for c, o in zip(_C2, range(-2, 3)))
    return out / (h * h)


_G0 = np.diag([1.0, 1.0, -1.0, -1.0]).astype(complex)
_ALPHA = [np.asarray(oracle_gammas()["g0"] * oracle_gammas()[f"g{a}"], dtype=complex) for a in (1, 2, 3)]


def _mat(m: np.ndarray, psi: np.ndarray) -> np.ndarray:
    return np.einsum("ij,j...->i...", m, psi)


def _rhs_kgz(y: dict, h: float) -> dict:
    E, Et, n0, n0t, n1, n1t = (y[k] for k in ("E", "E_t", "n0", "n0_t", "n1", "n1_t"))
    lap_n1 = _lap(n1, h)
    n = n0 + lap_n1
    return dict(E=Et, E_t=_lap(E, h) - E - n * E, n0=n0t, n0_t=_lap(n0, h),
                n1=n1t, n1_t=lap_n1 + np.sum(E * E, axis=0))


def _rhs_dkg(y: dict, h: float, mass: float) -> dict:
    psi, V0, V0t, V1, V1t = (y[k] for k in ("psi", "V0", "V0_t", "V1", "V1_t"))
    v = V0 + V1
    dpsi = -sum(_mat(_ALPHA[a], _d1(psi, a, h)) for a in range(3)) + 1j * (v - mass) * _mat(_G0, psi)
    density = np.real(np.sum(np.conj(psi) * _mat(_G0, psi), axis=0))
    return dict(psi=dpsi, V0=V0t, V0_t=_lap(V0, h) - V0, V1=V1t, V1_t=_lap(V1, h) - V1 + density)


def _rhs_linear(y: dict, h: float, mass2: float) -> dict:
    return dict(u=y["u_t"], u_t=_lap(y["u"], h) - mass2 * y["u"])


def explicit_reference_integrator(
    system: str, data: Mapping[str, np.ndarray], grid: GridSpec, dt: float, t_end: float,
    mass: float = 0.0, record_every: int = 1,
) -> list[tuple[float, dict]]:
    """rk4 in time, 4th-order periodic differences in space.

    ``system`` is "kgz" (keys E, E_t, n0, n0_t, n1, n1_t), "dkg" (psi, V0,
    V0_t, V1, V1_t; ``mass`` is the Dirac mass), "kg" or "wave" (u, u_t).
    Returns (t, state) pairs every ``record_every`` steps, including t = 0.
    """
    if grid.kind is not GridKind.BOX:
        raise ValueError("the reference integrator runs on the periodic box")
    if grid.points > MAX_REFERENCE_POINTS:
        raise ValueError(f"reference runs are limited to {MAX_REFERENCE_POINTS}^3 points")
    h = grid.h
    if dt > 0.5 * h:
        raise OracleError(f"CFL violation: dt = {dt} exceeds 0.5 h = {0.5 * h}")
    rhs = {
        "kgz": lambda y: _rhs_kgz(y, h),
        "dkg": lambda y: _rhs_dkg(y, h, mass),
        "kg": lambda y: _rhs_linear(y, h, 1.0),
        "wave": lambda y: _rhs_linear(y, h, 0.0),
    }.get(system)
    if rhs is None:
        raise ValueError(f"unknown system {system!r}")
    y = {k: np.array(v, dtype=complex if k == "psi" else float) for k, v in data.items()}
    nsteps = int(round(t_end / dt))
    out = [(0.0, {k: v.copy() for k, v in y.items()})]
    for n in range(1, nsteps + 1):
        k1 = rhs(y)
        k2 = rhs({k: y[k] + 0.5 * dt * k1[k] for k in y})
        k3 = rhs({k: y[k] + 0.5 * dt * k2[k] for k in y})
        k4 = rhs({k: y[k] + dt * k3[k] for k in y})
        y = {k: y[k] + dt / 6.0 * (k1[k] + 2 * k2[k] + 2 * k3[k] + k4[k]) for k in y}
        if not all(np.all(np.isfinite(v)) for v in y.values()):
            raise OracleError(f"reference solution blew up at t = {n * dt}")
        if n % record_every == 0 or n == nsteps:
            out.append((n * dt, {k: v.copy() for k, v in y.items()}))
    return out
