"""Klainerman vector fields, good derivatives and the null form on discrete data.

Two discretizations live here:

* :class:`Jet` carries the time derivatives ``(f, f_t, f_tt, ...)`` of a field on
  one time slice. Spatial derivatives are spectral on the box (4th-order
  stencils on the radial line). Vector fields act on jets exactly in time, so
  jets built from an exact propagator give exact vector-field values.
* :class:`Patch` is a small 4D lattice around probe points with 4th-order
  finite differences in t and x, used to measure convergence of commutator and
  Leibniz identities on closed-form functions.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Iterator, Sequence

import numpy as np
import sympy as sp

from . import spectral
from .gamma import STANDARD, GammaSet, spinor_apply
from .grid import Field, GridKind, GridSpec, ScalarField, SpinorField


class VectorFieldId(str, Enum):
    DT = "dt"
    DX1 = "dx1"
    DX2 = "dx2"
    DX3 = "dx3"
    OMEGA12 = "Omega12"
    OMEGA13 = "Omega13"
    OMEGA23 = "Omega23"
    L1 = "L1"
    L2 = "L2"
    L3 = "L3"
    L0 = "L0"
    HAT_OMEGA12 = "hatOmega12"
    HAT_OMEGA13 = "hatOmega13"
    HAT_OMEGA23 = "hatOmega23"
    HAT_L1 = "hatL1"
    HAT_L2 = "hatL2"
    HAT_L3 = "hatL3"

    @property
    def hatted(self) -> bool:
        return self.value.startswith("hat")

    @property
    def unhatted(self) -> "VectorFieldId":
        return VectorFieldId(self.value[3:]) if self.hatted else self

    @property
    def uses_time(self) -> bool:
        return self.unhatted in (VF.DT, VF.L0, VF.L1, VF.L2, VF.L3)


VF = VectorFieldId

GAMMA = (VF.DT, VF.DX1, VF.DX2, VF.DX3, VF.OMEGA12, VF.OMEGA13, VF.OMEGA23, VF.L1, VF.L2, VF.L3)
GAMMA_HAT = (
    VF.DT, VF.DX1, VF.DX2, VF.DX3,
    VF.HAT_OMEGA12, VF.HAT_OMEGA13, VF.HAT_OMEGA23, VF.HAT_L1, VF.HAT_L2, VF.HAT_L3,
)
Z = (VF.L0,) + GAMMA
Z_HAT = (VF.L0,) + GAMMA_HAT
OMEGAS = (VF.OMEGA12, VF.OMEGA13, VF.OMEGA23)

_ROT = {VF.OMEGA12: (0, 1), VF.OMEGA13: (0, 2), VF.OMEGA23: (1, 2)}
_BOOST = {VF.L1: 0, VF.L2: 1, VF.L3: 2}
_TRANS = {VF.DX1: 0, VF.DX2: 1, VF.DX3: 2}


def hat_matrix(vf: VectorFieldId, g: GammaSet = STANDARD) -> np.ndarray | None:
    """Constant matrix added by the hatted field: -g^a g^b / 2 or -g^0 g^a / 2."""
    if not vf.hatted:
        return None
    base = vf.unhatted
    if base in _ROT:
        a, b = _ROT[base]
        return -0.5 * g[a + 1] @ g[b + 1]
    return -0.5 * g[0] @ g[_BOOST[base] + 1]


# ---------------------------------------------------------------- radial stencils


def radial_derivative(u: np.ndarray, h: float, parity: int = 1) -> np.ndarray:
    """4th-order d/dr on half-offset nodes; ``parity`` +1 (even) or -1 (odd) about r=0.

    Values beyond the last node are taken as zero.
    """
    n = u.shape[-1]
    pad = np.zeros(u.shape[:-1] + (n + 4,), dtype=u.dtype)
    pad[..., 2:-2] = u
    pad[..., 1] = parity * u[..., 0]
    pad[..., 0] = parity * u[..., 1]
    return (pad[..., :-4] - 8 * pad[..., 1:-3] + 8 * pad[..., 3:-1] - pad[..., 4:]) / (12 * h)


def radial_second_derivative(u: np.ndarray, h: float, parity: int = -1) -> np.ndarray:
    n = u.shape[-1]
    pad = np.zeros(u.shape[:-1] + (n + 4,), dtype=u.dtype)
    pad[..., 2:-2] = u
    pad[..., 1] = parity * u[..., 0]
    pad[..., 0] = parity * u[..., 1]
    return (
        -pad[..., :-4] + 16 * pad[..., 1:-3] - 30 * pad[..., 2:-2] + 16 * pad[..., 3:-1] - pad[..., 4:]
    ) / (12 * h * h)


# ---------------------------------------------------------------- jets


class Jet:
    """Time derivatives of a field on one slice: ``derivs[k] = d_t^k f``.

    Arrays have shape ``grid.shape`` (scalars) or ``(ncomp,) + grid.shape``.
    """

    def __init__(self, grid: GridSpec, t: float, derivs: Sequence[np.ndarray], ncomp: int = 0):
        if not derivs:
            raise ValueError("a jet needs at least the field value")
        self.grid = grid
        self.t = float(t)
        self.derivs = [np.asarray(d) for d in derivs]
        self.ncomp = ncomp

    @property
    def order(self) -> int:
        return len(self.derivs) - 1

    @property
    def value(self) -> np.ndarray:
        return self.derivs[0]

    def _d(self, a: np.ndarray, axis: int) -> np.ndarray:
        if self.grid.kind is GridKind.BOX:
            return spectral.deriv(a, axis, self.grid.wavenumbers())
        raise ValueError("Cartesian derivatives are not available on the radial line")

    def _x(self, axis: int) -> np.ndarray:
        return self.grid.coords()[axis]

    def _new(self, derivs) -> "Jet":
        return Jet(self.grid, self.t, derivs, self.ncomp)

    def apply(self, vf: VectorFieldId, g: GammaSet = STANDARD) -> "Jet":
        vf = VF(vf)
        if vf.hatted and self.ncomp != 4:
            raise ValueError(f"hatted field {vf.value} applies only to spinor fields")
        if vf.uses_time and self.order < 1:
            raise ValueError(f"{vf.value} needs a time derivative; jet order is 0")
        base = vf.unhatted
        D, t = self.derivs, self.t
        if self.grid.kind is GridKind.RADIAL:
            out = self._apply_radial(base)
        elif base is VF.DT:
            out = D[1:]
        elif base in _TRANS:
            out = [self._d(f, _TRANS[base]) for f in D]
        elif base in _ROT:
            a, b = _ROT[base]
            out = [self._x(a) * self._d(f, b) - self._x(b) * self._d(f, a) for f in D]
        elif base in _BOOST:
            a = _BOOST[base]
            grads = [self._d(f, a) for f in D]
            out = [
                t * grads[k] + (k * grads[k - 1] if k else 0.0) + self._x(a) * D[k + 1]
                for k in range(self.order)
            ]
        else:  # L0
            out = []
            for k in range(self.order):
                xgrad = sum(self._x(a) * self._d(D[k], a) for a in range(3))
                out.append(t * D[k + 1] + k * D[k] + xgrad)
        m = hat_matrix(vf, g)
        if m is not None:
            n = len(out)
            out = [out[k] + spinor_apply(m, D[k]) for k in range(n)]
        return self._new(out)

    def _apply_radial(self, base: VectorFieldId) -> list[np.ndarray]:
        D, t, h = self.derivs, self.t, self.grid.h
        if base is VF.DT:
            return D[1:]
        if base in _ROT:
            return [np.zeros_like(f) for f in D]
        if base is VF.L0:
            r = self.grid.axis
            return [t * D[k + 1] + k * D[k] + r * radial_derivative(D[k], h) for k in range(self.order)]
        raise ValueError(
            f"{base.value} does not preserve radial symmetry; use the box grid for it"
        )

    def apply_sequence(self, vfs: Sequence[VectorFieldId], g: GammaSet = STANDARD) -> "Jet":
        """Apply ``vfs[-1]`` first, so the sequence reads as an operator product."""
        jet = self
        for vf in reversed(vfs):
            jet = jet.apply(vf, g)
        return jet

    def field(self) -> Field:
        cls = {0: ScalarField, 4: SpinorField}.get(self.ncomp)
        if cls is None:
            from .grid import Vec3Field

            cls = Vec3Field
        vals = self.value
        if cls is ScalarField and np.iscomplexobj(vals):
            if np.abs(vals.imag).max() > 1e-12 * max(1.0, np.abs(vals).max()):
                raise ValueError("complex values in a real scalar jet")
            vals = vals.real
        return cls(self.grid, vals, self.t)

    def abs2(self, arr: np.ndarray | None = None) -> np.ndarray:
        a = self.value if arr is None else arr
        a2 = np.abs(a) ** 2
        return a2 if self.ncomp == 0 else a2.sum(axis=0)


def multi_index_jets(
    jet: Jet, fields: Sequence[VectorFieldId], max_order: int, g: GammaSet = STANDARD
) -> Iterator[tuple[tuple[int, ...], Jet]]:
    """Yield ``(I, X^I jet)`` for every multi-index ``|I| <= max_order``.

    ``I`` is the sorted tuple of field positions; each multi-index appears once,
    as the ordered product with the largest position applied first.
    """

    def rec(cur: Jet, idx: tuple[int, ...], upper: int):
        yield idx, cur
        if len(idx) == max_order:
            return
        for k in range(upper, -1, -1):
            if fields[k].uses_time and cur.order < 1:
                raise ValueError("jet order too small for the requested multi-index order")
            yield from rec(cur.apply(fields[k], g), (k,) + idx, k)

    yield from rec(jet, (), len(fields) - 1)


def sum_norms(jet: Jet, fields: Sequence[VectorFieldId], max_order: int, g: GammaSet = STANDARD) -> float:
    """sum_{|I| <= max_order} ||X^I f|| in L^2."""
    w = jet.grid.volume_weights()
    total = 0.0
    for _, j in multi_index_jets(jet, fields, max_order, g):
        total += float(np.sqrt(np.sum(j.abs2() * w)))
    return total


def field_magnitude(jet: Jet, fields: Sequence[VectorFieldId], g: GammaSet = STANDARD) -> np.ndarray:
    """|X f| = (sum_k |X_k f|^2)^{1/2} node-wise."""
    return np.sqrt(sum(jet.abs2(jet.apply(vf, g).value) for vf in fields))


def spacetime_gradient(jet: Jet) -> list[np.ndarray]:
    """[d_t f, d_1 f, d_2 f, d_3 f] on the slice."""
    return [jet.derivs[1]] + [jet._d(jet.value, a) for a in range(3)]


# ---------------------------------------------------------------- time brackets


@dataclass(frozen=True)
class TimeBracket:
    """Snapshots at uniformly spaced times, at least five of them."""

    snapshots: tuple[Field, ...]

    def __post_init__(self):
        snaps = tuple(self.snapshots)
        object.__setattr__(self, "snapshots", snaps)
        if len(snaps) < 5:
            raise ValueError(f"time bracket needs >= 5 snapshots, got {len(snaps)}")
        ts = np.array([s.t for s in snaps])
        d = np.diff(ts)
        if np.any(d <= 0) or np.ptp(d) > 1e-9 * max(1.0, abs(d).max()):
            raise ValueError("time bracket snapshots must be uniformly spaced and increasing")
        if any(s.grid != snaps[0].grid or type(s) is not type(snaps[0]) for s in snaps):
            raise ValueError("time bracket snapshots must share grid and field type")

    @property
    def dt(self) -> float:
        return self.snapshots[1].t - self.snapshots[0].t

    @property
    def center(self) -> int:
        return len(self.snapshots) // 2

    @property
    def grid(self) -> GridSpec:
        return self.snapshots[0].grid

    def jet(self, order: int = 1, index: int | None = None) -> Jet:
        """4th-order centred differences at snapshot ``index`` (default: centre)."""
        if order > 2:
            raise ValueError("a 5-point bracket yields at most second time derivatives")
        c = self.center if index is None else index
        if c < 2 or c > len(self.snapshots) - 3:
            raise ValueError("index too close to the bracket ends for a 5-point stencil")
        v = [s.values for s in self.snapshots[c - 2 : c + 3]]
        k = self.dt
        derivs = [v[2]]
        if order >= 1:
            derivs.append((v[0] - 8 * v[1] + 8 * v[3] - v[4]) / (12 * k))
        if order >= 2:
            derivs.append((-v[0] + 16 * v[1] - 30 * v[2] + 16 * v[3] - v[4]) / (12 * k * k))
        s0 = self.snapshots[c]
        return Jet(self.grid, s0.t, derivs, s0.ncomp)


def apply_vf(vf: VectorFieldId, bracket: TimeBracket, g: GammaSet = STANDARD) -> Field:
    """Vector field applied at the bracket's centre time."""
    vf = VF(vf)
    if vf.hatted and not isinstance(bracket.snapshots[0], SpinorField):
        raise ValueError(f"hatted field {vf.value} applies only to spinor fields")
    return bracket.jet(order=1).apply(vf, g).field()


def omega_field(grid: GridSpec, exclusion: float = 2.0) -> tuple[np.ndarray, np.ndarray]:
    """Unit radial direction (3, N, N, N) and the mask of usable nodes (|x| >= exclusion*h)."""
    r = grid.radius()
    ok = ~grid.excluded_mask(exclusion)
    safe = np.where(ok, r, 1.0)
    om = np.stack([np.where(ok, c / safe, 0.0) for c in grid.coords()])
    return om, ok


def good_derivative_jet(jet: Jet, a: int, exclusion: float = 2.0) -> tuple[np.ndarray, np.ndarray]:
    """G_a f = d_a f + omega_a d_t f, zero on the excluded origin neighbourhood."""
    om, ok = omega_field(jet.grid, exclusion)
    val = jet._d(jet.value, a) + om[a] * jet.derivs[1]
    return np.where(ok, val, 0.0), ok


def good_derivative(
    a: int, bracket: TimeBracket, exclusion: float = 2.0, nodes: Sequence[tuple[int, int, int]] | None = None
) -> Field:
    """Discrete G_a f at the bracket centre; values at excluded nodes are set to zero.

    Requesting ``nodes`` inside the excluded ball raises ``ValueError``.
    """
    if bracket.grid.kind is not GridKind.BOX:
        raise ValueError("good derivatives are defined on the box grid")
    if a not in (0, 1, 2):
        raise ValueError("axis must be 0, 1 or 2")
    jet = bracket.jet(order=1)
    val, ok = good_derivative_jet(jet, a, exclusion)
    if nodes is not None:
        for n in nodes:
            if not ok[tuple(n)]:
                raise ValueError(f"node {tuple(n)} lies in the excluded origin neighbourhood")
    return type(bracket.snapshots[0])(bracket.grid, val, jet.t)


def q0_arrays(du: Sequence[np.ndarray], dv: Sequence[np.ndarray]) -> np.ndarray:
    """Q0 from spacetime gradients [d_t, d_1, d_2, d_3] (no complex conjugation)."""
    return du[0] * dv[0] - du[1] * dv[1] - du[2] * dv[2] - du[3] * dv[3]


def null_form_q0(bracket_u: TimeBracket, bracket_v: TimeBracket) -> Field:
    """Q0(u, v) = d_t u d_t v - grad u . grad v at the common centre time."""
    if bracket_u.grid != bracket_v.grid:
        raise ValueError("brackets live on different grids")
    ju, jv = bracket_u.jet(1), bracket_v.jet(1)
    if abs(ju.t - jv.t) > 1e-12 * max(1.0, abs(ju.t)):
        raise ValueError("brackets are centred at different times")
    if bracket_u.grid.kind is GridKind.RADIAL:
        h = bracket_u.grid.h
        val = ju.derivs[1] * jv.derivs[1] - radial_derivative(ju.value, h) * radial_derivative(jv.value, h)
    else:
        val = q0_arrays(spacetime_gradient(ju), spacetime_gradient(jv))
    cls = type(bracket_u.snapshots[0]) if np.iscomplexobj(val) else ScalarField
    if cls is ScalarField:
        val = np.real(val)
    return cls(bracket_u.grid, val, ju.t)


# ---------------------------------------------------------------- 4D patches

_D1 = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0
_D2 = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0


class Patch:
    """Samples on a (2m+1)^4 lattice in (t, x1, x2, x3) around each probe point.

    ``values`` has shape ``(P, *comp, n, n, n, n)``; every operator returns a
    patch two nodes smaller per side.
    """

    def __init__(self, centers: np.ndarray, h: float, m: int, values: np.ndarray):
        self.centers = np.asarray(centers, dtype=float)
        self.h = float(h)
        self.m = m
        self.values = values

    @classmethod
    def sample(cls, f: Callable, centers: np.ndarray, h: float, m: int = 4) -> "Patch":
        """``f(t, x1, x2, x3)`` returns an array (scalar) or a list of components."""
        centers = np.asarray(centers, dtype=float)
        off = np.arange(-m, m + 1) * h
        P = centers.shape[0]
        coords = [
            centers[:, a].reshape((P,) + (1,) * a + (-1,) + (1,) * (3 - a))
            + off.reshape((1,) + (1,) * a + (-1,) + (1,) * (3 - a))
            for a in range(4)
        ]
        raw = f(*coords)
        shape = (P,) + (2 * m + 1,) * 4
        if isinstance(raw, (list, tuple)):
            vals = np.stack([np.broadcast_to(c, shape) for c in raw], axis=1)
        else:
            vals = np.broadcast_to(raw, shape).copy()
        return cls(centers, h, m, vals)

    @property
    def ncomp_axes(self) -> int:
        return self.values.ndim - 5

    def _new(self, values: np.ndarray) -> "Patch":
        return Patch(self.centers, self.h, self.m - 2, values)

    def _sl(self, axis: int, lo: int, hi: int | None) -> tuple:
        sl = [slice(None)] * self.values.ndim
        sl[self.values.ndim - 4 + axis] = slice(lo, hi)
        return tuple(sl)

    def crop(self, values: np.ndarray | None = None, axes=(0, 1, 2, 3)) -> np.ndarray:
        v = self.values if values is None else values
        sl = [slice(None)] * v.ndim
        for a in axes:
            sl[v.ndim - 4 + a] = slice(2, -2)
        return v[tuple(sl)]

    def _stencil(self, axis: int, w: np.ndarray, scale: float) -> np.ndarray:
        v = self.values
        n = v.shape[-4 + axis]
        out = sum(w[i] * v[self._sl(axis, i, n - 4 + i)] for i in range(5) if w[i] != 0.0)
        other = tuple(a for a in range(4) if a != axis)
        return self.crop(out, other) / scale

    def d(self, axis: int) -> "Patch":
        return self._new(self._stencil(axis, _D1, self.h))

    def d2(self, axis: int) -> "Patch":
        return self._new(self._stencil(axis, _D2, self.h**2))

    def coord(self, axis: int, m: int | None = None) -> np.ndarray:
        m = self.m if m is None else m
        off = np.arange(-m, m + 1) * self.h
        P = self.centers.shape[0]
        c = self.centers[:, axis].reshape((P,) + (1,) * 4) + off.reshape(
            (1,) + (1,) * axis + (-1,) + (1,) * (3 - axis)
        )
        return c.reshape((P,) + (1,) * self.ncomp_axes + c.shape[1:])

    def center_values(self) -> np.ndarray:
        m = self.m
        return self.values[(Ellipsis, m, m, m, m)]

    def __add__(self, other: "Patch") -> "Patch":
        return Patch(self.centers, self.h, self.m, self.values + other.values)

    def __sub__(self, other: "Patch") -> "Patch":
        return Patch(self.centers, self.h, self.m, self.values - other.values)

    def scale(self, c) -> "Patch":
        return Patch(self.centers, self.h, self.m, self.values * c)

    def cropped(self) -> "Patch":
        return Patch(self.centers, self.h, self.m - 2, self.crop())

    def matrix(self, m: np.ndarray) -> "Patch":
        """Apply a constant matrix on the first component axis."""
        return Patch(self.centers, self.h, self.m, np.einsum("ij,pj...->pi...", m, self.values))


def patch_minus_box(p: Patch) -> Patch:
    """-Box f = f_tt - Laplacian f."""
    out = p.d2(0)
    for a in (1, 2, 3):
        out = out - p.d2(a)
    return out


def patch_vf(vf: VectorFieldId, p: Patch, g: GammaSet = STANDARD) -> Patch:
    vf = VF(vf)
    base = vf.unhatted
    m2 = p.m - 2
    if base is VF.DT:
        out = p.d(0)
    elif base in _TRANS:
        out = p.d(_TRANS[base] + 1)
    elif base in _ROT:
        a, b = _ROT[base]
        out = p.d(b + 1).scale(p.coord(a + 1, m2)) - p.d(a + 1).scale(p.coord(b + 1, m2))
    elif base in _BOOST:
        a = _BOOST[base]
        out = p.d(a + 1).scale(p.coord(0, m2)) + p.d(0).scale(p.coord(a + 1, m2))
    else:
        out = p.d(0).scale(p.coord(0, m2))
        for a in range(3):
            out = out + p.d(a + 1).scale(p.coord(a + 1, m2))
    mat = hat_matrix(vf, g)
    if mat is not None:
        out = out + p.cropped().matrix(mat)
    return out


def patch_dirac(p: Patch, g: GammaSet = STANDARD) -> Patch:
    """-i gamma^mu d_mu phi on a spinor patch."""
    out = p.d(0).matrix(-1j * g[0])
    for a in range(3):
        out = out + p.d(a + 1).matrix(-1j * g[a + 1])
    return out


def patch_q0(pu: Patch, pv: Patch) -> Patch:
    out = pu.d(0).scale(pv.d(0).values)
    for a in (1, 2, 3):
        out = out - pu.d(a).scale(pv.d(a).values)
    return out


def _rms(values: np.ndarray) -> float:
    return float(np.sqrt(np.mean(np.abs(values) ** 2)))


def default_probes(n: int = 32, seed: int = 0) -> np.ndarray:
    """Probe points (t, x1, x2, x3) with t in [1, 3] and |x_a| <= 2."""
    rng = np.random.default_rng(seed)
    pts = rng.uniform(-2.0, 2.0, size=(n, 4))
    pts[:, 0] = rng.uniform(1.0, 3.0, size=n)
    return pts


# Closed-form manufactured functions: the inner operator is applied exactly,
# the outer one by 4th-order stencils, so residuals measure truncation error.

T, X1, X2, X3 = sp.symbols("t x1 x2 x3", real=True)
_XS = (X1, X2, X3)


def sym_vf(vf: VectorFieldId, u: sp.Expr) -> sp.Expr:
    base = VF(vf)
    if base.hatted:
        raise ValueError("symbolic application is for scalar functions")
    if base is VF.DT:
        return sp.diff(u, T)
    if base in _TRANS:
        return sp.diff(u, _XS[_TRANS[base]])
    if base in _ROT:
        a, b = _ROT[base]
        return _XS[a] * sp.diff(u, _XS[b]) - _XS[b] * sp.diff(u, _XS[a])
    if base in _BOOST:
        a = _BOOST[base]
        return T * sp.diff(u, _XS[a]) + _XS[a] * sp.diff(u, T)
    return T * sp.diff(u, T) + sum(x * sp.diff(u, x) for x in _XS)


def sym_minus_box(u: sp.Expr) -> sp.Expr:
    return sp.diff(u, T, 2) - sum(sp.diff(u, x, 2) for x in _XS)


def sym_q0(u: sp.Expr, v: sp.Expr) -> sp.Expr:
    return sp.diff(u, T) * sp.diff(v, T) - sum(sp.diff(u, x) * sp.diff(v, x) for x in _XS)


def as_function(expr: sp.Expr) -> Callable:
    f = sp.lambdify((T, X1, X2, X3), expr, "numpy")

    def call(t, x1, x2, x3):
        return np.broadcast_to(f(t, x1, x2, x3), np.broadcast_shapes(t.shape, x1.shape, x2.shape, x3.shape))

    return call


def commutator_residual_at(vf: VectorFieldId, u: sp.Expr, h: float, probes: np.ndarray) -> float:
    """RMS over probes of [-Box, Gamma_k] u, or of ([-Box, L0] + 2 Box) u for L0."""
    vf = VF(vf)
    u = sp.sympify(u)
    lhs = patch_minus_box(Patch.sample(as_function(sym_vf(vf, u)), probes, h, m=2)).center_values()
    mbu = sym_minus_box(u)
    rhs = patch_vf(vf, Patch.sample(as_function(mbu), probes, h, m=2)).center_values()
    res = lhs - rhs
    if vf is VF.L0:
        # + 2 Box u = -2 (-Box u), taken exactly
        res = res - 2.0 * as_function(mbu)(*(probes[:, a] for a in range(4)))
    return _rms(res)


@dataclass(frozen=True)
class ConvergenceResult:
    steps: tuple[float, ...]
    residuals: tuple[float, ...]

    floor: float = 1e-11

    @property
    def orders(self) -> tuple[float, ...]:
        """Observed orders; a pair already at the rounding floor counts as exact (inf)."""
        r, s = self.residuals, self.steps
        out = []
        for i in range(len(r) - 1):
            if r[i + 1] <= self.floor:
                out.append(float("inf"))
            else:
                out.append(float(np.log(r[i] / r[i + 1]) / np.log(s[i] / s[i + 1])))
        return tuple(out)

    @property
    def order(self) -> float:
        return min(self.orders)


def commutator_residual(
    vf: VectorFieldId, u: sp.Expr, h: float = 0.2, levels: int = 2, probes: np.ndarray | None = None
) -> ConvergenceResult:
    """Commutator residual at h, h/2, ... (``levels`` values) with observed orders.

    ``u`` is a sympy expression in :data:`T`, :data:`X1`, :data:`X2`, :data:`X3`.
    """
    probes = default_probes() if probes is None else probes
    steps = tuple(h / 2**i for i in range(levels))
    return ConvergenceResult(steps, tuple(commutator_residual_at(vf, u, s, probes) for s in steps))


def dirac_commutator_residual_at(vf: VectorFieldId, phi: Callable, h: float, probes: np.ndarray,
                                 g: GammaSet = STANDARD) -> float:
    """[-i g.d, hat Gamma_k] phi, or ([-i g.d, L0] - (-i g.d)) phi for L0, all discrete.

    Translations commute exactly with the stencils; for the other fields the
    linear weights do not, and the residual is the 4th-order truncation error.
    """
    p = Patch.sample(phi, probes, h, m=4)  # two nested stencils
    lhs = patch_dirac(patch_vf(vf, p, g), g).center_values()
    rhs = patch_vf(vf, patch_dirac(p, g), g).center_values()
    res = lhs - rhs
    if VF(vf) is VF.L0:
        res = res - patch_dirac(p, g).cropped().center_values()
    return _rms(res)


def dirac_commutator_residual(
    vf: VectorFieldId, phi: Callable, h: float = 0.2, levels: int = 2,
    probes: np.ndarray | None = None, g: GammaSet = STANDARD,
) -> ConvergenceResult:
    probes = default_probes() if probes is None else probes
    steps = tuple(h / 2**i for i in range(levels))
    return ConvergenceResult(steps, tuple(dirac_commutator_residual_at(vf, phi, s, probes, g) for s in steps))


def q0_leibniz_residual_at(vf: VectorFieldId, u: sp.Expr, v: sp.Expr, h: float, probes: np.ndarray) -> float:
    vf = VF(vf)
    if vf is VF.L0:
        raise ValueError("the one-field Leibniz rule for Q0 does not hold for L0")
    if vf.hatted:
        raise ValueError("Leibniz rule is stated for the unhatted Gamma fields")
    u, v = sp.sympify(u), sp.sympify(v)
    pq = Patch.sample(as_function(sym_q0(u, v)), probes, h, m=2)
    lhs = patch_vf(vf, pq).center_values()
    pgu = Patch.sample(as_function(sym_vf(vf, u)), probes, h, m=2)
    pgv = Patch.sample(as_function(sym_vf(vf, v)), probes, h, m=2)
    pu = Patch.sample(as_function(u), probes, h, m=2)
    pv = Patch.sample(as_function(v), probes, h, m=2)
    rhs = (patch_q0(pgu, pv) + patch_q0(pu, pgv)).center_values()
    return _rms(lhs - rhs)


def q0_leibniz_residual(
    vf: VectorFieldId, u: sp.Expr, v: sp.Expr, h: float = 0.2, levels: int = 2,
    probes: np.ndarray | None = None,
) -> ConvergenceResult:
    probes = default_probes() if probes is None else probes
    steps = tuple(h / 2**i for i in range(levels))
    return ConvergenceResult(steps, tuple(q0_leibniz_residual_at(vf, u, v, s, probes) for s in steps))


def hat_bound_margin(jet: Jet, g: GammaSet = STANDARD) -> float:
    """min over nodes of |Gamma f| + |f|/2 - |hat Gamma f| per single field (>= 0 expected)."""
    if jet.ncomp != 4:
        raise ValueError("hat bound applies to spinor jets")
    mag_f = np.sqrt(jet.abs2())
    worst = np.inf
    for vf, hv in zip(GAMMA, GAMMA_HAT):
        a = np.sqrt(jet.abs2(jet.apply(vf, g).value))
        b = np.sqrt(jet.abs2(jet.apply(hv, g).value))
        worst = min(worst, float(np.min(a + 0.5 * mag_f - b)))
    return worst


ALL_GAMMA_AND_L0 = GAMMA + (VF.L0,)


def enumerate_multi_indices(nfields: int, max_order: int) -> list[tuple[int, ...]]:
    out = []
    for order in range(max_order + 1):
        out.extend(itertools.combinations_with_replacement(range(nfields), order))
    return out
