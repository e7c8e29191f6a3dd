"""Grids, field snapshots, weight profiles and the norms built on them."""
from __future__ import annotations

import csv
import io
import struct
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from pathlib import Path
from typing import Callable, Iterable

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from . import spectral


class GridKind(str, Enum):
    BOX = "periodic-box-3d"
    RADIAL = "radial-line-1d"


_FFT_PRIMES = (2, 3, 5)


def _is_fft_friendly(n: int) -> bool:
    if n < 4 or n % 2:
        return False
    for p in _FFT_PRIMES:
        while n % p == 0:
            n //= p
    return n == 1


@dataclass(frozen=True)
class GridSpec:
    """Uniform origin-centred grid.

    The 3D box has ``points`` cell-centred nodes per axis,
    ``x_j = -L + (j + 1/2) h`` with ``h = 2L / points``; the origin is never a node.
    The radial line uses the same spacing and keeps the ``points // 2`` nodes
    ``r_j = (j + 1/2) h`` lying in ``(0, L)``.
    """

    kind: GridKind
    extent: float
    points: int

    def __post_init__(self):
        object.__setattr__(self, "kind", GridKind(self.kind))
        if not (self.extent > 0 and np.isfinite(self.extent)):
            raise ValueError(f"extent must be positive, got {self.extent}")
        if self.kind is GridKind.BOX and not _is_fft_friendly(self.points):
            raise ValueError(
                f"box grid needs an even 2-3-5-smooth point count, got {self.points}"
            )
        if self.kind is GridKind.RADIAL and (self.points < 8 or self.points % 2):
            raise ValueError(f"radial grid needs an even point count >= 8, got {self.points}")

    @classmethod
    def box(cls, extent: float, points: int) -> "GridSpec":
        return cls(GridKind.BOX, float(extent), int(points))

    @classmethod
    def radial(cls, extent: float, points: int) -> "GridSpec":
        return cls(GridKind.RADIAL, float(extent), int(points))

    @property
    def h(self) -> float:
        return 2.0 * self.extent / self.points

    @property
    def dim(self) -> int:
        return 3 if self.kind is GridKind.BOX else 1

    @property
    def shape(self) -> tuple[int, ...]:
        if self.kind is GridKind.BOX:
            return (self.points,) * 3
        return (self.points // 2,)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def axis(self) -> np.ndarray:
        n = self.shape[0]
        if self.kind is GridKind.BOX:
            return -self.extent + (np.arange(n) + 0.5) * self.h
        return (np.arange(n) + 0.5) * self.h

    def coords(self) -> tuple[np.ndarray, ...]:
        """Broadcastable coordinate arrays (x1, x2, x3) or (r,)."""
        ax = self.axis
        if self.kind is GridKind.BOX:
            return (ax[:, None, None], ax[None, :, None], ax[None, None, :])
        return (ax,)

    def mesh(self) -> tuple[np.ndarray, ...]:
        return tuple(np.broadcast_to(c, self.shape) for c in self.coords())

    def radius(self) -> np.ndarray:
        if self.kind is GridKind.BOX:
            x1, x2, x3 = self.coords()
            return np.sqrt(x1**2 + x2**2 + x3**2)
        return self.axis.copy()

    def volume_weights(self) -> np.ndarray | float:
        """Quadrature weight per node: h^3 on the box, 4 pi r^2 h on the line."""
        if self.kind is GridKind.BOX:
            return self.h**3
        return 4.0 * np.pi * self.axis**2 * self.h

    def wavenumbers(self) -> spectral.Wavenumbers:
        if self.kind is not GridKind.BOX:
            raise ValueError("wavenumbers exist only for the periodic box")
        return spectral.wavenumbers(self.points, self.h)

    def excluded_mask(self, radius_in_h: float = 2.0) -> np.ndarray:
        """Nodes within ``radius_in_h * h`` of the origin, where omega = x/r is unusable."""
        return self.radius() < radius_in_h * self.h


# ---------------------------------------------------------------- fields


@dataclass(frozen=True)
class Field:
    grid: GridSpec
    values: np.ndarray
    t: float = 0.0

    ncomp: int = field(default=0, init=False, repr=False)  # 0 = scalar
    complex_valued: bool = field(default=False, init=False, repr=False)

    def __post_init__(self):
        vals = np.array(self.values, dtype=complex if self.complex_valued else float)
        expected = self.grid.shape if self.ncomp == 0 else (self.ncomp,) + self.grid.shape
        if vals.shape != expected:
            raise ValueError(
                f"{type(self).__name__} on {self.grid.kind.value} expects shape {expected}, "
                f"got {vals.shape}"
            )
        if not np.all(np.isfinite(vals)):
            bad = np.argwhere(~np.isfinite(vals))[0]
            raise ValueError(f"non-finite value at index {tuple(int(i) for i in bad)}")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "t", float(self.t))

    def pointwise_abs2(self) -> np.ndarray:
        v = self.values
        a2 = np.abs(v) ** 2
        return a2 if self.ncomp == 0 else a2.sum(axis=0)

    def pointwise_abs(self) -> np.ndarray:
        return np.sqrt(self.pointwise_abs2())

    def with_values(self, values: np.ndarray, t: float | None = None) -> "Field":
        return type(self)(self.grid, values, self.t if t is None else t)

    def __mul__(self, c: float) -> "Field":
        return self.with_values(self.values * c)

    __rmul__ = __mul__

    def __add__(self, other: "Field") -> "Field":
        if type(other) is not type(self) or other.grid != self.grid:
            raise ValueError("cannot add fields of different kind or grid")
        return self.with_values(self.values + other.values)

    def __sub__(self, other: "Field") -> "Field":
        return self + (-1.0) * other


class ScalarField(Field):
    ncomp = 0


class Vec3Field(Field):
    ncomp = 3


class SpinorField(Field):
    ncomp = 4
    complex_valued = True


def _field_class(ncomp: int, complex_valued: bool) -> type[Field]:
    if ncomp == 0:
        return ScalarField
    if ncomp == 3 and not complex_valued:
        return Vec3Field
    if ncomp == 4:
        return SpinorField
    raise ValueError(f"no field type with ncomp={ncomp}, complex={complex_valued}")


def sample(grid: GridSpec, f: Callable, kind: type[Field] = ScalarField, t: float = 0.0) -> Field:
    """Evaluate a closed-form ``f(*coords)`` node-wise.

    On the box ``f`` receives ``(x1, x2, x3)``; on the radial line it receives
    ``(r,)``. Vector and spinor callables return a sequence of components.
    """
    coords = grid.mesh()
    raw = f(*coords)
    if kind.ncomp == 0:
        vals = np.broadcast_to(np.asarray(raw), grid.shape)
    else:
        vals = np.stack([np.broadcast_to(np.asarray(c), grid.shape) for c in raw])
    vals = np.asarray(vals, dtype=complex if kind.complex_valued else float)
    bad = ~np.isfinite(vals)
    if bad.any():
        idx = np.argwhere(bad)[0]
        node = tuple(int(i) for i in idx[-grid.dim:])
        where = tuple(float(c[node]) for c in coords)
        raise ValueError(f"non-finite sample at node {node} (position {where})")
    return kind(grid, vals, t)


# ---------------------------------------------------------------- weights


def japanese(p):
    return np.sqrt(1.0 + np.square(p))


def chi(x):
    """C^1 cut-off: 0 on (-inf, 1], 1 on [2, inf), cubic smoothstep between."""
    s = np.clip(np.asarray(x, dtype=float) - 1.0, 0.0, 1.0)
    return s * s * (3.0 - 2.0 * s)


def chi_prime(x):
    s = np.clip(np.asarray(x, dtype=float) - 1.0, 0.0, 1.0)
    return 6.0 * s * (1.0 - s)


class GhostWeight:
    """Ghost weight q(s) = int_{-inf}^s <tau>^{-1-2 delta} d tau, s = r - t.

    Tabulated by Gauss-Legendre cell quadrature and evaluated with a cubic
    Hermite spline using the exact derivative; tails beyond the table use the
    convergent large-|s| series.
    """

    TABLE_HALF_WIDTH = 1000.0
    TABLE_NODES = 40001

    def __init__(self, delta: float):
        if not delta > 0:
            raise ValueError(f"delta must be positive, got {delta}")
        self.delta = float(delta)
        self._a = 0.5 + self.delta  # <s>^{-1-2 delta} = (1 + s^2)^{-a}
        S = self.TABLE_HALF_WIDTH
        beta = 7.0
        u = np.linspace(-1.0, 1.0, self.TABLE_NODES)
        s = S * np.sinh(beta * u) / np.sinh(beta)
        s[0], s[-1] = -S, S  # the spline must cover the table exactly
        gx, gw = np.polynomial.legendre.leggauss(10)
        mid = 0.5 * (s[1:] + s[:-1])
        half = 0.5 * (s[1:] - s[:-1])
        pts = mid[:, None] + half[:, None] * gx[None, :]
        cell = (half[:, None] * gw[None, :] * self.weight(pts)).sum(axis=1)
        q = np.empty_like(s)
        q[0] = self._tail(S)
        q[1:] = q[0] + np.cumsum(cell)
        self.total = 2.0 * self._tail(S) + cell.sum()
        self._nodes = s
        self._spline = CubicHermiteSpline(s, q, self.weight(s), extrapolate=False)

    def weight(self, s):
        """Derivative q'(s) = <s>^{-1-2 delta}."""
        return (1.0 + np.square(s)) ** (-self._a)

    def _tail(self, S: float) -> float:
        # int_S^inf (1+tau^2)^{-a} d tau = sum_k binom(-a, k) S^{1-2a-2k} / (2a+2k-1)
        total, coef = 0.0, 1.0
        for k in range(8):
            total += coef * S ** (1.0 - 2 * self._a - 2 * k) / (2 * self._a + 2 * k - 1.0)
            coef *= (-self._a - k) / (k + 1)
        return total

    def q(self, s):
        s = np.asarray(s, dtype=float)
        out = np.empty_like(s)
        S = self.TABLE_HALF_WIDTH
        inside = np.abs(s) <= S
        out[inside] = self._spline(s[inside])
        lo = s < -S
        hi = s > S
        if lo.any():
            out[lo] = [self._tail(-v) for v in s[lo]]
        if hi.any():
            out[hi] = [self.total - self._tail(v) for v in s[hi]]
        return out if out.ndim else float(out)


@lru_cache(maxsize=8)
def ghost_weight(delta: float = 0.05) -> GhostWeight:
    return GhostWeight(delta)


DEFAULT_DELTA = 0.05


class WeightKind(str, Enum):
    T_PLUS_R = "bracket-t-plus-r"
    T_MINUS_R = "bracket-t-minus-r"
    GHOST_Q = "ghost-q"
    CHI_EXTERIOR = "chi-exterior"


@dataclass(frozen=True)
class WeightProfile:
    """Spacetime weight w(t, r).

    parameters: ``power`` for the brackets (default 1); ``delta`` for ghost-q
    (default 0.05, profile is q(r - t)); ``speed``/``shift`` for chi-exterior,
    evaluated as chi(r - speed*t - shift) (defaults 2 and 0).
    """

    kind: WeightKind
    parameters: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "kind", WeightKind(self.kind))

    def __call__(self, t: float, r):
        p = self.parameters
        r = np.asarray(r, dtype=float)
        if self.kind is WeightKind.T_PLUS_R:
            return japanese(t + r) ** p.get("power", 1.0)
        if self.kind is WeightKind.T_MINUS_R:
            return japanese(t - r) ** p.get("power", 1.0)
        if self.kind is WeightKind.GHOST_Q:
            return ghost_weight(p.get("delta", DEFAULT_DELTA)).q(r - t)
        return chi(r - p.get("speed", 2.0) * t - p.get("shift", 0.0))

    def depends_on_time(self) -> bool:
        return not (self.kind is WeightKind.CHI_EXTERIOR and self.parameters.get("speed", 2.0) == 0)


# ---------------------------------------------------------------- norms


def l2_norm(f: Field, weight: WeightProfile | None = None, t: float | None = None) -> float:
    """sqrt(sum_j w(t, x_j) |f_j|^2 dV_j); the weight multiplies |f|^2 directly."""
    if weight is not None:
        if t is None:
            t = f.t
        elif weight.depends_on_time() and abs(t - f.t) > 1e-12 * max(1.0, abs(t)):
            raise ValueError(f"field time-tag {f.t} inconsistent with t={t}")
    dens = f.pointwise_abs2()
    if weight is not None:
        w = np.asarray(weight(t, f.grid.radius()))
        if w.shape != dens.shape and w.size != 1:
            raise ValueError("weight domain does not match the grid")
        dens = dens * w
    return float(np.sqrt(np.sum(dens * f.grid.volume_weights())))


def integrate(grid: GridSpec, density: np.ndarray) -> float:
    return float(np.sum(density * grid.volume_weights()))


@dataclass(frozen=True)
class ShellSup:
    radii: np.ndarray
    sups: np.ndarray
    global_sup: float
    argmax_radius: float


def sup_shell(f: Field, t: float | None = None) -> ShellSup:
    """Supremum of |f| on radial shells of width h; also the global supremum."""
    grid = f.grid
    r = grid.radius()
    a = np.broadcast_to(f.pointwise_abs(), grid.shape).ravel()
    idx = np.floor(np.broadcast_to(r, grid.shape).ravel() / grid.h).astype(int)
    nshell = int(idx.max()) + 1
    sups = np.full(nshell, -np.inf)
    np.maximum.at(sups, idx, a)
    present = np.isfinite(sups)
    radii = (np.arange(nshell) + 0.5) * grid.h
    j = int(np.argmax(a))
    return ShellSup(radii[present], sups[present], float(a[j]), float(np.broadcast_to(r, grid.shape).ravel()[j]))


def weighted_sup(f: Field, weight: Callable[[np.ndarray], np.ndarray], mask=None) -> float:
    """sup_x |f(x)| * weight(r); ``weight`` takes the radius array."""
    r = f.grid.radius()
    vals = np.broadcast_to(f.pointwise_abs() * weight(r), f.grid.shape)
    if mask is not None:
        vals = vals[mask]
    return float(np.max(vals))


# ---------------------------------------------------------------- serialization

MAGIC = b"KGZF"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sqqqqqdddq")
_KIND_CODE = {GridKind.BOX: 0, GridKind.RADIAL: 1}


def to_bytes(f: Field) -> bytes:
    """Flat little-endian layout; the header is documented in docs/formats.md."""
    g = f.grid
    header = _HEADER.pack(
        MAGIC,
        FORMAT_VERSION,
        _KIND_CODE[g.kind],
        f.ncomp,
        int(f.complex_valued),
        g.points,
        g.extent,
        g.h,
        f.t,
        g.size,
    )
    dtype = "<c16" if f.complex_valued else "<f8"
    return header + np.ascontiguousarray(f.values, dtype=dtype).tobytes(order="C")


def from_bytes(data: bytes) -> Field:
    magic, version, kind, ncomp, cplx, points, extent, h, t, nnodes = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise ValueError("not a field snapshot (bad magic)")
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported snapshot version {version}")
    grid = GridSpec(GridKind.BOX if kind == 0 else GridKind.RADIAL, extent, points)
    if grid.size != nnodes or abs(grid.h - h) > 1e-12 * h:
        raise ValueError("snapshot header inconsistent with its grid")
    dtype = "<c16" if cplx else "<f8"
    shape = grid.shape if ncomp == 0 else (ncomp,) + grid.shape
    vals = np.frombuffer(data, dtype=dtype, offset=_HEADER.size, count=int(np.prod(shape)))
    return _field_class(ncomp, bool(cplx))(grid, vals.reshape(shape), t)


def save(f: Field, path: str | Path) -> None:
    Path(path).write_bytes(to_bytes(f))


def load(path: str | Path) -> Field:
    return from_bytes(Path(path).read_bytes())


def to_csv(f: Field, max_nodes: int = 100_000) -> str:
    """Node coordinates followed by one column per (real/imag) component."""
    g = f.grid
    if g.size > max_nodes:
        raise ValueError(f"grid has {g.size} nodes; CSV export is limited to {max_nodes}")
    coords = [c.ravel() for c in g.mesh()]
    names = ["x1", "x2", "x3"] if g.kind is GridKind.BOX else ["r"]
    comps = [f.values] if f.ncomp == 0 else list(f.values)
    cols, colnames = [], []
    for i, c in enumerate(comps):
        tag = "u" if f.ncomp == 0 else f"c{i}"
        if f.complex_valued:
            cols += [c.real.ravel(), c.imag.ravel()]
            colnames += [f"{tag}_re", f"{tag}_im"]
        else:
            cols.append(c.ravel())
            colnames.append(tag)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t"] + names + colnames)
    for row in zip(*coords, *cols):
        w.writerow([repr(f.t)] + [repr(float(v)) for v in row])
    return buf.getvalue()


def stack_components(fields: Iterable[ScalarField]) -> Vec3Field:
    fs = list(fields)
    return Vec3Field(fs[0].grid, np.stack([x.values for x in fs]), fs[0].t)
