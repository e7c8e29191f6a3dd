"""Initial-data families backed by closed forms.

Every family returns data whose derivatives are available exactly, so the
hypothesis checker can evaluate weighted Sobolev sums by quadrature.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .closedform import ClosedForm, Gaussian, GridFunction, PlaneMode, Zero
from .grid import GridKind, GridSpec, ScalarField
from .propagators import WaveData, positivity_certificate
from .systems import DKGState, KGZState, load_checkpoint, reconstruct


class Family(str, Enum):
    GAUSSIAN_BUMP = "gaussian-bump"
    CERTIFIED_PAIR = "certified-positive-pair"
    PLANE_MODE = "plane-mode"
    FROM_FILE = "from-file"


class DataError(ValueError):
    pass


# Fixed unit spinor direction for the Dirac data; generic (all components nonzero).
SPINOR_DIRECTION = np.array([1.0, 0.5j, 0.25, -0.5]) / math.sqrt(1.0 + 0.25 + 0.0625 + 0.25)

# sup_s s exp(-s^2/4) / exp(-s^2/2)-majorant constant: s e^{-s^2/2} <= sqrt(2) e^{-1/2} e^{-s^2/4}
_MAJORANT = math.sqrt(2.0) * math.exp(-0.5)


def _eval(f: ClosedForm, grid: GridSpec) -> np.ndarray:
    if isinstance(f, GridFunction):
        return np.asarray(f.values)
    if grid.kind is GridKind.BOX:
        return np.asarray(f(*grid.mesh()))
    r = grid.axis
    return np.asarray(f(r, np.zeros_like(r), np.zeros_like(r)))


@dataclass(frozen=True)
class KGZData:
    """Cauchy data (E0, E1, n0, n1); E components as closed forms."""

    E0: tuple[ClosedForm, ClosedForm, ClosedForm]
    E1: tuple[ClosedForm, ClosedForm, ClosedForm]
    n0: ClosedForm
    n1: ClosedForm
    family: str = ""
    parameters: dict = field(default_factory=dict)

    system = "kgz"

    def scaled(self, c: float) -> "KGZData":
        s = lambda f: f.scaled(c)  # noqa: E731
        return KGZData(tuple(map(s, self.E0)), tuple(map(s, self.E1)), s(self.n0), s(self.n1),
                       self.family, self.parameters)

    def state(self, grid: GridSpec, t0: float = 0.0) -> KGZState:
        E0 = np.stack([_eval(f, grid) for f in self.E0]).real
        E1 = np.stack([_eval(f, grid) for f in self.E1]).real
        return KGZState.from_data(grid, E0, E1, _eval(self.n0, grid).real, _eval(self.n1, grid).real, t0)


@dataclass(frozen=True)
class DKGData:
    """Cauchy data (psi0, v0, v1); psi0 as four complex closed forms."""

    psi0: tuple[ClosedForm, ClosedForm, ClosedForm, ClosedForm]
    v0: ClosedForm
    v1: ClosedForm
    family: str = ""
    parameters: dict = field(default_factory=dict)

    system = "dkg"

    def scaled(self, c: float) -> "DKGData":
        s = lambda f: f.scaled(c)  # noqa: E731
        return DKGData(tuple(map(s, self.psi0)), s(self.v0), s(self.v1), self.family, self.parameters)

    def state(self, grid: GridSpec, t0: float = 0.0) -> DKGState:
        psi = np.stack([_eval(f, grid) for f in self.psi0]).astype(complex)
        return DKGState.from_data(grid, psi, _eval(self.v0, grid).real, _eval(self.v1, grid).real, t0)


DEFAULTS = {
    "eps": 0.01,
    "k0": 1.0,
    "sigma_kg": 1.0,
    "sigma_wave": 1.0,
    "center": (0.0, 0.0, 0.0),
    "e1_ratio": 0.3,  # E1 = e1_ratio * E0 (also v1 for DKG)
    "n1_ratio": 0.5,  # n1 = n1_ratio * n0 for gaussian-bump
    "margin": 0.1,
    "mode": (1, 0, 0),
    "path": None,
}


def _params(parameters: dict) -> dict:
    unknown = set(parameters) - set(DEFAULTS)
    if unknown:
        raise DataError(f"unknown data parameter(s): {sorted(unknown)}")
    p = dict(DEFAULTS)
    p.update(parameters)
    for key in ("sigma_kg", "sigma_wave"):
        if not p[key] > 0:
            raise DataError(f"{key} must be positive")
    if p["eps"] < 0 or p["k0"] < 0:
        raise DataError("eps and k0 scales must be non-negative")
    if p["margin"] < 0:
        raise DataError("margin must be non-negative")
    p["center"] = tuple(float(c) for c in p["center"])
    return p


def certified_n1(n0: Gaussian, margin: float) -> Gaussian:
    """A Gaussian n1 with n1 >= |grad n0| + margin * (A/sigma) exp(-r^2/(4 sigma^2))."""
    A, s = float(np.real(n0.amplitude)), n0.sigma
    return Gaussian(A / s * (_MAJORANT + margin), math.sqrt(2.0) * s, n0.center)


def _check_resolved(p: dict, grid: GridSpec, family: Family) -> None:
    """Bumps must be sampled finely enough and vanish at the box faces.

    The certified pair needs sigma >= 2.5 h (aliasing below 1e-13) and the
    wider n1 Gaussian at least 7.5 widths from every face, so that the spectral
    gradient in the positivity certificate is accurate to roundoff. Plain
    bumps only need sigma >= h.
    """
    strict = family is Family.CERTIFIED_PAIR
    keys = ("sigma_wave",) if strict else ("sigma_kg", "sigma_wave")
    for key in keys:
        if p[key] < (2.5 if strict else 1.0) * grid.h:
            raise DataError(f"{key} = {p[key]} is under-resolved for spacing h = {grid.h:.4g}")
    if strict:
        gap = grid.extent - max(abs(c) for c in p["center"])
        need = 7.5 * math.sqrt(2.0) * p["sigma_wave"]
        if gap < need:
            raise DataError(f"the certified pair reaches the box faces: distance {gap:.4g} < {need:.4g}")


def make_data(family: Family | str, parameters: dict, grid: GridSpec, system: str = "kgz"):
    """Build KGZ or DKG data of a family on ``grid``.

    gaussian-bump: Gaussians of widths ``sigma_kg`` (E, psi) and ``sigma_wave``
    (n, v) scaled by ``eps`` and ``k0``. certified-positive-pair: like the bump
    but n1 is the Gaussian majorant of |grad n0| plus ``margin``. plane-mode:
    cos(k.x) with k = pi*mode/L. from-file: a checkpoint directory ``path``.
    """
    family = Family(family)
    p = _params(parameters)
    if system not in ("kgz", "dkg"):
        raise DataError(f"unknown system {system!r}")
    if family is Family.FROM_FILE:
        return _from_file(p, grid, system)
    if grid.kind is GridKind.RADIAL:
        if family is Family.PLANE_MODE:
            raise DataError("plane-mode data are not radial; use the box grid")
        if system == "dkg":
            raise DataError("the DKG system needs the box grid")
        if any(p["center"]):
            raise DataError("radial-line data must be centred at the origin")
    if family is not Family.PLANE_MODE and grid.kind is GridKind.BOX:
        _check_resolved(p, grid, family)
    if family is Family.CERTIFIED_PAIR and not p["margin"] > 0:
        raise DataError("certified-positive-pair needs margin > 0")
    eps, k0, c = p["eps"], p["k0"], p["center"]
    if family is Family.PLANE_MODE:
        m = tuple(int(x) for x in p["mode"])
        k = tuple(math.pi * mi / grid.extent for mi in m)
        kg = PlaneMode(1.0, k)
        wave = PlaneMode(1.0, k)
    else:
        kg = Gaussian(1.0, p["sigma_kg"], c)
        wave = Gaussian(1.0, p["sigma_wave"], c)
    z = Zero()
    if system == "kgz":
        E0 = (kg.scaled(eps), z, z)
        E1 = (kg.scaled(eps * p["e1_ratio"]), z, z)
        if family is Family.CERTIFIED_PAIR:
            n0 = Gaussian(k0, p["sigma_wave"], c)
            n1 = certified_n1(n0, p["margin"])
        else:
            n0 = wave.scaled(k0)
            n1 = wave.scaled(k0 * p["n1_ratio"])
        return KGZData(E0, E1, n0, n1, family.value, p)
    if family is Family.CERTIFIED_PAIR:
        raise DataError("certified-positive-pair applies to the KGZ wave data")
    psi0 = tuple(kg.scaled(eps * d) for d in SPINOR_DIRECTION)
    return DKGData(psi0, wave.scaled(k0), wave.scaled(k0 * p["e1_ratio"]), family.value, p)


def _from_file(p: dict, grid: GridSpec, system: str):
    if p["path"] is None:
        raise DataError("from-file data need a 'path'")
    path = Path(p["path"])
    if not path.exists():
        raise DataError(f"data file {path} does not exist")
    state = load_checkpoint(path)
    if state.grid != grid:
        raise DataError(f"checkpoint grid {state.grid} does not match the configured grid {grid}")
    g = lambda a: GridFunction(grid, np.array(a))  # noqa: E731
    if isinstance(state, KGZState):
        if system != "kgz":
            raise DataError("checkpoint holds KGZ data")
        n, nt = (f.values for f in reconstruct(state))
        return KGZData(tuple(g(c) for c in state.E.values), tuple(g(c) for c in state.E_t.values),
                       g(n), g(nt), Family.FROM_FILE.value, p)
    if system != "dkg":
        raise DataError("checkpoint holds DKG data")
    v, vt = (f.values for f in reconstruct(state))
    return DKGData(tuple(g(c) for c in state.psi.values), g(v), g(vt), Family.FROM_FILE.value, p)


def certify(data: KGZData, grid: GridSpec):
    """Positivity certificate for the wave pair (n0, n1) on a box grid."""
    n0 = ScalarField(grid, _eval(data.n0, grid).real)
    n1 = ScalarField(grid, _eval(data.n1, grid).real)
    return positivity_certificate(WaveData(n0, n1))
