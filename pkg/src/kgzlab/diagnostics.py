"""Decay fits, weighted-sup boundedness and pull-back scattering distances."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .energy import natural_energy
from .grid import Field, GridKind, GridSpec, WeightProfile
from .propagators import PropagatorKind, dirac_evolve, scalar_evolve
from .systems import radial_group, radial_operator

SCHEMA_VERSION = "kgzlab.diagnostics/1"


class Observable(str, Enum):
    SUP_FIELD = "sup-field"
    WEIGHTED_SUP = "weighted-sup"


class DiagnosticError(ValueError):
    pass


# ---------------------------------------------------------------- decay fits


@dataclass(frozen=True)
class DecayFit:
    name: str
    observable: Observable
    window: tuple[float, float]
    exponent: float
    r2: float
    times: np.ndarray
    values: np.ndarray
    intercept: float = 0.0

    @property
    def ratio(self) -> float:
        """max/min of the series on the window."""
        return float(self.values.max() / self.values.min())

    def bounded(self, max_ratio: float = 3.0) -> bool:
        return self.ratio <= max_ratio

    def to_json(self) -> dict:
        return {
            "schema": SCHEMA_VERSION,
            "kind": "decay-fit",
            "name": self.name,
            "observable": self.observable.value,
            "window": list(self.window),
            "exponent": self.exponent,
            "r2": self.r2,
            "ratio": self.ratio,
            "samples": int(self.times.size),
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", self.name])
        for t, v in zip(self.times, self.values):
            w.writerow([repr(float(t)), repr(float(v))])
        return buf.getvalue()


def fit_power_law(times, values) -> tuple[float, float, float]:
    """Least-squares slope, intercept and R^2 of log(values) against log(times)."""
    lt, lv = np.log(np.asarray(times, float)), np.log(np.asarray(values, float))
    A = np.stack([lt, np.ones_like(lt)], axis=1)
    (slope, icpt), *_ = np.linalg.lstsq(A, lv, rcond=None)
    resid = lv - (slope * lt + icpt)
    ss_tot = float(np.sum((lv - lv.mean()) ** 2))
    # a flat series only leaves roundoff in ss_tot
    flat = ss_tot <= 1e-24 * max(1.0, float(np.sum(lv**2)))
    r2 = 1.0 if flat else 1.0 - float(np.sum(resid**2)) / ss_tot
    return float(slope), float(icpt), r2


def _check_window(window, extent, data_radius):
    t0, t1 = window
    if not (0 < t0 < t1):
        raise DiagnosticError(f"window {window} must satisfy 0 < t_min < t_max")
    if extent is not None and data_radius is not None and t1 > extent - data_radius:
        raise DiagnosticError(
            f"window end {t1} exceeds the uncontaminated region L - R = {extent - data_radius}"
        )


def _weight_fn(weight) -> Callable[[float, np.ndarray], np.ndarray] | None:
    if weight is None:
        return None
    if isinstance(weight, WeightProfile):
        return weight
    if callable(weight):
        return weight
    profiles = tuple(weight)

    def product(t, r):
        out = 1.0
        for p in profiles:
            out = out * p(t, r)
        return out

    return product


def series_from_fields(
    fields: Iterable[Field], observable: Observable | str = Observable.SUP_FIELD, weight=None, mask=None
) -> tuple[np.ndarray, np.ndarray]:
    """(t_j, sup_x |f_j| w(t_j, x)); ``weight`` is a WeightProfile, a sequence of them, or w(t, r)."""
    observable = Observable(observable)
    wfn = _weight_fn(weight) if observable is Observable.WEIGHTED_SUP else None
    if observable is Observable.WEIGHTED_SUP and wfn is None:
        raise DiagnosticError("weighted-sup needs a weight")
    ts, vs = [], []
    for f in fields:
        mag = f.pointwise_abs()
        if wfn is not None:
            mag = mag * wfn(f.t, f.grid.radius())
        mag = np.broadcast_to(mag, f.grid.shape)
        if mask is not None:
            mag = mag[mask]
        ts.append(f.t)
        vs.append(float(np.max(mag)))
    return np.asarray(ts), np.asarray(vs)


def decay_fit(
    trajectory,
    observable: Observable | str = Observable.SUP_FIELD,
    weight=None,
    window: tuple[float, float] | None = None,
    name: str = "field",
    extent: float | None = None,
    data_radius: float | None = None,
) -> DecayFit:
    """Fit sup_x |f| (or the weighted sup) against t on a log-log scale.

    ``trajectory`` is an iterable of fields, or a pair ``(times, values)`` of an
    already reduced series. Passing ``extent`` and ``data_radius`` enforces
    that the window ends before the periodic images can interact.
    """
    observable = Observable(observable)
    if isinstance(trajectory, tuple) and len(trajectory) == 2 and not isinstance(trajectory[0], Field):
        times, values = (np.asarray(x, float) for x in trajectory)
    else:
        times, values = series_from_fields(trajectory, observable, weight)
    if window is None:
        window = (float(times.min()), float(times.max()))
    _check_window(window, extent, data_radius)
    sel = (times >= window[0] - 1e-12) & (times <= window[1] + 1e-12)
    if sel.sum() < 2:
        raise DiagnosticError("fewer than two samples in the window")
    t, v = times[sel], values[sel]
    if not np.all(v > 0) or not np.all(np.isfinite(v)):
        raise DiagnosticError("decay series must be strictly positive and finite on the window")
    slope, icpt, r2 = fit_power_law(t, v)
    return DecayFit(name, observable, (float(window[0]), float(window[1])), slope, r2, t, v, icpt)


# ---------------------------------------------------------------- scattering


_MASS2 = {PropagatorKind.WAVE: 0.0, PropagatorKind.KLEIN_GORDON: 1.0}


def pull_back(kind: PropagatorKind | str, grid: GridSpec, t: float, data, t0: float = 0.0, mass: float = 0.0):
    """S(t0 - t) applied to the state at time t: (u, u_t) for scalars, psi for Dirac.

    ``mass`` is the Dirac mass; the scalar masses are fixed by the kind.
    """
    kind = PropagatorKind(kind)
    s = t0 - t
    if kind is PropagatorKind.DIRAC:
        if grid.kind is not GridKind.BOX:
            raise DiagnosticError("the Dirac group is only available on the box")
        return dirac_evolve(np.asarray(data), grid, s, mass=mass)
    u, ut = (np.asarray(x) for x in data)
    if grid.kind is GridKind.BOX:
        return scalar_evolve(u, ut, grid, s, _MASS2[kind])
    r = grid.axis
    w, wt = radial_group(grid.extent, grid.points, float(s), _MASS2[kind]).evolve(r * u, r * ut)
    return w / r, wt / r


def component_norm(kind: PropagatorKind | str, grid: GridSpec, data) -> float:
    """H^1-dot x L^2 (wave), H^1 x L^2 (Klein-Gordon) or L^2 (Dirac).

    On the radial line the gradient part is the quadratic form of the same
    4th-order operator that generates the free group, so free trajectories
    have distance zero to roundoff.
    """
    kind = PropagatorKind(kind)
    if kind is PropagatorKind.DIRAC:
        psi = np.asarray(data)
        return math.sqrt(float(np.sum(np.abs(psi) ** 2)) * grid.h**3)
    u, ut = data
    m2 = _MASS2[kind]
    if grid.kind is GridKind.BOX:
        return math.sqrt(natural_energy(u, ut, grid, m2))
    A, _, _ = radial_operator(grid.extent, grid.points)
    r = grid.axis
    w, wt = r * u, r * ut
    q = -float(w @ (A @ w)) + float(wt @ wt) + m2 * float(w @ w)
    return math.sqrt(max(q, 0.0) * 4.0 * math.pi * grid.h)


@dataclass(frozen=True)
class ScatteringResult:
    kind: PropagatorKind
    pairs: tuple[tuple[float, float], ...]
    distances: tuple[float, ...]

    @property
    def decreasing(self) -> bool:
        d = self.distances
        return all(b < a for a, b in zip(d, d[1:]))

    def to_json(self) -> dict:
        return {
            "schema": SCHEMA_VERSION,
            "kind": "scattering",
            "component": self.kind.value,
            "pairs": [list(p) for p in self.pairs],
            "distances": list(self.distances),
            "decreasing": self.decreasing,
        }


def dyadic_pairs(k_min: int, k_max: int) -> tuple[tuple[float, float], ...]:
    return tuple((float(2**k), float(2 ** (k + 1))) for k in range(k_min, k_max + 1))


def scattering_residual(
    trajectory: Mapping[float, object],
    kind: PropagatorKind | str,
    pairs: Sequence[tuple[float, float]],
    grid: GridSpec,
    t0: float = 0.0,
    tol: float = 1e-9,
    mass: float = 0.0,
) -> ScatteringResult:
    """d(t1, t2) = || S(t0-t2) state(t2) - S(t0-t1) state(t1) || per pair.

    ``trajectory`` maps times to states: ``(u, u_t)`` arrays for the scalar
    kinds and ``psi`` for Dirac. Times are matched to within ``tol``.
    """
    kind = PropagatorKind(kind)
    times = np.array(sorted(trajectory))

    def at(t):
        j = int(np.argmin(np.abs(times - t)))
        if abs(times[j] - t) > tol * max(1.0, abs(t)):
            raise DiagnosticError(f"no snapshot at t = {t}")
        tj = float(times[j])
        return pull_back(kind, grid, tj, trajectory[tj], t0, mass)

    cache: dict[float, object] = {}
    dists = []
    for t1, t2 in pairs:
        for t in (t1, t2):
            if t not in cache:
                cache[t] = at(t)
        a, b = cache[t1], cache[t2]
        if kind is PropagatorKind.DIRAC:
            diff = b - a
        else:
            diff = (b[0] - a[0], b[1] - a[1])
        dists.append(component_norm(kind, grid, diff))
    return ScatteringResult(kind, tuple((float(a), float(b)) for a, b in pairs), tuple(dists))


# ---------------------------------------------------------------- summaries


@dataclass
class Summary:
    """Collects diagnostic records and verdicts for one JSON document."""

    records: list[dict] = field(default_factory=list)
    verdicts: dict[str, bool] = field(default_factory=dict)

    def add(self, record: dict, verdict_name: str | None = None, verdict: bool | None = None) -> None:
        self.records.append(record)
        if verdict_name is not None:
            self.verdicts[verdict_name] = bool(verdict)

    @property
    def passed(self) -> bool:
        return all(self.verdicts.values())

    def to_json(self) -> str:
        doc = {"schema": SCHEMA_VERSION, "records": self.records, "verdicts": self.verdicts,
               "passed": self.passed}
        return json.dumps(doc, indent=2, sort_keys=True, default=_json_default)


def _json_default(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, Enum):
        return x.value
    raise TypeError(f"not JSON serializable: {type(x)}")
