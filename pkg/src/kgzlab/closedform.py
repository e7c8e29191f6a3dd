"""Closed-form data with exact partial derivatives.

Gaussians use the product Hermite formula
    d^alpha exp(-|y|^2/2) = prod_a (-1)^{alpha_a} He_{alpha_a}(y_a) exp(-|y|^2/2),
so weighted high-order Sobolev sums can be evaluated without numerical
differentiation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import sympy as sp
from numpy.polynomial import hermite_e

from . import spectral
from .grid import GridSpec

_T, _X = sp.Symbol("t", real=True), sp.symbols("x1 x2 x3", real=True)


def _hermite(n: int, y: np.ndarray) -> np.ndarray:
    if n == 0:
        return np.ones_like(y)
    c = np.zeros(n + 1)
    c[n] = 1.0
    return hermite_e.hermeval(y, c)


class ClosedForm:
    """Base class: ``derivative(alpha, x1, x2, x3)`` with ``alpha`` a triple of orders."""

    def derivative(self, alpha: Sequence[int], x1, x2, x3):
        raise NotImplementedError

    def __call__(self, x1, x2, x3):
        return self.derivative((0, 0, 0), x1, x2, x3)

    def gradient(self, x1, x2, x3):
        return [self.derivative(e, x1, x2, x3) for e in ((1, 0, 0), (0, 1, 0), (0, 0, 1))]

    def to_sympy(self) -> sp.Expr:
        raise NotImplementedError

    def scaled(self, c: complex) -> "ClosedForm":
        return Sum((self,), (c,))

    def __add__(self, other: "ClosedForm") -> "ClosedForm":
        return Sum((self, other), (1.0, 1.0))


@dataclass(frozen=True)
class Zero(ClosedForm):
    def derivative(self, alpha, x1, x2, x3):
        return np.zeros(np.broadcast_shapes(np.shape(x1), np.shape(x2), np.shape(x3)))

    def to_sympy(self):
        return sp.Integer(0)


@dataclass(frozen=True)
class Gaussian(ClosedForm):
    """amplitude * exp(-|x - center|^2 / (2 sigma^2))."""

    amplitude: complex = 1.0
    sigma: float = 1.0
    center: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")

    def derivative(self, alpha, x1, x2, x3):
        s = self.sigma
        out = self.amplitude
        for n, x, c in zip(alpha, (x1, x2, x3), self.center):
            y = (np.asarray(x, dtype=float) - c) / s
            factor = np.exp(-0.5 * y * y)
            if n:
                factor = factor * ((-1.0 / s) ** n * _hermite(n, y))
            out = out * factor  # separable, so 1D factors broadcast
        return out

    def to_sympy(self):
        r2 = sum((x - c) ** 2 for x, c in zip(_X, self.center))
        return sp.nsimplify(self.amplitude) * sp.exp(-r2 / (2 * sp.nsimplify(self.sigma) ** 2))


@dataclass(frozen=True)
class PlaneMode(ClosedForm):
    """amplitude * cos(k . x + phase)."""

    amplitude: float = 1.0
    k: tuple[float, float, float] = (1.0, 0.0, 0.0)
    phase: float = 0.0

    def derivative(self, alpha, x1, x2, x3):
        arg = self.k[0] * np.asarray(x1) + self.k[1] * np.asarray(x2) + self.k[2] * np.asarray(x3)
        order = sum(alpha)
        coef = self.amplitude * math.prod(kk**n for kk, n in zip(self.k, alpha))
        return coef * np.cos(arg + self.phase + 0.5 * np.pi * order)

    def to_sympy(self):
        arg = sum(sp.nsimplify(kk) * x for kk, x in zip(self.k, _X))
        return sp.nsimplify(self.amplitude) * sp.cos(arg + sp.nsimplify(self.phase))


@dataclass(frozen=True)
class Sum(ClosedForm):
    terms: tuple[ClosedForm, ...]
    coefficients: tuple[complex, ...]

    def derivative(self, alpha, x1, x2, x3):
        out = 0.0
        for c, f in zip(self.coefficients, self.terms):
            out = out + c * f.derivative(alpha, x1, x2, x3)
        if np.isscalar(out):
            out = np.full(np.broadcast_shapes(np.shape(x1), np.shape(x2), np.shape(x3)), out)
        return out

    def to_sympy(self):
        return sum((sp.nsimplify(c) * f.to_sympy() for c, f in zip(self.coefficients, self.terms)), sp.Integer(0))


@dataclass(frozen=True, eq=False)
class GridFunction(ClosedForm):
    """Values on a box grid; derivatives are spectral and only valid at the nodes."""

    grid: GridSpec
    values: np.ndarray

    def derivative(self, alpha, x1=None, x2=None, x3=None):
        wn = self.grid.wavenumbers()
        fh = spectral.fft3(self.values)
        for a, n in enumerate(alpha):
            if n:
                fh = fh * (1j * wn.k_deriv[a] if n % 2 else 1j * wn.k[a]) ** n
        return spectral.ifft3(fh, real=not np.iscomplexobj(self.values))

    def to_sympy(self):
        raise TypeError("grid data has no symbolic form")


def multi_indices(order: int) -> list[tuple[int, int, int]]:
    """All alpha in N^3 with |alpha| = order."""
    return [(i, j, order - i - j) for i in range(order + 1) for j in range(order + 1 - i)]


def multinomial(alpha: Sequence[int]) -> int:
    return math.factorial(sum(alpha)) // math.prod(math.factorial(a) for a in alpha)
