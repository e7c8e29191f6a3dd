"""Dirac matrices for {g^mu, g^nu} = -2 eta_{mu nu} I with eta = diag(-1, 1, 1, 1)."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

ETA = np.diag([-1.0, 1.0, 1.0, 1.0])
I4 = np.eye(4, dtype=complex)

SIGMA = (
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)


def _standard() -> np.ndarray:
    g = np.zeros((4, 4, 4), dtype=complex)
    g[0] = np.diag([1, 1, -1, -1]).astype(complex)
    z = np.zeros((2, 2), dtype=complex)
    for a, s in enumerate(SIGMA, start=1):
        g[a] = np.block([[z, s], [-s, z]])
    return g


@dataclass(frozen=True)
class GammaSet:
    """Four 4x4 matrices gamma[0..3] plus the metric signature."""

    gamma: np.ndarray = field(default_factory=_standard)
    eta: np.ndarray = field(default_factory=lambda: ETA.copy())

    def __post_init__(self):
        g = np.array(self.gamma, dtype=complex)
        if g.shape != (4, 4, 4):
            raise ValueError(f"expected four 4x4 matrices, got shape {g.shape}")
        g.setflags(write=False)
        object.__setattr__(self, "gamma", g)

    def __getitem__(self, mu: int) -> np.ndarray:
        return self.gamma[mu]

    @cached_property
    def alpha(self) -> np.ndarray:
        """alpha_a = gamma^0 gamma^a, a = 1..3 (stored at index a-1)."""
        return np.stack([self.gamma[0] @ self.gamma[a] for a in (1, 2, 3)])

    def conjugated(self, u: np.ndarray) -> "GammaSet":
        """Unitarily equivalent representation U gamma U^*."""
        return GammaSet(np.einsum("ij,mjk,lk->mil", u, self.gamma, u.conj()), self.eta)


STANDARD = GammaSet()


def anticommutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b + b @ a


def clifford_residual(g: GammaSet = STANDARD) -> float:
    """Max entrywise violation of the anticommutation and adjoint relations."""
    res = 0.0
    for mu in range(4):
        for nu in range(4):
            d = anticommutator(g[mu], g[nu]) + 2.0 * g.eta[mu, nu] * I4
            res = max(res, float(np.abs(d).max()))
        # (gamma^mu)^* = -eta_{mu nu} gamma^nu, eta diagonal
        adj = g[mu].conj().T + g.eta[mu, mu] * g[mu]
        res = max(res, float(np.abs(adj).max()))
    return res


def unit_direction(omega) -> np.ndarray:
    w = np.asarray(omega, dtype=float)
    if w.shape[-1] != 3:
        raise ValueError("direction must have three components")
    err = np.abs(np.linalg.norm(w, axis=-1) - 1.0)
    if np.any(err > 1e-12):
        raise ValueError(f"direction is not a unit vector (| |w| - 1 | = {err.max():.3g})")
    return w


def omega_alpha(omega: np.ndarray, g: GammaSet = STANDARD) -> np.ndarray:
    """omega_a gamma^0 gamma^a, broadcast over leading axes of ``omega``."""
    return np.einsum("...a,aij->...ij", omega, g.alpha)


def project_pm(phi, omega, g: GammaSet = STANDARD) -> tuple[np.ndarray, np.ndarray]:
    """([phi]_+, [phi]_-) = phi +/- omega_a gamma^0 gamma^a phi.

    ``phi`` has shape (..., 4) and ``omega`` shape (..., 3).
    """
    w = unit_direction(omega)
    phi = np.asarray(phi, dtype=complex)
    a_phi = np.einsum("...ij,...j->...i", omega_alpha(w, g), phi)
    return phi + a_phi, phi - a_phi


def bar(phi1, phi2, g: GammaSet = STANDARD) -> np.ndarray:
    """phi1^* gamma^0 phi2 over the trailing spinor axis."""
    return np.einsum("...i,ij,...j->...", np.conj(phi1), g[0], phi2)


def bilinear_decomposition_residual(phi1, phi2, omega, g: GammaSet = STANDARD) -> np.ndarray:
    """|P1^* g0 P2 - (1/4)([P1]_-^* g0 [P2]_- + [P1]_-^* g0 [P2]_+ + [P1]_+^* g0 [P2]_-)|."""
    p1p, p1m = project_pm(phi1, omega, g)
    p2p, p2m = project_pm(phi2, omega, g)
    rhs = 0.25 * (bar(p1m, p2m, g) + bar(p1m, p2p, g) + bar(p1p, p2m, g))
    return np.abs(bar(phi1, phi2, g) - rhs)


def dirac_symbol(k, g: GammaSet = STANDARD, mass: float = 0.0) -> np.ndarray:
    """D(k) = gamma^0 gamma^a k_a (+ mass * gamma^0), the Fourier symbol of -i g0 g^a d_a."""
    k = np.asarray(k, dtype=float)
    out = np.einsum("...a,aij->...ij", k, g.alpha)
    if mass:
        out = out + mass * g[0]
    return out


def projector_residual(omega, g: GammaSet = STANDARD) -> float:
    """max |P^2 - 2P| for P = I - omega_a gamma^0 gamma^a."""
    w = unit_direction(omega)
    p = I4 - omega_alpha(w, g)
    return float(np.abs(p @ p - 2.0 * p).max())


def random_unitary(rng: np.random.Generator, n: int = 4) -> np.ndarray:
    z = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_unit_vectors(rng: np.random.Generator, n: int) -> np.ndarray:
    v = rng.normal(size=(n, 3))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def spinor_apply(m: np.ndarray, psi: np.ndarray) -> np.ndarray:
    """Apply a constant 4x4 matrix to a spinor field of shape (4, ...)."""
    return np.tensordot(m, psi, axes=(1, 0))
