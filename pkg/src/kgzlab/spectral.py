"""FFT plumbing for the periodic box: wavenumbers, derivatives, de-aliasing.

All transforms act on the trailing three axes so stacked component arrays
(shape ``(ncomp, N, N, N)``) are transformed in one call.
"""
from __future__ import annotations

import os
from functools import lru_cache

import numpy as np
import scipy.fft as sfft

AXES = (-3, -2, -1)
THREADS_ENV = "KGZLAB_THREADS"

_workers: int | None = None


def set_threads(n: int | None) -> None:
    """Set the worker count used by every FFT call (None = library default)."""
    global _workers
    if n is not None and n < 1:
        raise ValueError(f"thread count must be >= 1, got {n}")
    _workers = n


def threads_from_env() -> int | None:
    raw = os.environ.get(THREADS_ENV)
    if raw is None or raw.strip() == "":
        return None
    return int(raw)


def fft3(a: np.ndarray) -> np.ndarray:
    return sfft.fftn(a, axes=AXES, workers=_workers)


def ifft3(a: np.ndarray, real: bool = False) -> np.ndarray:
    out = sfft.ifftn(a, axes=AXES, workers=_workers)
    return out.real.copy() if real else out


@lru_cache(maxsize=16)
def _wavenumbers(n: int, h: float) -> tuple[np.ndarray, np.ndarray]:
    k = 2.0 * np.pi * sfft.fftfreq(n, d=h)
    k_odd = k.copy()
    if n % 2 == 0:
        # Nyquist mode has no odd partner; first derivatives drop it.
        k_odd[n // 2] = 0.0
    k.setflags(write=False)
    k_odd.setflags(write=False)
    return k, k_odd


class Wavenumbers:
    """Broadcastable wavenumber arrays for an ``n**3`` box with spacing ``h``."""

    def __init__(self, n: int, h: float):
        k, k_odd = _wavenumbers(n, float(h))
        self.n = n
        self.h = h
        self.k = (k[:, None, None], k[None, :, None], k[None, None, :])
        self.k_deriv = (k_odd[:, None, None], k_odd[None, :, None], k_odd[None, None, :])
        self.k2 = self.k[0] ** 2 + self.k[1] ** 2 + self.k[2] ** 2
        self.kabs = np.sqrt(self.k2)
        kmax = np.pi / h
        cut = (2.0 / 3.0) * kmax
        self.dealias_mask = (
            (np.abs(self.k[0]) <= cut) & (np.abs(self.k[1]) <= cut) & (np.abs(self.k[2]) <= cut)
        )


@lru_cache(maxsize=16)
def wavenumbers(n: int, h: float) -> Wavenumbers:
    return Wavenumbers(n, h)


def deriv(a: np.ndarray, axis: int, wn: Wavenumbers, order: int = 1) -> np.ndarray:
    """Spectral derivative of order 1 or 2 along spatial ``axis`` (0, 1, 2)."""
    ahat = fft3(a)
    if order == 1:
        ahat = ahat * (1j * wn.k_deriv[axis])
    elif order == 2:
        ahat = ahat * (-(wn.k[axis] ** 2))
    else:
        raise ValueError("order must be 1 or 2")
    return ifft3(ahat, real=not np.iscomplexobj(a))


def gradient(a: np.ndarray, wn: Wavenumbers) -> list[np.ndarray]:
    ahat = fft3(a)
    real = not np.iscomplexobj(a)
    return [ifft3(ahat * (1j * wn.k_deriv[i]), real=real) for i in range(3)]


def laplacian(a: np.ndarray, wn: Wavenumbers) -> np.ndarray:
    return ifft3(fft3(a) * (-wn.k2), real=not np.iscomplexobj(a))


def dealias(a: np.ndarray, wn: Wavenumbers) -> np.ndarray:
    """2/3-rule truncation of a physical-space product."""
    return ifft3(fft3(a) * wn.dealias_mask, real=not np.iscomplexobj(a))
