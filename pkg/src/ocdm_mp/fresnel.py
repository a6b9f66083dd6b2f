"""Discrete Fresnel transform and discrete chirps.

All quantities live in discrete time with the block duration equal to ``N``
sample periods, so the DFnT matrix is exactly unitary:

    [Phi]_{m,n} = N**-0.5 * exp(-j*pi/4) * exp(j*pi*(n - m)**2 / N)

and factorises as ``Phi = Theta2 @ F @ Theta1`` with ``F`` the normalised DFT.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


def _check_length(x: np.ndarray, n: int) -> np.ndarray:
    x = np.asarray(x, dtype=np.complex128)
    if x.shape[0] != n:
        raise ValueError(f"expected leading dimension {n}, got {x.shape[0]}")
    return x


@dataclass(frozen=True)
class FresnelTransform:
    """Precomputed N-point DFnT / IDFnT.

    Transforms act along axis 0, so a 2-D input is treated as a stack of
    column vectors.
    """

    n_chirps: int
    theta1: np.ndarray = field(init=False, repr=False)
    theta2: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        n = int(self.n_chirps)
        if not is_power_of_two(n):
            raise ValueError(f"n_chirps must be a power of two, got {self.n_chirps}")
        m = np.arange(n)
        quad = np.exp(1j * np.pi * (m.astype(np.float64) ** 2) / n)
        theta1 = np.exp(-1j * np.pi / 4) * quad
        theta2 = quad.copy()
        theta1.setflags(write=False)
        theta2.setflags(write=False)
        object.__setattr__(self, "n_chirps", n)
        object.__setattr__(self, "theta1", theta1)
        object.__setattr__(self, "theta2", theta2)

    def _bcast(self, v: np.ndarray, x: np.ndarray) -> np.ndarray:
        return v.reshape((-1,) + (1,) * (x.ndim - 1))

    def forward(self, x: np.ndarray) -> np.ndarray:
        """Time domain -> Fresnel domain, ``Theta2 @ F @ Theta1 @ x``."""
        x = _check_length(x, self.n_chirps)
        t1 = self._bcast(self.theta1, x)
        t2 = self._bcast(self.theta2, x)
        return t2 * np.fft.fft(t1 * x, axis=0, norm="ortho")

    def inverse(self, y: np.ndarray) -> np.ndarray:
        """Fresnel domain -> time domain, ``Theta1^H @ F^H @ Theta2^H @ y``."""
        y = _check_length(y, self.n_chirps)
        t1 = self._bcast(self.theta1, y)
        t2 = self._bcast(self.theta2, y)
        return np.conj(t1) * np.fft.ifft(np.conj(t2) * y, axis=0, norm="ortho")

    def matrix(self) -> np.ndarray:
        """Dense DFnT matrix ``Phi`` built element by element."""
        return dfnt_matrix(self.n_chirps)


def dfnt_matrix(n: int) -> np.ndarray:
    """Dense ``N x N`` DFnT matrix from its closed-form entries."""
    if not is_power_of_two(n):
        raise ValueError(f"n must be a power of two, got {n}")
    idx = np.arange(n, dtype=np.float64)
    diff = idx[None, :] - idx[:, None]
    return np.exp(-1j * np.pi / 4) * np.exp(1j * np.pi * diff**2 / n) / np.sqrt(n)


def dfnt_direct(x: np.ndarray) -> np.ndarray:
    """O(N^2) reference DFnT: explicit matrix-vector product."""
    x = np.asarray(x, dtype=np.complex128)
    n = x.shape[0]
    return dfnt_matrix(n) @ x


def dfnt_fast(x: np.ndarray, transform: FresnelTransform | None = None) -> np.ndarray:
    x = np.asarray(x, dtype=np.complex128)
    if transform is None:
        transform = FresnelTransform(x.shape[0])
    return transform.forward(x)


def idfnt_fast(y: np.ndarray, transform: FresnelTransform | None = None) -> np.ndarray:
    y = np.asarray(y, dtype=np.complex128)
    if transform is None:
        transform = FresnelTransform(y.shape[0])
    return transform.inverse(y)


def discrete_chirp(m: int, n: int) -> np.ndarray:
    """Samples of the ``m``-th discrete chirp, unit energy.

    ``psi_m[k] = N**-0.5 * exp(j*pi/4) * exp(-j*pi*(k - m)**2 / N)``; this is
    ``conj(Phi[m, :])``, i.e. column ``m`` of the IDFnT matrix.
    """
    if not 0 <= m < n:
        raise ValueError(f"chirp index {m} out of range for N={n}")
    k = np.arange(n, dtype=np.float64)
    return np.exp(1j * np.pi / 4) * np.exp(-1j * np.pi * (k - m) ** 2 / n) / np.sqrt(n)


def ocdm_modulate(x: np.ndarray, transform: FresnelTransform | None = None) -> np.ndarray:
    """Fresnel-domain symbols to time-domain block (no CP)."""
    return idfnt_fast(x, transform)


def ocdm_demodulate(r: np.ndarray, transform: FresnelTransform | None = None) -> np.ndarray:
    """Time-domain block (CP removed) to Fresnel-domain observation."""
    return dfnt_fast(r, transform)
