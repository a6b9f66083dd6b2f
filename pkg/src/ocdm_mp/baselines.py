"""Linear MMSE block equalisation and the OFDM reference link."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .constellation import Constellation


@dataclass(frozen=True)
class MmseEqualizer:
    channel_matrix: np.ndarray
    noise_var: float

    def __post_init__(self):
        if self.noise_var <= 0:
            raise ValueError(f"noise_var must be positive, got {self.noise_var}")

    def soft(self, y: np.ndarray) -> np.ndarray:
        return mmse_soft(y, self.channel_matrix, self.noise_var)


def mmse_soft(y: np.ndarray, g: np.ndarray, noise_var: float) -> np.ndarray:
    """``G^H (G G^H + N0 I)^-1 y`` via a Hermitian positive-definite solve."""
    g = np.asarray(g)
    if g.ndim != 2 or g.shape[0] != g.shape[1]:
        raise ValueError(f"G must be square, got shape {g.shape}")
    if noise_var <= 0:
        raise ValueError(f"noise_var must be positive, got {noise_var}")
    a = g @ g.conj().T
    a[np.diag_indices_from(a)] += noise_var
    z = scipy.linalg.solve(a, y, assume_a="pos")
    return g.conj().T @ z


def mmse_detect(y, g, noise_var, constellation: Constellation) -> np.ndarray:
    """Hard MMSE decisions as constellation indices."""
    return constellation.nearest(mmse_soft(y, g, noise_var))


def zf_soft(y, g) -> np.ndarray:
    return np.linalg.solve(g, y)


def matched_filter_soft(y, g) -> np.ndarray:
    # scaled so a unit-gain scalar channel maps back to the symbol
    g = np.asarray(g)
    return (g.conj().T @ y) / np.sum(np.abs(g) ** 2, axis=0)


def ofdm_modulate(x: np.ndarray) -> np.ndarray:
    """``F^H x`` with the unitary DFT."""
    return np.fft.ifft(x, axis=0, norm="ortho")


def ofdm_demodulate(r: np.ndarray) -> np.ndarray:
    return np.fft.fft(r, axis=0, norm="ortho")


def ofdm_effective_channel(h: np.ndarray) -> np.ndarray:
    """Frequency-domain channel ``F H F^H``."""
    a = np.fft.fft(h, axis=0, norm="ortho")
    return np.fft.fft(a.conj().T, axis=0, norm="ortho").conj().T


def diagonal_mmse_soft(y, g, noise_var) -> np.ndarray:
    """One-tap per-subcarrier MMSE that ignores all off-diagonal (ICI) terms."""
    d = np.diag(g)
    return np.conj(d) * y / (np.abs(d) ** 2 + noise_var)
