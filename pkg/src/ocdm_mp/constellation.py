"""Unit-energy Gray-mapped constellations (BPSK, 4-QAM)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Constellation:
    name: str
    points: np.ndarray
    labels: np.ndarray  # labels[m] = bit tuple of points[m], MSB first

    @property
    def order(self) -> int:
        return len(self.points)

    @property
    def bits_per_symbol(self) -> int:
        return int(np.log2(self.order))

    @property
    def energy(self) -> float:
        return float(np.mean(np.abs(self.points) ** 2))

    def map_bits(self, bits: np.ndarray) -> np.ndarray:
        """Map a flat bit array (length multiple of log2 M) to symbols."""
        return self.points[self.bits_to_indices(bits)]

    def bits_to_indices(self, bits: np.ndarray) -> np.ndarray:
        bits = np.asarray(bits, dtype=np.int64).reshape(-1, self.bits_per_symbol)
        weights = 1 << np.arange(self.bits_per_symbol - 1, -1, -1)
        # labels are stored in natural binary order of the index
        return bits @ weights

    def indices_to_bits(self, idx: np.ndarray) -> np.ndarray:
        return self.labels[np.asarray(idx)].reshape(-1)

    def nearest(self, z: np.ndarray) -> np.ndarray:
        """Index of the closest constellation point to each entry of ``z``."""
        z = np.asarray(z)
        return np.argmin(np.abs(z[..., None] - self.points) ** 2, axis=-1)


def _labels(m: int) -> np.ndarray:
    k = int(np.log2(m))
    idx = np.arange(m)
    return ((idx[:, None] >> np.arange(k - 1, -1, -1)) & 1).astype(np.int8)


def bpsk() -> Constellation:
    # bit 0 -> +1, bit 1 -> -1
    return Constellation("BPSK", np.array([1.0 + 0j, -1.0 + 0j]), _labels(2))


def qam4() -> Constellation:
    # bits (b0, b1) -> ((1 - 2 b0) + j (1 - 2 b1)) / sqrt(2): Gray by construction
    lab = _labels(4)
    pts = ((1 - 2 * lab[:, 0]) + 1j * (1 - 2 * lab[:, 1])) / np.sqrt(2)
    return Constellation("QAM4", pts.astype(np.complex128), lab)


def get_constellation(name: str) -> Constellation:
    key = name.upper().replace("-", "")
    if key == "BPSK":
        return bpsk()
    if key in ("QAM4", "4QAM", "QPSK"):
        return qam4()
    raise ValueError(f"unknown constellation {name!r}")
