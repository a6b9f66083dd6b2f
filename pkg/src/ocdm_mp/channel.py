"""Multi-lag multi-Doppler (MLMD) linear time-variant channels.

A channel is a list of discrete paths, each with complex gain ``h``, integer
delay ``l`` (samples) and a Doppler normalised to the subcarrier spacing,
split into an integer part ``k`` and a fractional part ``kappa`` in
``(-0.5, 0.5]``. Received samples (CP removed) are

    r[n] = sum_i h~_i exp(j 2 pi (k_i + kappa_i) n / N) s[(n - l_i) mod N] + w[n]

with equivalent gains ``h~_i = h_i exp(-j 2 pi (k_i + kappa_i) l_i / N)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class PathSpec:
    gain: complex
    delay_taps: int
    doppler_int: int = 0
    doppler_frac: float = 0.0

    def __post_init__(self):
        if self.delay_taps < 0:
            raise ValueError(f"delay_taps must be nonnegative, got {self.delay_taps}")
        if not -0.5 < self.doppler_frac <= 0.5:
            raise ValueError(f"doppler_frac must lie in (-0.5, 0.5], got {self.doppler_frac}")

    @property
    def doppler(self) -> float:
        return self.doppler_int + self.doppler_frac


@dataclass(frozen=True)
class ChannelRealization:
    paths: tuple[PathSpec, ...]
    n_chirps: int

    def __post_init__(self):
        object.__setattr__(self, "paths", tuple(self.paths))
        if not self.paths:
            raise ValueError("a channel needs at least one path")
        for p in self.paths:
            if p.delay_taps >= self.n_chirps:
                raise ValueError(
                    f"path delay {p.delay_taps} taps exceeds block length {self.n_chirps}"
                )

    @property
    def n_paths(self) -> int:
        return len(self.paths)

    @property
    def equivalent_gains(self) -> np.ndarray:
        n = self.n_chirps
        return np.array(
            [p.gain * np.exp(-2j * np.pi * p.doppler * p.delay_taps / n) for p in self.paths]
        )

    @property
    def max_delay(self) -> int:
        return max(p.delay_taps for p in self.paths)

    @property
    def is_integer_doppler(self) -> bool:
        return all(p.doppler_frac == 0.0 for p in self.paths)


@dataclass(frozen=True)
class DelayPowerProfile:
    """Tapped delay line with a Jakes-like Doppler law ``v_max * cos(theta)``.

    Delays in seconds, powers in dB, all frequencies in Hz.
    """

    delays_s: tuple[float, ...]
    powers_db: tuple[float, ...]
    max_doppler_hz: float
    bandwidth_hz: float
    n_chirps: int
    guard_interval_s: float
    carrier_hz: float = 0.0
    name: str = ""
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "delays_s", tuple(float(d) for d in self.delays_s))
        object.__setattr__(self, "powers_db", tuple(float(p) for p in self.powers_db))
        d = np.asarray(self.delays_s)
        if len(d) == 0 or len(d) != len(self.powers_db):
            raise ValueError("delays and powers must be nonempty and of equal length")
        if d[0] != 0.0:
            raise ValueError("first tap delay must be 0")
        if np.any(np.diff(d) <= 0):
            raise ValueError("tap delays must be strictly increasing")

    @property
    def sample_rate(self) -> float:
        return self.bandwidth_hz

    @property
    def subcarrier_spacing(self) -> float:
        return self.bandwidth_hz / self.n_chirps

    @property
    def cp_taps(self) -> int:
        return cp_length_taps(self.guard_interval_s, self.sample_rate)

    @property
    def normalized_max_doppler(self) -> float:
        return self.max_doppler_hz / self.subcarrier_spacing


def cp_length_taps(guard_interval_s: float, sample_rate: float) -> int:
    # guard against 48.000000001-style float noise before taking the ceiling
    return int(math.ceil(guard_interval_s * sample_rate - 1e-9))


def split_doppler(nu: float) -> tuple[int, float]:
    """Split a normalised Doppler into ``k + kappa`` with ``kappa`` in (-0.5, 0.5]."""
    k = int(math.ceil(nu - 0.5))
    kappa = nu - k
    if kappa <= -0.5:  # float edge
        k -= 1
        kappa = nu - k
    return k, kappa


def quantize_path(delay_s: float, doppler_hz: float, sample_rate: float, n_chirps: int):
    """Quantise a physical delay/Doppler pair to ``(l, k, kappa)``."""
    if delay_s < 0:
        raise ValueError(f"delay must be nonnegative, got {delay_s}")
    l = int(round(delay_s * sample_rate))
    if l >= n_chirps:
        raise ValueError(f"delay {delay_s} s ({l} taps) exceeds block of {n_chirps} samples")
    k, kappa = split_doppler(doppler_hz / (sample_rate / n_chirps))
    return l, k, kappa


def draw_channel(profile: DelayPowerProfile, rng: np.random.Generator) -> ChannelRealization:
    """One random realisation of ``profile``.

    Gains are Rayleigh per tap with mean power from the profile, then scaled so
    that ``sum |h_i|^2 == 1`` for this draw. Path Dopplers are ``v_max cos(theta)``
    with ``theta`` uniform on ``[-pi/2, pi/2]``.
    """
    p_lin = 10.0 ** (np.asarray(profile.powers_db) / 10.0)
    n_taps = len(p_lin)
    g = np.sqrt(p_lin / 2) * (rng.standard_normal(n_taps) + 1j * rng.standard_normal(n_taps))
    g /= np.linalg.norm(g)
    theta = rng.uniform(-np.pi / 2, np.pi / 2, n_taps)
    dopplers = profile.max_doppler_hz * np.cos(theta)
    paths = []
    for gi, tau, nu in zip(g, profile.delays_s, dopplers):
        l, k, kappa = quantize_path(tau, nu, profile.sample_rate, profile.n_chirps)
        paths.append(PathSpec(complex(gi), l, k, kappa))
    return ChannelRealization(tuple(paths), profile.n_chirps)


def doppler_diagonal(n: int, nu: float) -> np.ndarray:
    """Diagonal of ``Delta**nu``: ``exp(j 2 pi nu n / N)``."""
    return np.exp(2j * np.pi * nu * np.arange(n) / n)


def doppler_matrix(n: int, nu: float = 1.0) -> np.ndarray:
    return np.diag(doppler_diagonal(n, nu))


def shift_matrix(n: int, shift: int = 1) -> np.ndarray:
    """``Pi**shift``; ``Pi @ s`` moves every element forward by one place."""
    return np.roll(np.eye(n, dtype=np.complex128), shift, axis=0)


def build_time_channel_matrix(ch: ChannelRealization) -> np.ndarray:
    """``H = sum_i h~_i Delta**(k_i + kappa_i) Pi**l_i``."""
    n = ch.n_chirps
    cols = np.arange(n)
    h = np.zeros((n, n), dtype=np.complex128)
    for p, heq in zip(ch.paths, ch.equivalent_gains):
        rows = (cols + p.delay_taps) % n
        h[rows, cols] += heq * doppler_diagonal(n, p.doppler)[rows]
    return h


def add_cp(s: np.ndarray, cp_taps: int) -> np.ndarray:
    if cp_taps == 0:
        return np.asarray(s)
    return np.concatenate([s[-cp_taps:], s])


def complex_awgn(rng: np.random.Generator, n: int, noise_var: float) -> np.ndarray:
    """Circular complex Gaussian samples with variance ``noise_var`` each."""
    return np.sqrt(noise_var / 2) * (rng.standard_normal(n) + 1j * rng.standard_normal(n))


def apply_channel(
    ch: ChannelRealization,
    s_cp: np.ndarray,
    noise_var: float = 0.0,
    rng: np.random.Generator | None = None,
    cp_taps: int | None = None,
    noise: np.ndarray | None = None,
) -> np.ndarray:
    """Pass a CP-prefixed block through ``ch`` and strip the CP.

    ``noise`` may be supplied directly (used for paired comparisons); otherwise
    AWGN of variance ``noise_var`` is drawn from ``rng``.
    """
    n = ch.n_chirps
    s_cp = np.asarray(s_cp, dtype=np.complex128)
    if cp_taps is None:
        cp_taps = s_cp.shape[0] - n
    if s_cp.shape[0] != n + cp_taps:
        raise ValueError(f"block length {s_cp.shape[0]} != N + CP = {n + cp_taps}")
    if ch.max_delay > cp_taps:
        raise ValueError(f"CP of {cp_taps} taps shorter than max path delay {ch.max_delay}")
    t = np.arange(n)
    r = np.zeros(n, dtype=np.complex128)
    for p, heq in zip(ch.paths, ch.equivalent_gains):
        r += heq * doppler_diagonal(n, p.doppler) * s_cp[cp_taps + t - p.delay_taps]
    if noise is not None:
        r = r + noise
    elif noise_var > 0:
        if rng is None:
            raise ValueError("rng required when noise_var > 0")
        r = r + complex_awgn(rng, n, noise_var)
    return r
