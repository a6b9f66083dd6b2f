"""Fresnel-domain channel matrices.

The exact matrix ``H_eff = Phi H Phi^H`` is dense in general. For integer
Dopplers it collapses to a sum of weighted cyclic shifts; a fractional Doppler
``k + kappa`` is expanded over integer Dopplers ``k + m`` with coefficients
``lambda_m(kappa)``, giving "virtual paths". Virtual paths that share a
chirp-shift ``d = (l + k + m) mod N`` are merged into one "logical path"
``diag(h_l) Pi**d``; the sum over logical paths is the sparse approximation.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .channel import ChannelRealization, build_time_channel_matrix
from .fresnel import FresnelTransform


def exact_fresnel_matrix(h: np.ndarray, phi: np.ndarray | FresnelTransform | None = None) -> np.ndarray:
    """``Phi @ H @ Phi^H``.

    With a dense ``phi`` the product is formed directly. With a
    :class:`FresnelTransform` (or ``None``) it is evaluated with FFTs, which
    gives the same matrix at ``O(N^2 log N)`` cost.
    """
    h = np.asarray(h, dtype=np.complex128)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {h.shape}")
    n = h.shape[0]
    if isinstance(phi, np.ndarray):
        if phi.shape != h.shape:
            raise ValueError(f"Phi shape {phi.shape} does not match H shape {h.shape}")
        return phi @ h @ phi.conj().T
    tr = phi if phi is not None else FresnelTransform(n)
    if tr.n_chirps != n:
        raise ValueError(f"transform size {tr.n_chirps} does not match H size {n}")
    a = tr.forward(h)
    return tr.forward(a.conj().T).conj().T


def lambda_coeff(kappa: float, m, n: int):
    """Basis-expansion coefficient of ``exp(j 2 pi kappa t / N)`` on ``exp(j 2 pi m t / N)``.

    Closed form of ``(1/N) sum_t exp(j 2 pi (kappa - m) t / N)``, written with
    half angles, ``sin(pi x) / (N sin(pi x / N)) exp(j pi x (N - 1) / N)`` for
    ``x = kappa - m``, so tiny ``kappa`` does not cancel to 0/0. For
    ``kappa == 0`` the expansion is exact on ``m == 0``.
    """
    m = np.asarray(m)
    if kappa == 0:
        out = (m == 0).astype(np.complex128)
    else:
        x = kappa - m
        den = n * np.sin(np.pi * x / n)
        with np.errstate(divide="ignore", invalid="ignore"):
            # subnormal x loses relative precision inside sin; use the x -> 0 limit
            mag = np.where(np.abs(x) < 1e-300, 1.0, np.sin(np.pi * x) / den)
        out = mag * np.exp(1j * np.pi * x * (n - 1) / n)
    return out if out.ndim else complex(out)


def lambda_direct(kappa: float, m: int, n: int) -> complex:
    """Direct-sum reference for :func:`lambda_coeff`."""
    t = np.arange(n)
    return complex(np.sum(np.exp(2j * np.pi * kappa * t / n) * np.exp(-2j * np.pi * m * t / n)) / n)


@dataclass(frozen=True)
class VirtualPath:
    source_path: int
    basis_index: int
    weight: complex
    doppler: int
    chirp_shift: int


@dataclass(frozen=True)
class LogicalPath:
    """One merged chirp-shift.

    ``weights`` is the diagonal of ``diag(h) Pi**d`` (indexed by output row);
    ``column_weights[n]`` is the matrix entry at ``(target_indices[n], n)``.
    """

    chirp_shift: int
    weights: np.ndarray
    target_indices: np.ndarray

    @property
    def column_weights(self) -> np.ndarray:
        return self.weights[self.target_indices]


@dataclass(frozen=True)
class SparseFresnelChannel:
    """Sum of ``L`` weighted cyclic shifts.

    ``shifts`` has shape ``(L,)``; ``weights[l, n]`` is the entry of row ``n``
    contributed by logical path ``l`` (column ``(n - shifts[l]) mod N``).
    """

    n_chirps: int
    shifts: np.ndarray
    weights: np.ndarray
    noise_inflation: float = 0.0
    approximation_error: float | None = field(default=None, compare=False)

    def __post_init__(self):
        shifts = np.asarray(self.shifts, dtype=np.int64) % self.n_chirps
        weights = np.asarray(self.weights, dtype=np.complex128).reshape(len(shifts), self.n_chirps)
        if len(np.unique(shifts)) != len(shifts):
            raise ValueError("logical paths must have distinct chirp-shifts")
        if self.noise_inflation < 0:
            raise ValueError("noise_inflation must be nonnegative")
        object.__setattr__(self, "shifts", shifts)
        object.__setattr__(self, "weights", weights)

    @property
    def n_logical(self) -> int:
        return len(self.shifts)

    @property
    def logical_paths(self) -> list[LogicalPath]:
        n = self.n_chirps
        base = np.arange(n)
        return [
            LogicalPath(int(d), self.weights[i], (base + d) % n)
            for i, d in enumerate(self.shifts)
        ]

    def apply(self, x: np.ndarray) -> np.ndarray:
        """``H~_eff @ x`` without forming the matrix."""
        x = np.asarray(x)
        out = np.zeros(self.n_chirps, dtype=np.complex128)
        for d, w in zip(self.shifts, self.weights):
            out += w * np.roll(x, d)
        return out

    def with_noise_inflation(self, value: float) -> "SparseFresnelChannel":
        return SparseFresnelChannel(
            self.n_chirps, self.shifts, self.weights, value, self.approximation_error
        )


def expand_virtual_paths(
    ch: ChannelRealization, m_trunc: int | Sequence[int] | None
) -> list[VirtualPath]:
    """Replace every physical path by ``2 M_i + 1`` integer-Doppler virtual paths.

    ``m_trunc`` is one truncation for all paths, a per-path list, or ``None``
    for the complete basis ``m = -N/2 .. N/2 - 1``. A truncation with
    ``2 M_i + 1 >= N`` is also promoted to the complete basis, since larger
    index ranges would count basis vectors twice. Paths with ``kappa == 0``
    always get a single virtual path.
    """
    n = ch.n_chirps
    if m_trunc is None or np.isscalar(m_trunc):
        m_list = [m_trunc] * ch.n_paths
    else:
        m_list = list(m_trunc)
        if len(m_list) != ch.n_paths:
            raise ValueError(f"need {ch.n_paths} truncation values, got {len(m_list)}")
    out = []
    for i, (p, heq, mi) in enumerate(zip(ch.paths, ch.equivalent_gains, m_list)):
        if p.doppler_frac == 0.0:
            ms = np.array([0])
        elif mi is None or 2 * mi + 1 >= n:
            ms = np.arange(-n // 2, n // 2)
        else:
            if mi < 0:
                raise ValueError(f"truncation must be nonnegative, got {mi}")
            ms = np.arange(-mi, mi + 1)
        lam = lambda_coeff(p.doppler_frac, ms, n)
        dop = p.doppler_int + ms
        w = heq * lam * np.exp(-1j * np.pi * dop.astype(np.float64) ** 2 / n)
        for m, wi, di in zip(ms, w, dop):
            out.append(VirtualPath(i, int(m), complex(wi), int(di), int((p.delay_taps + di) % n)))
    return out


def merge_logical_paths(
    virtuals: Sequence[VirtualPath], n: int, prune_tol: float | None = None
) -> SparseFresnelChannel:
    """Group virtual paths by chirp-shift (mod ``N``) and sum their weight vectors.

    Logical paths are ordered by increasing chirp-shift. With ``prune_tol`` set,
    logical paths whose largest weight magnitude is at most ``prune_tol`` are
    dropped; by default every shift is kept.
    """
    if not virtuals:
        raise ValueError("no virtual paths to merge")
    t = np.arange(n)
    groups: dict[int, np.ndarray] = {}
    for v in virtuals:
        d = v.chirp_shift % n
        vec = v.weight * np.exp(2j * np.pi * v.doppler * t / n)
        if d in groups:
            groups[d] = groups[d] + vec
        else:
            groups[d] = vec
    shifts = sorted(groups)
    weights = np.array([groups[d] for d in shifts])
    if prune_tol is not None:
        keep = np.max(np.abs(weights), axis=1) > prune_tol
        if not keep.any():
            keep[np.argmax(np.max(np.abs(weights), axis=1))] = True
        shifts = [d for d, k in zip(shifts, keep) if k]
        weights = weights[keep]
    return SparseFresnelChannel(n, np.array(shifts), weights)


def assemble_dense(sfc: SparseFresnelChannel) -> np.ndarray:
    """Dense ``H~_eff`` by direct placement of its nonzero entries."""
    n = sfc.n_chirps
    h = np.zeros((n, n), dtype=np.complex128)
    cols = np.arange(n)
    for lp in sfc.logical_paths:
        h[lp.target_indices, cols] += lp.column_weights
    return h


def approximation_error(sfc: SparseFresnelChannel, h_oracle: np.ndarray) -> float:
    """Relative Frobenius error of the sparse approximation."""
    h_oracle = np.asarray(h_oracle)
    if h_oracle.shape != (sfc.n_chirps, sfc.n_chirps):
        raise ValueError(f"oracle shape {h_oracle.shape} does not match N={sfc.n_chirps}")
    return float(np.linalg.norm(assemble_dense(sfc) - h_oracle) / np.linalg.norm(h_oracle))


def sparse_fresnel_channel(
    ch: ChannelRealization,
    m_trunc: int | Sequence[int] | None,
    transform: FresnelTransform | None = None,
    h_eff: np.ndarray | None = None,
    estimate_inflation: bool = True,
    symbol_energy: float = 1.0,
    prune_tol: float | None = None,
) -> SparseFresnelChannel:
    """Build the sparse channel, optionally with its approximation-noise figure.

    The inflation is ``||H~_eff - H_eff||_F^2 * Es / N``, the mean per-row
    energy of the neglected part for i.i.d. symbols of energy ``Es``.
    """
    n = ch.n_chirps
    sfc = merge_logical_paths(expand_virtual_paths(ch, m_trunc), n, prune_tol)
    if not estimate_inflation:
        return sfc
    if h_eff is None:
        h_eff = exact_fresnel_matrix(build_time_channel_matrix(ch), transform)
    diff = assemble_dense(sfc) - h_eff
    err2 = float(np.sum(np.abs(diff) ** 2))
    rel = float(np.sqrt(err2) / np.linalg.norm(h_eff))
    return SparseFresnelChannel(n, sfc.shifts, sfc.weights, err2 * symbol_energy / n, rel)


def dump_matrix_csv(path, matrix: np.ndarray, tol: float = 0.0) -> int:
    """Write entries with ``|value| > tol`` as ``row,col,re,im`` rows; returns the count."""
    matrix = np.asarray(matrix)
    rows, cols = np.nonzero(np.abs(matrix) > tol)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["row", "col", "re", "im"])
        for r, c in zip(rows, cols):
            v = matrix[r, c]
            w.writerow([int(r), int(c), repr(float(v.real)), repr(float(v.imag))])
    return len(rows)
