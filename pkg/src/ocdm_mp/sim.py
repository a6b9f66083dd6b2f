"""Monte Carlo BER simulation for OCDM-MP, OCDM-MMSE and OFDM-MMSE.

Every block draws its bits, channel and noise from its own stream, seeded by
``(rng_seed, point_index, block_index)``. The draws do not depend on which
schemes are simulated, so schemes run together share realisations (paired
comparison), and any scheme's results are unchanged when others are added.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import __version__
from .baselines import mmse_detect, ofdm_demodulate, ofdm_effective_channel, ofdm_modulate
from .channel import (
    DelayPowerProfile,
    add_cp,
    apply_channel,
    build_time_channel_matrix,
    complex_awgn,
    draw_channel,
)
from .constellation import Constellation, get_constellation
from .fresnel import FresnelTransform
from .fresnel_channel import exact_fresnel_matrix, sparse_fresnel_channel
from .mp_detector import DetectorConfig, detect

SCHEMES = ("OCDM-MP", "OCDM-MMSE", "OFDM-MMSE")
CSV_HEADER = ["ebn0_db", "scheme", "bits", "bit_errors", "ber", "mean_iterations", "mean_eta"]


@dataclass(frozen=True)
class SimConfig:
    """One simulation setup.

    ``m_trunc=None`` uses the complete basis expansion for the MP channel,
    which reproduces the exact Fresnel-domain matrix (then ``L = N``).
    ``noise_inflation`` adds the approximation-error figure of the sparse
    channel to the detector's noise variance. With ``paired`` every scheme
    runs on exactly the same blocks (the point ends when all schemes are
    done); otherwise each scheme stops on its own over a prefix of the
    shared block sequence.
    """

    profile: DelayPowerProfile
    schemes: tuple[str, ...] = ("OCDM-MP",)
    constellation: str = "QAM4"
    ebn0_grid_db: tuple[float, ...] = (10.0,)
    min_bits: int = 10_000
    max_bits: int = 1_000_000
    target_errors: int = 200
    detector: DetectorConfig = DetectorConfig()
    m_trunc: int | None = 5
    noise_inflation: bool = True
    rng_seed: int = 0
    paired: bool = False

    def __post_init__(self):
        object.__setattr__(self, "schemes", tuple(self.schemes))
        object.__setattr__(self, "ebn0_grid_db", tuple(float(e) for e in self.ebn0_grid_db))
        for s in self.schemes:
            if s not in SCHEMES:
                raise ValueError(f"unknown scheme {s!r}; choose from {SCHEMES}")
        if not self.schemes:
            raise ValueError("at least one scheme required")
        if not self.ebn0_grid_db:
            raise ValueError("Eb/N0 grid is empty")
        if self.min_bits < 1000:
            raise ValueError(f"min_bits must be at least 1000, got {self.min_bits}")
        if self.max_bits < self.min_bits:
            raise ValueError("max_bits must be >= min_bits")
        cp = self.profile.cp_taps
        max_l = round(max(self.profile.delays_s) * self.profile.sample_rate)
        if cp < max_l:
            raise ValueError(f"CP of {cp} taps shorter than the profile's max delay of {max_l} taps")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["profile"].pop("metadata", None)
        return d


@dataclass(frozen=True)
class BerRecord:
    ebn0_db: float
    scheme: str
    bits: int
    bit_errors: int
    mean_iterations: float = math.nan
    mean_eta: float = math.nan

    @property
    def ber(self) -> float:
        return self.bit_errors / self.bits if self.bits else math.nan

    def row(self) -> list:
        return [
            f"{self.ebn0_db:g}",
            self.scheme,
            self.bits,
            self.bit_errors,
            f"{self.ber:.6e}",
            f"{self.mean_iterations:.4f}",
            f"{self.mean_eta:.6f}",
        ]


def ebn0_to_noise_var(ebn0_db: float, constellation: Constellation, n: int, cp_taps: int) -> float:
    """Noise variance per complex sample for a given Eb/N0.

    The per-bit energy counts the CP: ``Eb = (N + cp) Es / (N log2 M)`` with
    unit-energy symbols and unitary modulation.
    """
    if cp_taps < 0:
        raise ValueError("cp_taps must be nonnegative")
    eb = (n + cp_taps) * constellation.energy / (n * constellation.bits_per_symbol)
    return eb / 10.0 ** (ebn0_db / 10.0)


def block_rng(seed: int, point_index: int, block_index: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), int(point_index), int(block_index)])


@dataclass
class _Tally:
    bits: int = 0
    errors: int = 0
    iters: float = 0.0
    eta: float = 0.0
    blocks: int = 0
    traces: list = field(default_factory=list)


@dataclass
class BlockSample:
    """Everything random about one block, shared across schemes."""

    bits: np.ndarray
    symbol_indices: np.ndarray
    channel: object
    noise: np.ndarray
    h_time: np.ndarray


class LinkSimulator:
    """Per-block transmit / channel / receive chain for one configuration."""

    def __init__(self, config: SimConfig):
        self.config = config
        self.profile = config.profile
        self.n = config.profile.n_chirps
        self.cp = config.profile.cp_taps
        self.const = get_constellation(config.constellation)
        self.transform = FresnelTransform(self.n)

    def noise_var(self, ebn0_db: float) -> float:
        return ebn0_to_noise_var(ebn0_db, self.const, self.n, self.cp)

    def draw(self, rng: np.random.Generator, noise_var: float) -> BlockSample:
        nbits = self.n * self.const.bits_per_symbol
        bits = rng.integers(0, 2, nbits, dtype=np.int8)
        ch = draw_channel(self.profile, rng)
        noise = complex_awgn(rng, self.n, noise_var)
        return BlockSample(
            bits, self.const.bits_to_indices(bits), ch, noise, build_time_channel_matrix(ch)
        )

    def _transmit(self, blk: BlockSample, s: np.ndarray) -> np.ndarray:
        return apply_channel(blk.channel, add_cp(s, self.cp), cp_taps=self.cp, noise=blk.noise)

    def run_block(
        self,
        blk: BlockSample,
        noise_var: float,
        schemes: Iterable[str],
        detector: DetectorConfig | None = None,
        m_trunc: int | None | str = "config",
        trace: bool = False,
    ) -> dict:
        """Detect one block with each scheme; returns ``{scheme: (bit_errors, result|None)}``."""
        cfg = self.config
        detector = detector or cfg.detector
        if m_trunc == "config":
            m_trunc = cfg.m_trunc
        x = self.const.points[blk.symbol_indices]
        out = {}
        h_eff = y_ocdm = None
        for scheme in schemes:
            if scheme.startswith("OCDM"):
                if y_ocdm is None:
                    y_ocdm = self.transform.forward(self._transmit(blk, self.transform.inverse(x)))
                    h_eff = exact_fresnel_matrix(blk.h_time, self.transform)
                if scheme == "OCDM-MMSE":
                    idx = mmse_detect(y_ocdm, h_eff, noise_var, self.const)
                    res = None
                else:
                    sfc = sparse_fresnel_channel(
                        blk.channel,
                        m_trunc,
                        self.transform,
                        h_eff=h_eff,
                        estimate_inflation=cfg.noise_inflation,
                        symbol_energy=self.const.energy,
                    )
                    det = detector.with_noise_var(noise_var + sfc.noise_inflation)
                    res = detect(
                        y_ocdm, sfc, self.const, det, truth=blk.symbol_indices if trace else None
                    )
                    idx = res.symbol_indices
            elif scheme == "OFDM-MMSE":
                y = ofdm_demodulate(self._transmit(blk, ofdm_modulate(x)))
                idx = mmse_detect(y, ofdm_effective_channel(blk.h_time), noise_var, self.const)
                res = None
            else:
                raise ValueError(f"unknown scheme {scheme!r}")
            errs = int(np.count_nonzero(self.const.indices_to_bits(idx) != blk.bits))
            out[scheme] = (errs, res)
        return out


def _done(t: _Tally, cfg: SimConfig) -> bool:
    if t.bits >= cfg.max_bits:
        return True
    return t.bits >= cfg.min_bits and t.errors >= cfg.target_errors


def _run_point(config, ebn0_db, point_index, schemes, detector, m_trunc, keep_traces):
    schemes = tuple(schemes or config.schemes)
    link = LinkSimulator(config)
    n0 = link.noise_var(ebn0_db)
    tallies = {s: _Tally() for s in schemes}
    block = 0
    while True:
        active = [s for s in schemes if not _done(tallies[s], config)]
        if not active:
            break
        if config.paired:
            active = list(schemes)
        blk = link.draw(block_rng(config.rng_seed, point_index, block), n0)
        res = link.run_block(blk, n0, active, detector, m_trunc, trace=keep_traces)
        for s, (errs, det) in res.items():
            t = tallies[s]
            t.bits += blk.bits.size
            t.errors += errs
            t.blocks += 1
            if det is not None:
                t.iters += det.iterations_used
                t.eta += det.best_eta
                if keep_traces:
                    t.traces.append(det.trace)
        block += 1
    records = []
    for s in schemes:
        t = tallies[s]
        is_mp = s == "OCDM-MP"
        records.append(
            BerRecord(
                float(ebn0_db),
                s,
                t.bits,
                t.errors,
                t.iters / t.blocks if is_mp else math.nan,
                t.eta / t.blocks if is_mp else math.nan,
            )
        )
    return records, tallies


def run_point(
    config: SimConfig,
    ebn0_db: float,
    point_index: int = 0,
    schemes: Sequence[str] | None = None,
    detector: DetectorConfig | None = None,
    m_trunc: int | None | str = "config",
) -> list[BerRecord]:
    """Simulate one Eb/N0 point; one record per scheme, in scheme order.

    Each scheme stops on its own once it has ``min_bits`` and either
    ``target_errors`` errors or ``max_bits`` bits.
    """
    return _run_point(config, ebn0_db, point_index, schemes, detector, m_trunc, False)[0]


def run_sweep(config: SimConfig, out_csv: str | Path | None = None) -> list[BerRecord]:
    """All grid points in order; optionally written to CSV with a metadata sidecar."""
    records = []
    for i, e in enumerate(config.ebn0_grid_db):
        records.extend(run_point(config, e, point_index=i))
    if out_csv is not None:
        write_records_csv(out_csv, records)
        write_metadata(out_csv, config)
    return records


def write_records_csv(path, records: Sequence[BerRecord], extra: dict | None = None) -> None:
    """CSV of records. ``extra`` maps a leading column name to per-record values."""
    path = Path(path)
    try:
        with path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            lead = list(extra) if extra else []
            w.writerow(lead + CSV_HEADER)
            for i, r in enumerate(records):
                w.writerow([extra[k][i] for k in lead] + r.row())
    except OSError as exc:
        raise OSError(f"failed to write {path}: {exc}") from exc


def metadata_path(csv_path) -> Path:
    p = Path(csv_path)
    return p.with_name(p.name + ".meta.json")


def write_metadata(csv_path, config: SimConfig, **extra) -> Path:
    meta = {"artifact_version": __version__, "config": config.to_dict(), **extra}
    p = metadata_path(csv_path)
    try:
        p.write_text(json.dumps(meta, indent=2, default=str), encoding="utf-8")
    except OSError as exc:
        raise OSError(f"failed to write {p}: {exc}") from exc
    return p


def study_m_trunc(
    config: SimConfig, ebn0_db: float, m_values: Sequence[int], out_csv=None
) -> list[tuple[int, BerRecord]]:
    """OCDM-MP BER versus basis truncation, every value on the same blocks."""
    rows = []
    for m in m_values:
        rec = run_point(config, ebn0_db, point_index=0, schemes=("OCDM-MP",), m_trunc=m)[0]
        rows.append((m, rec))
    if out_csv is not None:
        write_records_csv(out_csv, [r for _, r in rows], {"m_trunc": [m for m, _ in rows]})
        write_metadata(out_csv, config, study="m_trunc", ebn0_db=ebn0_db, m_values=list(m_values))
    return rows


@dataclass
class DampingPoint:
    damping: float
    record: BerRecord
    ser_vs_allowed_iters: np.ndarray  # index i -> symbol error rate with max_iters = i + 1


def _ser_vs_allowed(traces: list, max_iters: int, n_symbols: int) -> np.ndarray:
    # Capping the budget at I returns the best-so-far estimate at iteration
    # min(I, stop); column 3 of each trace row is that estimate's error count.
    sym_err = np.zeros(max_iters)
    for tr in traces:
        best = np.array([row[3] for row in tr], dtype=float)
        sym_err += np.concatenate([best, np.full(max_iters - len(best), best[-1])])
    return sym_err / n_symbols


def study_damping(
    config: SimConfig,
    dampings: Sequence[float],
    ebn0_grid_db: Sequence[float] | None = None,
    max_iters: int = 100,
    out_csv=None,
) -> list[DampingPoint]:
    """Mean iterations and BER of OCDM-MP for several damping factors."""
    grid = tuple(ebn0_grid_db or config.ebn0_grid_db)
    bps = get_constellation(config.constellation).bits_per_symbol
    points = []
    for i, e in enumerate(grid):
        for dmp in dampings:
            det = replace(config.detector, damping=dmp, max_iters=max_iters)
            recs, tallies = _run_point(config, e, i, ("OCDM-MP",), det, "config", True)
            rec = recs[0]
            curve = _ser_vs_allowed(tallies["OCDM-MP"].traces, max_iters, rec.bits // bps)
            points.append(DampingPoint(dmp, rec, curve))
    if out_csv is not None:
        write_records_csv(
            out_csv, [p.record for p in points], {"damping": [f"{p.damping:g}" for p in points]}
        )
        write_metadata(out_csv, config, study="damping", dampings=list(dampings), max_iters=max_iters)
        iter_path = Path(out_csv).with_name(Path(out_csv).stem + "_iters.csv")
        with iter_path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["ebn0_db", "damping", "allowed_iters", "symbol_error_rate"])
            for p in points:
                for k, v in enumerate(p.ser_vs_allowed_iters, 1):
                    w.writerow([f"{p.record.ebn0_db:g}", f"{p.damping:g}", k, f"{v:.6e}"])
    return points


def ebn0_at_ber(records: Sequence[BerRecord], target: float) -> float:
    """Eb/N0 where the BER curve crosses ``target``, by log-linear interpolation.

    Returns ``nan`` when the curve never crosses the target.
    """
    pts = sorted((r.ebn0_db, r.ber) for r in records)
    for (e0, b0), (e1, b1) in zip(pts, pts[1:]):
        if b0 >= target > b1:
            if b1 <= 0:
                return e1
            t = (math.log10(b0) - math.log10(target)) / (math.log10(b0) - math.log10(b1))
            return e0 + t * (e1 - e0)
    return math.nan
