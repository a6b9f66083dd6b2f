"""Command-line entry point: ``ocdm-mp <subcommand> ...``."""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .channel import build_time_channel_matrix, draw_channel
from .fresnel import FresnelTransform
from .fresnel_channel import assemble_dense, dump_matrix_csv, exact_fresnel_matrix, sparse_fresnel_channel
from .mp_detector import DetectorConfig
from .profiles import BUILTIN, default_m_trunc, load_profile
from .sim import SCHEMES, SimConfig, run_sweep, study_damping, study_m_trunc


def float_list(text: str) -> list[float]:
    """``"0,4,8"`` or an inclusive range ``"0:20:4"``."""
    text = text.strip()
    if ":" in text:
        parts = [float(p) for p in text.split(":")]
        if len(parts) != 3 or parts[2] <= 0:
            raise argparse.ArgumentTypeError(f"range must be start:stop:step with step > 0, got {text!r}")
        start, stop, step = parts
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [round(start + i * step, 10) for i in range(count)]
    try:
        return [float(p) for p in text.split(",") if p.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def mi_list(text: str) -> list[int | None]:
    out = []
    for p in text.split(","):
        p = p.strip()
        if p.lower() == "full":
            out.append(None)
        elif p:
            out.append(int(p))
    if not out:
        raise argparse.ArgumentTypeError("empty truncation list")
    return out


def _scheme_list(text: str) -> tuple[str, ...]:
    if text.lower() == "all":
        return SCHEMES
    out = tuple(s.strip().upper() for s in text.split(",") if s.strip())
    bad = [s for s in out if s not in SCHEMES]
    if bad:
        raise argparse.ArgumentTypeError(f"unknown scheme(s) {bad}; choose from {SCHEMES} or 'all'")
    return out


def _add_common(p: argparse.ArgumentParser, default_ebn0: str, schemes: bool = True) -> None:
    p.add_argument("--profile", default="eva500",
                   help=f"built-in profile ({', '.join(BUILTIN)}) or path to a profile file")
    if schemes:
        p.add_argument("--scheme", type=_scheme_list, default=("OCDM-MP",),
                       help="comma-separated list of OCDM-MP, OCDM-MMSE, OFDM-MMSE, or 'all'")
    p.add_argument("--constellation", default="QAM4", help="BPSK or QAM4")
    p.add_argument("--ebn0", type=float_list, default=float_list(default_ebn0),
                   help="Eb/N0 values in dB: '0,4,8' or 'start:stop:step'")
    p.add_argument("--mi", type=mi_list, default=None,
                   help="basis truncation M (integer or 'full'); defaults to the profile's value")
    p.add_argument("--damping", type=float_list, default=[0.6])
    p.add_argument("--max-iters", type=int, default=20)
    p.add_argument("--gamma", type=float, default=DetectorConfig.gamma)
    p.add_argument("--epsilon", type=float, default=DetectorConfig.epsilon)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--min-bits", type=int, default=10_000)
    p.add_argument("--max-bits", type=int, default=1_000_000)
    p.add_argument("--target-errors", type=int, default=200)
    p.add_argument("--no-inflation", action="store_true",
                   help="do not add the sparse-channel approximation error to the MP noise variance")
    p.add_argument("--paired", action="store_true",
                   help="run every scheme on exactly the same blocks")
    p.add_argument("--out", type=Path, default=None, help="CSV output path")


def _config(args, schemes=None, m_trunc="auto") -> SimConfig:
    profile = load_profile(args.profile)
    if m_trunc == "auto":
        m_trunc = args.mi[0] if args.mi else default_m_trunc(profile)
    det = DetectorConfig(
        damping=args.damping[0], max_iters=args.max_iters, gamma=args.gamma, epsilon=args.epsilon
    )
    return SimConfig(
        profile=profile,
        schemes=tuple(schemes or args.scheme),
        constellation=args.constellation,
        ebn0_grid_db=tuple(args.ebn0),
        min_bits=args.min_bits,
        max_bits=args.max_bits,
        target_errors=args.target_errors,
        detector=det,
        m_trunc=m_trunc,
        noise_inflation=not args.no_inflation,
        rng_seed=args.seed,
        paired=args.paired,
    )


def _fmt(v: float, spec: str) -> str:
    return "-" if isinstance(v, float) and math.isnan(v) else format(v, spec)


def cmd_sweep(args) -> int:
    cfg = _config(args)
    recs = run_sweep(cfg, args.out)
    print(f"{'Eb/N0':>6}  {'scheme':<10} {'bits':>9} {'errors':>7} {'BER':>10} {'iters':>6}")
    for r in recs:
        print(f"{r.ebn0_db:6g}  {r.scheme:<10} {r.bits:9d} {r.bit_errors:7d} "
              f"{r.ber:10.3e} {_fmt(r.mean_iterations, '6.2f'):>6}")
    if args.out:
        print(f"wrote {args.out}")
    return 0


def cmd_study_mi(args) -> int:
    mis = args.mi or [0, 2, 5, 10, 15]
    cfg = _config(args, schemes=("OCDM-MP",), m_trunc=mis[0])
    rows = study_m_trunc(cfg, args.ebn0[0], mis, args.out)
    print(f"Eb/N0 = {args.ebn0[0]:g} dB")
    print(f"{'M':>5} {'bits':>9} {'errors':>7} {'BER':>10} {'iters':>6}")
    for m, r in rows:
        print(f"{'full' if m is None else m:>5} {r.bits:9d} {r.bit_errors:7d} {r.ber:10.3e} "
              f"{r.mean_iterations:6.2f}")
    if args.out:
        print(f"wrote {args.out}")
    return 0


def cmd_study_damping(args) -> int:
    cfg = _config(args, schemes=("OCDM-MP",))
    dampings = args.damping if len(args.damping) > 1 else [0.2, 0.6, 0.9]
    pts = study_damping(cfg, dampings, args.ebn0, args.max_iters, args.out)
    print(f"{'Eb/N0':>6} {'damping':>7} {'bits':>9} {'BER':>10} {'mean iters':>10}")
    for p in pts:
        r = p.record
        print(f"{r.ebn0_db:6g} {p.damping:7g} {r.bits:9d} {r.ber:10.3e} {r.mean_iterations:10.2f}")
    if args.out:
        print(f"wrote {args.out}")
    return 0


def cmd_dump_channel(args) -> int:
    profile = load_profile(args.profile)
    m = args.mi[0] if args.mi else default_m_trunc(profile)
    ch = draw_channel(profile, np.random.default_rng(args.seed))
    tr = FresnelTransform(profile.n_chirps)
    h_eff = exact_fresnel_matrix(build_time_channel_matrix(ch), tr)
    sfc = sparse_fresnel_channel(ch, m, tr, h_eff=h_eff)
    prefix = args.out or Path("channel")
    sparse_path = prefix.with_name(prefix.stem + "_sparse.csv")
    exact_path = prefix.with_name(prefix.stem + "_exact.csv")
    n_sparse = dump_matrix_csv(sparse_path, assemble_dense(sfc))
    n_exact = dump_matrix_csv(exact_path, h_eff, tol=args.tol)
    print(f"profile {profile.name or args.profile}: N={profile.n_chirps}, paths={len(ch.paths)}, "
          f"M={'full' if m is None else m}")
    for i, p in enumerate(ch.paths):
        print(f"  path {i}: delay {p.delay_taps} taps, Doppler {p.doppler_int:+d} {p.doppler_frac:+.4f}, "
              f"|h| {abs(p.gain):.4f}")
    print(f"logical paths L={sfc.n_logical}, relative error {sfc.approximation_error:.3e}, "
          f"noise inflation {sfc.noise_inflation:.3e}")
    print(f"wrote {sparse_path} ({n_sparse} entries) and {exact_path} ({n_exact} entries)")
    return 0


def cmd_verify(args) -> int:
    from .verify import run_all

    failed = 0
    for name, ok, detail in run_all(args.seed):
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
        failed += not ok
    return 1 if failed else 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ocdm-mp", description="OCDM message-passing link simulator")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sweep", help="BER versus Eb/N0")
    _add_common(p, "0:16:4")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("study-mi", help="MP BER versus basis truncation at one Eb/N0")
    _add_common(p, "10", schemes=False)
    p.set_defaults(func=cmd_study_mi)

    p = sub.add_parser("study-damping", help="MP iterations and BER versus damping")
    _add_common(p, "0,15", schemes=False)
    p.set_defaults(func=cmd_study_damping, max_iters=100)

    p = sub.add_parser("dump-channel", help="write one drawn channel's Fresnel-domain matrices as CSV")
    p.add_argument("--profile", default="eva500")
    p.add_argument("--mi", type=mi_list, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=0.0, help="skip exact-matrix entries below this magnitude")
    p.add_argument("--out", type=Path, default=None,
                   help="path prefix; writes <prefix>_sparse.csv and <prefix>_exact.csv")
    p.set_defaults(func=cmd_dump_channel)

    p = sub.add_parser("verify", help="run fast numerical self-checks")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_verify)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
