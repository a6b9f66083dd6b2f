"""Fast numerical self-checks of the transform, channel and detector identities.

Each check returns ``(name, passed, detail)``; :func:`run_all` runs them in
order. They are the same identities the test suite pins, sized to finish in a
few seconds so they can be run from the command line on any install.
"""

from __future__ import annotations

import numpy as np

from .channel import ChannelRealization, PathSpec, build_time_channel_matrix, doppler_matrix, shift_matrix
from .constellation import qam4
from .fresnel import FresnelTransform, dfnt_direct, dfnt_fast
from .fresnel_channel import (
    approximation_error,
    exact_fresnel_matrix,
    lambda_coeff,
    lambda_direct,
    sparse_fresnel_channel,
)
from .mp_detector import DetectorConfig, detect


def check_unitarity(rng):
    worst = 0.0
    for n in (8, 64, 256):
        phi = FresnelTransform(n).matrix()
        worst = max(worst, float(np.linalg.norm(phi @ phi.conj().T - np.eye(n))))
    return "unitarity", worst < 1e-10, f"max ||Phi Phi^H - I||_F = {worst:.2e}"


def check_fast_dfnt(rng):
    worst = 0.0
    for n in (8, 64, 256):
        tr = FresnelTransform(n)
        x = rng.standard_normal((n, 20)) + 1j * rng.standard_normal((n, 20))
        worst = max(worst, float(np.max(np.abs(dfnt_fast(x, tr) - dfnt_direct(x)))))
    return "fast-vs-direct DFnT", worst < 1e-10, f"max abs diff = {worst:.2e}"


def check_doppler_shift_commutation(rng):
    worst = 0.0
    for n in (4, 16, 64):
        d, p = doppler_matrix(n), shift_matrix(n)
        worst = max(worst, float(np.max(np.abs(d @ p - np.exp(2j * np.pi / n) * p @ d))))
    return "Doppler/shift commutation", worst < 1e-10, f"max abs diff = {worst:.2e}"


def check_integer_doppler_diagonalization(rng):
    worst = 0.0
    for n in (4, 16, 64):
        tr = FresnelTransform(n)
        for k in range(-n // 2, n // 2):
            lhs = exact_fresnel_matrix(doppler_matrix(n, k), tr)
            rhs = np.exp(1j * np.pi * k * k / n) * shift_matrix(n, k) @ doppler_matrix(n, k)
            worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    return "integer Doppler in Fresnel domain", worst < 1e-10, f"max abs diff = {worst:.2e}"


def check_lambda(rng):
    worst = 0.0
    for _ in range(200):
        n = int(2 ** rng.integers(2, 9))
        kappa = float(rng.uniform(-0.5, 0.5))
        m = int(rng.integers(-n // 2, n // 2))
        worst = max(worst, abs(lambda_coeff(kappa, m, n) - lambda_direct(kappa, m, n)))
    return "basis coefficient closed form", worst < 1e-12, f"max abs diff = {worst:.2e}"


def _random_channel(rng, n, n_paths, fractional):
    paths = []
    for _ in range(n_paths):
        g = complex(rng.standard_normal() + 1j * rng.standard_normal())
        kappa = float(rng.uniform(-0.49, 0.49)) if fractional else 0.0
        paths.append(PathSpec(g, int(rng.integers(0, n // 4)), int(rng.integers(-3, 4)), kappa))
    return ChannelRealization(tuple(paths), n)


def check_sparse_channel(rng):
    n = 64
    tr = FresnelTransform(n)
    ch = _random_channel(rng, n, 3, False)
    e_int = approximation_error(sparse_fresnel_channel(ch, 0, estimate_inflation=False),
                                exact_fresnel_matrix(build_time_channel_matrix(ch), tr))
    ch = _random_channel(rng, n, 3, True)
    h_eff = exact_fresnel_matrix(build_time_channel_matrix(ch), tr)
    e_full = approximation_error(sparse_fresnel_channel(ch, None, estimate_inflation=False), h_eff)
    e2 = approximation_error(sparse_fresnel_channel(ch, 2, estimate_inflation=False), h_eff)
    e10 = approximation_error(sparse_fresnel_channel(ch, 10, estimate_inflation=False), h_eff)
    ok = e_int <= 1e-10 and e_full <= 1e-9 and e10 < e2
    return (
        "sparse Fresnel channel",
        ok,
        f"integer {e_int:.1e}, full basis {e_full:.1e}, M=2 {e2:.3f}, M=10 {e10:.3f}",
    )


def check_noiseless_detection(rng):
    n = 32
    const = qam4()
    ch = ChannelRealization(
        (PathSpec(0.8 + 0.1j, 0, 0, 0.0), PathSpec(0.35 - 0.3j, 3, 1, 0.0)), n
    )
    sfc = sparse_fresnel_channel(ch, 0, estimate_inflation=False)
    errs = 0
    for _ in range(50):
        idx = rng.integers(0, 4, n)
        res = detect(sfc.apply(const.points[idx]), sfc, const, DetectorConfig(noise_var=1e-4))
        errs += int(np.sum(res.symbol_indices != idx))
    return "noiseless 2-path detection", errs == 0, f"{errs} symbol errors over 50 blocks"


CHECKS = (
    check_unitarity,
    check_fast_dfnt,
    check_doppler_shift_commutation,
    check_integer_doppler_diagonalization,
    check_lambda,
    check_sparse_channel,
    check_noiseless_detection,
)


def run_all(seed: int = 0) -> list[tuple[str, bool, str]]:
    rng = np.random.default_rng(seed)
    return [check(rng) for check in CHECKS]
