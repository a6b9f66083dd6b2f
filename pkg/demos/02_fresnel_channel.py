"""
From a time-varying channel to a sparse Fresnel-domain matrix
=============================================================

A path with integer Doppler becomes a single weighted cyclic shift after
demodulation. A fractional Doppler spreads over neighbouring shifts; keeping
2M+1 of them per path gives a sparse approximation whose error falls with M.
"""

# %%
import numpy as np

from ocdm_mp.channel import build_time_channel_matrix, draw_channel
from ocdm_mp.fresnel import FresnelTransform
from ocdm_mp.fresnel_channel import approximation_error, exact_fresnel_matrix, sparse_fresnel_channel
from ocdm_mp.profiles import load_profile

prof = load_profile("uwa")
ch = draw_channel(prof, np.random.default_rng(1))
for p in ch.paths:
    print(f"delay {p.delay_taps:2d} taps, Doppler {p.doppler:+.3f} bins")

# %%
h_eff = exact_fresnel_matrix(build_time_channel_matrix(ch), FresnelTransform(prof.n_chirps))
for m in (0, 2, 5, 10, 15, None):
    sfc = sparse_fresnel_channel(ch, m, h_eff=h_eff)
    print(f"M={'full' if m is None else m:>4}: L={sfc.n_logical:3d} shifts, "
          f"relative error {approximation_error(sfc, h_eff):.2e}, noise inflation {sfc.noise_inflation:.1e}")
