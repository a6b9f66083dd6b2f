"""
BER of OCDM-MP, OCDM-MMSE and OFDM-MMSE
=======================================

A short paired sweep on the vehicular profile. All schemes see the same bits,
channels and noise. Raise the bit budget for smoother curves.
"""

# %%
from ocdm_mp.profiles import load_profile
from ocdm_mp.sim import SCHEMES, SimConfig, ebn0_at_ber, run_sweep

cfg = SimConfig(
    load_profile("eva500"),
    schemes=SCHEMES,
    ebn0_grid_db=(4.0, 8.0, 12.0, 16.0),
    min_bits=20_480,
    max_bits=20_480,
    paired=True,
)
recs = run_sweep(cfg, "ber_eva500.csv")
for r in recs:
    print(f"{r.ebn0_db:5g} dB  {r.scheme:<10} BER {r.ber:.2e}")

# %%
for s in SCHEMES:
    print(s, "reaches 1e-3 at", round(ebn0_at_ber([r for r in recs if r.scheme == s], 1e-3), 2), "dB")
