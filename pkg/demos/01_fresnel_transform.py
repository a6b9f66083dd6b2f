"""
Chirps and the fast Fresnel transform
=====================================

OCDM puts one symbol on each of N mutually orthogonal chirps. Stacking the
chirps gives a unitary matrix, and the transform can be applied as two phase
rotations around a normalised FFT.
"""

# %%
import numpy as np

from ocdm_mp.fresnel import FresnelTransform, dfnt_direct, dfnt_fast, dfnt_matrix, discrete_chirp

n = 16
chirps = np.array([discrete_chirp(m, n) for m in range(n)])
gram = chirps.conj() @ chirps.T
print("largest off-diagonal inner product:", np.max(np.abs(gram - np.eye(n))))

# %%
# Each chirp is a cyclic shift of the first one, so the matrix is circulant.
phi = dfnt_matrix(n)
print("circulant:", np.allclose(np.roll(phi, (1, 1), axis=(0, 1)), phi))

# %%
# The FFT factorisation agrees with the O(N^2) product.
n = 1024
tr = FresnelTransform(n)
x = np.random.default_rng(0).standard_normal(n) + 0j
print("fast vs direct:", np.max(np.abs(dfnt_fast(x, tr) - dfnt_direct(x))))
print("energy kept:", np.linalg.norm(dfnt_fast(x, tr)) / np.linalg.norm(x))
