"""Message-passing symbol detection on the sparse Fresnel-domain factor graph.

Observation node ``y[n]`` is connected to the ``L`` symbols ``x[b[n, l]]`` with
``b[n, l] = (n - d_l) mod N``; symbol ``x[j]`` feeds the observations
``y[q[j, l]]`` with ``q[j, l] = (j + d_l) mod N``. Each observation sends a
Gaussian approximation (mean, variance) of the interference-plus-noise seen by
one of its symbols; each symbol sends back an extrinsic pmf over the
constellation. Symbol-to-observation pmfs are damped between iterations.

Array conventions
-----------------
``pmfs[j, l, m]``
    message from ``x[j]`` to ``y[q[j, l]]`` for symbol ``alpha_m``.
``means[n, l]``, ``variances[n, l]``
    message from ``y[n]`` to ``x[b[n, l]]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .constellation import Constellation
from .fresnel_channel import SparseFresnelChannel


@dataclass(frozen=True)
class DetectorConfig:
    damping: float = 0.6
    max_iters: int = 20
    gamma: float = 0.999
    epsilon: float = 0.1
    noise_var: float | None = None

    def __post_init__(self):
        if not 0 < self.damping <= 1:
            raise ValueError(f"damping must lie in (0, 1], got {self.damping}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be positive, got {self.max_iters}")
        if not 0 < self.gamma < 1:
            raise ValueError(f"gamma must lie in (0, 1), got {self.gamma}")
        if self.epsilon <= 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if self.noise_var is not None and self.noise_var <= 0:
            raise ValueError(f"noise_var must be positive, got {self.noise_var}")

    def with_noise_var(self, noise_var: float) -> "DetectorConfig":
        return replace(self, noise_var=noise_var)


@dataclass
class MessageState:
    pmfs: np.ndarray
    means: np.ndarray
    variances: np.ndarray
    b: np.ndarray
    q: np.ndarray


@dataclass
class DetectionResult:
    symbol_indices: np.ndarray
    symbols: np.ndarray
    posteriors: np.ndarray
    iterations_used: int
    final_eta: float
    best_eta: float
    converged: bool
    trace: list = field(default_factory=list)


def build_index_maps(sfc: SparseFresnelChannel) -> tuple[np.ndarray, np.ndarray]:
    """``(b, q)``, each ``N x L``: contributing symbols per observation and
    receiving observations per symbol."""
    n = np.arange(sfc.n_chirps)[:, None]
    d = sfc.shifts[None, :]
    return (n - d) % sfc.n_chirps, (n + d) % sfc.n_chirps


def _edge_gains(sfc: SparseFresnelChannel) -> np.ndarray:
    # gain[n, l] = [H~_eff]_{n, b[n, l]}
    return sfc.weights.T


# Internal kernels use a symbol-first layout, (M, N, L), so the reductions over
# the constellation run across contiguous slabs; public functions take and
# return the (N, L, M) layout documented above.


def _obs_kernel(pv, b, g, alpha, noise_var):
    n_log = b.shape[1]
    p_obs = pv[:, b, np.arange(n_log)[None, :]]
    e1 = np.zeros(b.shape, dtype=np.complex128)
    e2 = np.zeros(b.shape)
    for m, a in enumerate(alpha):
        e1 += a * p_obs[m]
        e2 += (abs(a) ** 2) * p_obs[m]
    mean_t = g * e1
    var_t = (g.real**2 + g.imag**2) * np.maximum(e2 - (e1.real**2 + e1.imag**2), 0.0)
    means = mean_t.sum(axis=1, keepdims=True) - mean_t
    interf = np.maximum(var_t.sum(axis=1, keepdims=True) - var_t, 0.0)
    return means, interf + noise_var


def _ll_kernel(y, g, alpha, means, variances, q):
    base = y[:, None] - means
    ll = np.empty((len(alpha),) + g.shape)
    for m, a in enumerate(alpha):
        r = base - g * a
        ll[m] = -(r.real**2 + r.imag**2) / variances
    mx = ll.max(axis=0)
    ll -= mx
    ll -= np.log(np.exp(ll).sum(axis=0))
    return ll[:, q, np.arange(q.shape[1])[None, :]]


def _softmax0(logits):
    z = logits - logits.max(axis=0)
    p = np.exp(z)
    p /= p.sum(axis=0)
    bad = ~np.isfinite(p).all(axis=0)
    if bad.any():
        p[:, bad] = 1.0 / logits.shape[0]
    return p


def _var_kernel(ll_var, pv, damping):
    total = ll_var.sum(axis=2)
    p_tilde = _softmax0(total[:, :, None] - ll_var)
    return damping * p_tilde + (1.0 - damping) * pv, _softmax0(total)


def observation_messages(
    y: np.ndarray,
    sfc: SparseFresnelChannel,
    pmfs: np.ndarray,
    constellation: Constellation,
    noise_var: float,
    b: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Mean and variance of the interference-plus-noise on every edge."""
    if b is None:
        b, _ = build_index_maps(sfc)
    pv = np.moveaxis(np.asarray(pmfs, dtype=np.float64), 2, 0)
    return _obs_kernel(pv, b, _edge_gains(sfc), constellation.points, noise_var)


def edge_log_likelihoods(
    y: np.ndarray,
    sfc: SparseFresnelChannel,
    means: np.ndarray,
    variances: np.ndarray,
    constellation: Constellation,
    q: np.ndarray | None = None,
) -> np.ndarray:
    """Per-factor normalised log-likelihoods seen from the symbol side.

    Entry ``[j, i, m]`` is ``log p(y[q[j, i]] | x[j] = alpha_m)`` normalised
    over ``m``. Likelihoods are evaluated in the log domain, so a factor never
    underflows to an all-zero row.
    """
    if q is None:
        _, q = build_index_maps(sfc)
    ll = _ll_kernel(np.asarray(y), _edge_gains(sfc), constellation.points, means, variances, q)
    return np.moveaxis(ll, 0, 2)


def variable_update(
    y: np.ndarray,
    sfc: SparseFresnelChannel,
    means: np.ndarray,
    variances: np.ndarray,
    pmfs: np.ndarray,
    damping: float,
    constellation: Constellation,
) -> np.ndarray:
    """Damped extrinsic pmf update for every symbol-to-observation edge."""
    if not 0 < damping <= 1:
        raise ValueError(f"damping must lie in (0, 1], got {damping}")
    _, q = build_index_maps(sfc)
    ll = _ll_kernel(np.asarray(y), _edge_gains(sfc), constellation.points, means, variances, q)
    pv = np.moveaxis(np.asarray(pmfs, dtype=np.float64), 2, 0)
    return np.moveaxis(_var_kernel(ll, pv, damping)[0], 0, 2)


def symbol_posteriors(
    y: np.ndarray,
    sfc: SparseFresnelChannel,
    means: np.ndarray,
    variances: np.ndarray,
    constellation: Constellation,
) -> np.ndarray:
    """``p_n(alpha_m)`` combining all ``L`` observations of each symbol, shape ``(N, M)``."""
    _, q = build_index_maps(sfc)
    ll = _ll_kernel(np.asarray(y), _edge_gains(sfc), constellation.points, means, variances, q)
    return _softmax0(ll.sum(axis=2)).T


def convergence_indicator(posteriors: np.ndarray, gamma: float) -> float:
    """Fraction of symbols whose largest posterior probability is at least ``gamma``."""
    return float(np.mean(np.max(posteriors, axis=1) >= gamma))


def init_state(sfc: SparseFresnelChannel, constellation: Constellation) -> MessageState:
    b, q = build_index_maps(sfc)
    n, n_log, m = sfc.n_chirps, sfc.n_logical, constellation.order
    return MessageState(
        pmfs=np.full((n, n_log, m), 1.0 / m),
        means=np.zeros((n, n_log), dtype=np.complex128),
        variances=np.zeros((n, n_log)),
        b=b,
        q=q,
    )


def detect(
    y: np.ndarray,
    sfc: SparseFresnelChannel,
    constellation: Constellation,
    config: DetectorConfig,
    truth: np.ndarray | None = None,
) -> DetectionResult:
    """Iterative MP detection with damping and convergence-based early stopping.

    Stops when ``max_iters`` is reached, when every symbol is confident
    (``eta == 1``) or when ``eta`` falls more than ``epsilon`` below its best
    value so far. The returned decisions are those of the iteration with the
    highest ``eta``.

    ``trace`` holds ``(iteration, eta)`` rows; with ``truth`` (symbol indices)
    each row also carries the symbol errors of the current and of the
    best-so-far decisions.
    """
    y = np.asarray(y, dtype=np.complex128)
    if y.shape != (sfc.n_chirps,):
        raise ValueError(f"y must have shape ({sfc.n_chirps},), got {y.shape}")
    if not np.all(np.isfinite(y)):
        raise ValueError("received vector contains non-finite values")
    if config.noise_var is None:
        raise ValueError("config.noise_var must be set")

    st = init_state(sfc, constellation)
    g = _edge_gains(sfc)
    alpha = constellation.points
    pv = np.moveaxis(st.pmfs, 2, 0).copy()
    eta = eta_max = 0.0
    best_idx = best_post = None
    trace = []
    it = 0
    while it < config.max_iters and eta < 1.0:
        it += 1
        means, variances = _obs_kernel(pv, st.b, g, alpha, config.noise_var)
        ll = _ll_kernel(y, g, alpha, means, variances, st.q)
        pv, post0 = _var_kernel(ll, pv, config.damping)
        post = post0.T
        eta = convergence_indicator(post, config.gamma)
        cur_idx = np.argmax(post0, axis=0)
        stop = False
        # the first iterate is always kept so a result exists even if eta stays 0
        if eta > eta_max or best_idx is None:
            eta_max = max(eta, eta_max)
            best_idx = cur_idx
            best_post = post
        elif eta < eta_max - config.epsilon:
            stop = True
        if truth is not None:
            trace.append(
                (it, eta, int(np.sum(cur_idx != truth)), int(np.sum(best_idx != truth)))
            )
        else:
            trace.append((it, eta))
        if stop:
            break
    st.pmfs = np.moveaxis(pv, 0, 2)
    st.means, st.variances = means, variances
    return DetectionResult(
        symbol_indices=best_idx,
        symbols=constellation.points[best_idx],
        posteriors=best_post,
        iterations_used=it,
        final_eta=eta,
        best_eta=eta_max,
        converged=eta >= 1.0,
        trace=trace,
    )
