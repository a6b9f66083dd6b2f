import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ocdm_mp.channel import ChannelRealization, PathSpec
from ocdm_mp.constellation import bpsk, qam4
from ocdm_mp.fresnel_channel import SparseFresnelChannel, assemble_dense, sparse_fresnel_channel
from ocdm_mp.mp_detector import (
    DetectorConfig,
    build_index_maps,
    convergence_indicator,
    detect,
    edge_log_likelihoods,
    init_state,
    observation_messages,
    symbol_posteriors,
    variable_update,
)


def random_sfc(rng, n, shifts):
    w = (rng.standard_normal((len(shifts), n)) + 1j * rng.standard_normal((len(shifts), n))) / np.sqrt(2 * len(shifts))
    return SparseFresnelChannel(n, np.array(shifts), w)


def random_pmfs(rng, n, l, m):
    p = rng.uniform(0.01, 1, (n, l, m))
    return p / p.sum(axis=2, keepdims=True)


def edge_slot(q, j, target):
    """Position of observation ``target`` among the observations of symbol ``j``."""
    (hits,) = np.nonzero(q[j] == target)
    assert len(hits) == 1
    return int(hits[0])


def naive_observation_messages(y, h, b, q, pmfs, alpha, noise_var):
    n, l = b.shape
    mu = np.zeros((n, l), complex)
    var = np.zeros((n, l))
    for obs in range(n):
        for e in range(l):
            for i in range(l):
                if i == e:
                    continue
                j = b[obs, i]
                p = pmfs[j, edge_slot(q, j, obs)]
                g = h[obs, j]
                m1 = sum(p[k] * g * alpha[k] for k in range(len(alpha)))
                m2 = sum(p[k] * abs(g * alpha[k]) ** 2 for k in range(len(alpha)))
                mu[obs, e] += m1
                var[obs, e] += m2 - abs(m1) ** 2
            var[obs, e] += noise_var
    return mu, var


def naive_extrinsic(y, h, b, q, mu, var, alpha):
    n, l = b.shape
    out = np.zeros((n, l, len(alpha)))
    for j in range(n):
        for e in range(l):
            logp = np.zeros(len(alpha))
            for i in range(l):
                if i == e:
                    continue
                obs = q[j, i]
                slot = int(np.nonzero(b[obs] == j)[0][0])
                for k, a in enumerate(alpha):
                    logp[k] -= abs(y[obs] - mu[obs, slot] - h[obs, j] * a) ** 2 / var[obs, slot]
            p = np.exp(logp - logp.max())
            out[j, e] = p / p.sum()
    return out


class TestIndexMaps:
    def test_single_unshifted(self):
        sfc = SparseFresnelChannel(6, np.array([0]), np.ones((1, 6)))
        b, q = build_index_maps(sfc)
        np.testing.assert_array_equal(b[:, 0], np.arange(6))
        np.testing.assert_array_equal(q[:, 0], np.arange(6))

    def test_two_paths_n8(self):
        sfc = SparseFresnelChannel(8, np.array([0, 2]), np.ones((2, 8)))
        b, q = build_index_maps(sfc)
        assert list(b[3]) == [3, 1]
        assert list(q[3]) == [3, 5]

    @settings(max_examples=30)
    @given(st.sampled_from([8, 16, 32]), st.data())
    def test_maps_are_inverse(self, n, data):
        shifts = data.draw(st.lists(st.integers(0, n - 1), min_size=1, max_size=5, unique=True))
        b, q = build_index_maps(SparseFresnelChannel(n, np.array(shifts), np.ones((len(shifts), n))))
        for i in range(len(shifts)):
            np.testing.assert_array_equal(q[b[:, i], i], np.arange(n))
            np.testing.assert_array_equal(b[q[:, i], i], np.arange(n))

    def test_maps_follow_dense_support(self):
        rng = np.random.default_rng(0)
        sfc = random_sfc(rng, 16, [0, 3, 7])
        b, _ = build_index_maps(sfc)
        h = assemble_dense(sfc)
        for n in range(16):
            assert set(b[n]) == set(np.nonzero(h[n])[0])


class TestObservationMessages:
    def test_single_path_has_no_interference(self):
        sfc = SparseFresnelChannel(8, np.array([0]), np.ones((1, 8)))
        st_ = init_state(sfc, qam4())
        mu, var = observation_messages(np.zeros(8), sfc, st_.pmfs, qam4(), 0.3)
        assert np.all(mu == 0)
        np.testing.assert_allclose(var, 0.3)

    def test_uniform_bpsk_single_interferer(self):
        w = 0.7 - 0.2j
        sfc = SparseFresnelChannel(8, np.array([0, 1]), np.vstack([np.ones(8), np.full(8, w)]))
        st_ = init_state(sfc, bpsk())
        mu, var = observation_messages(np.zeros(8), sfc, st_.pmfs, bpsk(), 0.1)
        np.testing.assert_allclose(mu, 0, atol=1e-15)
        np.testing.assert_allclose(var[:, 0], abs(w) ** 2 + 0.1)
        np.testing.assert_allclose(var[:, 1], 1 + 0.1)

    @pytest.mark.parametrize("const", [bpsk(), qam4()], ids=["bpsk", "qam4"])
    def test_against_naive_loops(self, const):
        rng = np.random.default_rng(1)
        sfc = random_sfc(rng, 8, [0, 2, 5])
        b, q = build_index_maps(sfc)
        pmfs = random_pmfs(rng, 8, 3, const.order)
        y = rng.standard_normal(8) + 1j * rng.standard_normal(8)
        mu, var = observation_messages(y, sfc, pmfs, const, 0.05)
        mu_ref, var_ref = naive_observation_messages(y, assemble_dense(sfc), b, q, pmfs, const.points, 0.05)
        np.testing.assert_allclose(mu, mu_ref, atol=1e-13)
        np.testing.assert_allclose(var, var_ref, atol=1e-13)


class TestVariableUpdate:
    def setup_method(self):
        rng = np.random.default_rng(2)
        self.const = qam4()
        self.sfc = random_sfc(rng, 8, [0, 1, 4])
        self.b, self.q = build_index_maps(self.sfc)
        self.y = rng.standard_normal(8) + 1j * rng.standard_normal(8)
        self.pmfs = random_pmfs(rng, 8, 3, 4)
        self.mu, self.var = observation_messages(self.y, self.sfc, self.pmfs, self.const, 0.2)
        self.ref = naive_extrinsic(self.y, assemble_dense(self.sfc), self.b, self.q, self.mu, self.var, self.const.points)

    def test_no_damping_is_extrinsic(self):
        out = variable_update(self.y, self.sfc, self.mu, self.var, self.pmfs, 1.0, self.const)
        np.testing.assert_allclose(out, self.ref, atol=1e-12)

    def test_damping_mix(self):
        out = variable_update(self.y, self.sfc, self.mu, self.var, self.pmfs, 0.6, self.const)
        np.testing.assert_allclose(out, 0.6 * self.ref + 0.4 * self.pmfs, atol=1e-12)

    def test_damping_bounds(self):
        with pytest.raises(ValueError):
            variable_update(self.y, self.sfc, self.mu, self.var, self.pmfs, 0.0, self.const)

    def test_edge_likelihoods_normalised(self):
        ll = edge_log_likelihoods(self.y, self.sfc, self.mu, self.var, self.const)
        assert ll.shape == (8, 3, 4)
        np.testing.assert_allclose(np.exp(ll).sum(axis=2), 1, atol=1e-12)

    def test_posteriors_combine_all_edges(self):
        post = symbol_posteriors(self.y, self.sfc, self.mu, self.var, self.const)
        ll = edge_log_likelihoods(self.y, self.sfc, self.mu, self.var, self.const).sum(axis=1)
        ref = np.exp(ll - ll.max(axis=1, keepdims=True))
        np.testing.assert_allclose(post, ref / ref.sum(axis=1, keepdims=True), atol=1e-12)

    def test_concentrates_on_noiseless_identity(self):
        # L = 2 with one zero-weight path keeps the extrinsic products non-empty
        n = 8
        sfc = SparseFresnelChannel(n, np.array([0, 3]), np.vstack([np.ones(n), np.zeros(n)]))
        c = bpsk()
        y = np.ones(n, complex)
        for damping in (0.6, 1.0):
            p = init_state(sfc, c).pmfs
            for _ in range(2):
                mu, var = observation_messages(y, sfc, p, c, 1e-4)
                p = variable_update(y, sfc, mu, var, p, damping, c)
            post = symbol_posteriors(y, sfc, *observation_messages(y, sfc, p, c, 1e-4), c)
            assert np.all(post[:, 0] > 0.99)
        # undamped, the edge fed by the unit-weight observation is already certain
        assert np.all(p[:, 1, 0] > 0.99)

    def test_underflow_is_handled(self):
        n = 8
        sfc = SparseFresnelChannel(n, np.array([0, 1]), np.full((2, n), 1e3 + 0j))
        y = np.full(n, 1e8 + 0j)
        st_ = init_state(sfc, qam4())
        mu, var = observation_messages(y, sfc, st_.pmfs, qam4(), 1e-12)
        p = variable_update(y, sfc, mu, var, st_.pmfs, 0.6, qam4())
        assert np.all(np.isfinite(p))
        np.testing.assert_allclose(p.sum(axis=2), 1)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.05, 1.0), st.sampled_from([bpsk(), qam4()]))
def test_message_validity(seed, damping, const):
    rng = np.random.default_rng(seed)
    sfc = random_sfc(rng, 16, list(rng.choice(16, 3, replace=False)))
    y = rng.standard_normal(16) + 1j * rng.standard_normal(16)
    p = random_pmfs(rng, 16, 3, const.order)
    for _ in range(3):
        mu, var = observation_messages(y, sfc, p, const, 0.01)
        assert np.all(var >= 0.01)
        p = variable_update(y, sfc, mu, var, p, damping, const)
        assert np.all(p >= 0)
        np.testing.assert_allclose(p.sum(axis=2), 1, atol=1e-9)


class TestConvergenceIndicator:
    def test_one_hot(self):
        assert convergence_indicator(np.eye(4)[[0, 1, 2, 3, 0, 1]], 0.999) == 1.0

    def test_uniform(self):
        assert convergence_indicator(np.full((10, 4), 0.25), 0.99) == 0.0

    def test_half(self):
        p = np.vstack([np.eye(4)[[0, 1, 2]], np.full((3, 4), 0.25)])
        assert convergence_indicator(p, 0.99) == 0.5


class TestDetectorConfig:
    @pytest.mark.parametrize(
        "kw", [dict(damping=0), dict(damping=1.5), dict(max_iters=0), dict(gamma=1.0), dict(epsilon=0), dict(noise_var=-1)]
    )
    def test_rejects(self, kw):
        with pytest.raises(ValueError):
            DetectorConfig(**kw)

    def test_with_noise_var(self):
        assert DetectorConfig().with_noise_var(0.5).noise_var == 0.5


class TestDetect:
    def test_interference_free(self):
        n = 16
        sfc = sparse_fresnel_channel(ChannelRealization((PathSpec(1, 0),), n), 0)
        c = qam4()
        idx = np.random.default_rng(3).integers(0, 4, n)
        res = detect(c.points[idx], sfc, c, DetectorConfig(noise_var=1e-6))
        np.testing.assert_array_equal(res.symbol_indices, idx)
        assert res.iterations_used <= 2 and res.converged
        np.testing.assert_allclose(res.posteriors.sum(axis=1), 1, atol=1e-9)

    def test_noiseless_two_path(self):
        n = 32
        rng = np.random.default_rng(4)
        c = qam4()
        ch = ChannelRealization((PathSpec(0.8, 0, 0), PathSpec(0.5 - 0.3j, 2, 1)), n)
        sfc = sparse_fresnel_channel(ch, 0)
        assert sfc.n_logical == 2
        for _ in range(100):
            idx = rng.integers(0, 4, n)
            res = detect(sfc.apply(c.points[idx]), sfc, c, DetectorConfig(noise_var=1e-4))
            np.testing.assert_array_equal(res.symbol_indices, idx)

    def test_input_errors(self):
        sfc = SparseFresnelChannel(8, np.array([0]), np.ones((1, 8)))
        cfg = DetectorConfig(noise_var=0.1)
        with pytest.raises(ValueError):
            detect(np.ones(7), sfc, qam4(), cfg)
        y = np.ones(8, complex)
        y[2] = np.nan
        with pytest.raises(ValueError):
            detect(y, sfc, qam4(), cfg)
        with pytest.raises(ValueError):
            detect(np.ones(8), sfc, qam4(), DetectorConfig())

    def test_returns_best_iterate(self):
        rng = np.random.default_rng(5)
        c = qam4()
        sfc = random_sfc(rng, 32, [0, 1, 3, 6, 10])
        seen_regression = False
        for _ in range(100):
            idx = rng.integers(0, 4, 32)
            y = sfc.apply(c.points[idx]) + 0.3 * (rng.standard_normal(32) + 1j * rng.standard_normal(32))
            res = detect(y, sfc, c, DetectorConfig(noise_var=0.18, max_iters=30), truth=idx)
            etas = [row[1] for row in res.trace]
            assert res.best_eta == max(etas)
            assert res.final_eta == etas[-1]
            assert len(res.trace) == res.iterations_used
            np.testing.assert_array_equal(res.symbol_indices, res.posteriors.argmax(axis=1))
            assert res.trace[-1][3] == np.sum(res.symbol_indices != idx)
            first_best = int(np.argmax(etas)) if max(etas) > 0 else 0
            assert res.trace[first_best][2] == res.trace[-1][3]
            seen_regression |= etas[-1] < max(etas)
        assert seen_regression

    def test_regression_stops_early(self):
        rng = np.random.default_rng(6)
        c = qam4()
        sfc = random_sfc(rng, 32, [0, 1, 3, 6, 10])
        stops = 0
        for _ in range(100):
            idx = rng.integers(0, 4, 32)
            y = sfc.apply(c.points[idx]) + 0.3 * (rng.standard_normal(32) + 1j * rng.standard_normal(32))
            res = detect(y, sfc, c, DetectorConfig(noise_var=0.18, max_iters=50, epsilon=0.01))
            etas = [row[1] for row in res.trace]
            if res.iterations_used < 50 and not res.converged:
                assert etas[-1] < max(etas) - 0.01
                stops += 1
        assert stops > 0

    def test_lower_noise_fewer_errors(self):
        rng = np.random.default_rng(7)
        c = qam4()
        sfc = random_sfc(rng, 32, [0, 2, 5])
        errs = []
        for sigma2 in (0.3, 0.1, 0.01):
            local = np.random.default_rng(8)
            e = 0
            for _ in range(150):
                idx = local.integers(0, 4, 32)
                w = np.sqrt(sigma2 / 2) * (local.standard_normal(32) + 1j * local.standard_normal(32))
                res = detect(sfc.apply(c.points[idx]) + w, sfc, c, DetectorConfig(noise_var=sigma2))
                e += int(np.sum(res.symbol_indices != idx))
            errs.append(e)
        assert errs[0] >= errs[1] >= errs[2]
        assert errs[0] > errs[2]

    def test_close_to_exhaustive_map(self):
        # symbol-wise MAP over all 4**4 hypotheses; MP is approximate, so only agreement is asserted
        n, c = 4, qam4()
        hyp = np.array(list(itertools.product(range(4), repeat=n)))
        xs = c.points[hyp]
        rng = np.random.default_rng(9)
        n0 = 0.5 / 10**1.5
        agree = 0
        trials = 200
        for _ in range(trials):
            sfc = random_sfc(rng, n, [0, int(rng.integers(1, n))])
            h = assemble_dense(sfc)
            idx = rng.integers(0, 4, n)
            y = h @ c.points[idx] + np.sqrt(n0 / 2) * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
            metric = -np.sum(np.abs(y - xs @ h.T) ** 2, axis=1) / n0
            p = np.exp(metric - metric.max())
            map_dec = np.array([[p[hyp[:, k] == m].sum() for m in range(4)] for k in range(n)]).argmax(axis=1)
            agree += np.all(detect(y, sfc, c, DetectorConfig(noise_var=n0)).symbol_indices == map_dec)
        assert agree / trials >= 0.9
