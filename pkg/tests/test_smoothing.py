import numpy as np
import pytest

import ssmkit as sk
from conftest import random_data, random_model
from oracle import DenseOracle


def llm(hvar=1.0, qvar=1.0, a1=0.0, P1=1.0):
    return sk.StateSpaceModel(H=[[hvar]], Z=[[1.0]], T=[[1.0]], R=[[1.0]],
                              Q=[[qvar]], a1=[[a1]], P1=[[P1]])


class TestStateSmooth:
    def test_no_state_uncertainty(self):
        mdl = sk.StateSpaceModel(H=[[1.0]], Z=[[1.0]], T=[[1.0]], R=[[1.0]],
                                 Q=[[0.0]], a1=[[3.0]], P1=[[0.0]])
        ah, V = sk.state_smooth(np.array([[3.1, 2.9, 3.0]]), mdl)
        assert np.allclose(ah, 3.0)
        assert np.allclose(V, 0.0)

    def test_llm_against_dense_oracle(self):
        mdl = llm()
        y = np.array([[1.0, 2.0, 3.0]])
        ah, V = sk.state_smooth(y, mdl)
        orc = DenseOracle(mdl, 3)
        for t in range(3):
            mean, var = orc.smoothed(y, t)
            assert np.allclose(ah[:, t], mean, atol=1e-10)
            assert np.allclose(V[:, :, t], var, atol=1e-10)

    def test_variance_never_exceeds_filtered(self):
        rng = np.random.default_rng(0)
        mdl = random_model(rng)
        y = random_data(rng, mdl, 7)
        res = sk.kalman_filter(y, mdl)
        _, V = sk.state_smooth(y, mdl)
        for t in range(7):
            assert np.all(np.diag(V[:, :, t]) <= np.diag(res.P[:, :, t]) + 1e-8)

    def test_fast_equals_full_bitwise(self):
        rng = np.random.default_rng(1)
        mdl = random_model(rng)
        y = random_data(rng, mdl, 6)
        full, _ = sk.state_smooth(y, mdl)
        fast = sk.fast_state_smooth(y, mdl)
        assert np.array_equal(full, fast)


class TestDisturbSmooth:
    def test_zero_obs_noise(self):
        mdl = sk.StateSpaceModel(H=[[0.0]], Z=[[1.0]], T=[[0.5]], R=[[1.0]],
                                 Q=[[1.0]], a1=[[0.0]], P1=[[1.0]])
        eps, eta, epsvar, etavar = sk.disturb_smooth(np.array([[0.3, -0.4, 0.1]]), mdl)
        assert np.allclose(eps, 0.0, atol=1e-12)
        assert np.allclose(epsvar, 0.0, atol=1e-12)

    def test_llm_oracle_disturbances(self):
        mdl = llm()
        y = np.array([[1.0, 2.0, 3.0]])
        eps, eta, epsvar, etavar = sk.disturb_smooth(y, mdl)
        orc = DenseOracle(mdl, 3)
        for t in range(3):
            me, ve = orc.smoothed_eps(y, t)
            assert np.allclose(eps[:, t], me, atol=1e-10)
            assert np.allclose(epsvar[:, :, t], ve, atol=1e-10)
            mh, vh = orc.smoothed_eta(y, t)
            assert np.allclose(eta[:, t], mh, atol=1e-10)
            assert np.allclose(etavar[:, :, t], vh, atol=1e-10)

    def test_additive_identity(self):
        rng = np.random.default_rng(10)
        for _ in range(5):
            mdl = random_model(rng)
            y = random_data(rng, mdl, 6, missing_frac=0.15)
            res = sk.smooth_all(y, mdl)
            Z = mdl.Z.realize(6)
            for t in range(6):
                Zt = Z[t if Z.shape[0] > 1 else 0]
                fitted = Zt @ res.alphahat[:, t] + res.epshat[:, t]
                obs = ~np.isnan(y[:, t])
                assert np.allclose(fitted[obs], y[obs, t], atol=1e-8)


class TestOracleSweep:
    def test_smoother_matches_dense_oracle(self):
        rng = np.random.default_rng(11)
        for k in range(25):
            mdl = random_model(rng)
            n = int(rng.integers(2, 8))
            y = random_data(rng, mdl, n, missing_frac=0.1 if k % 2 else 0.0)
            orc = DenseOracle(mdl, n)
            res = sk.smooth_all(y, mdl)
            for t in range(n):
                mean, var = orc.smoothed(y, t)
                sc = max(1.0, np.abs(mean).max())
                assert np.allclose(res.alphahat[:, t], mean, atol=1e-8 * sc)
                assert np.allclose(res.V[:, :, t], var, atol=1e-8 * max(1.0, abs(var).max()))
                me, ve = orc.smoothed_eps(y, t)
                assert np.allclose(res.epshat[:, t], me, atol=1e-8 * max(1.0, abs(me).max()))
                assert np.allclose(res.epsvar[:, :, t], ve, atol=1e-7 * max(1.0, abs(ve).max()))
                mh, vh = orc.smoothed_eta(y, t)
                assert np.allclose(res.etahat[:, t], mh, atol=1e-8 * max(1.0, abs(mh).max()))
                assert np.allclose(res.etavar[:, :, t], vh, atol=1e-7 * max(1.0, abs(vh).max()))

    def test_diffuse_smoother_matches_kappa_run(self):
        rng = np.random.default_rng(12)
        for _ in range(8):
            mdl = random_model(rng, diffuse=1)
            y = random_data(rng, mdl, 8, gen_kappa=1.0)
            res = sk.smooth_all(y, mdl)
            P1k = mdl.P1.mat.copy()
            dg = np.isinf(np.diag(P1k))
            P1k[np.isinf(P1k)] = 0
            np.fill_diagonal(P1k, np.where(dg, 1e7, np.diag(P1k)))
            mk = sk.StateSpaceModel(H=mdl.H, Z=mdl.Z, T=mdl.T, R=mdl.R, Q=mdl.Q,
                                    c=mdl.c, a1=mdl.a1, P1=P1k)
            rk = sk.smooth_all(y, mk)
            assert np.allclose(res.alphahat, rk.alphahat, atol=2e-3)
            assert np.allclose(res.V, rk.V, atol=2e-3)
            assert np.allclose(res.etahat, rk.etahat, atol=2e-3)
            assert np.allclose(res.epshat, rk.epshat, atol=2e-3)


class TestForecastEquivalence:
    def test_filter_and_smoother_forecasts_agree(self):
        rng = np.random.default_rng(13)
        mdl = random_model(rng, diag_h=True)
        y = random_data(rng, mdl, 10)
        y[:, 7:] = np.nan
        res = sk.kalman_filter(y, mdl)
        ah = sk.fast_state_smooth(y, mdl)
        Z = mdl.Z.realize(10)
        for t in range(7, 10):
            Zt = Z[t if Z.shape[0] > 1 else 0]
            assert np.allclose(Zt @ res.a[:, t], Zt @ ah[:, t], atol=1e-10)


class TestSimSmooth:
    def test_deterministic_model_draws_equal_alphahat(self):
        mdl = sk.StateSpaceModel(H=[[0.0]], Z=[[1.0]], T=[[1.0]], R=[[1.0]],
                                 Q=[[0.0]], a1=[[2.0]], P1=[[0.0]])
        y = np.full((1, 4), 2.0)
        ah = sk.fast_state_smooth(y, mdl)
        al, eps, eta = sk.sim_smooth(y, mdl, N=3, seed=1)
        for j in range(3):
            assert np.allclose(al[:, :, j], ah, atol=1e-12)

    def test_antithetic_pairs_average_to_alphahat(self):
        mdl = llm()
        rng = np.random.default_rng(2)
        y = rng.normal(size=(1, 12)).cumsum()[None, :]
        ah = sk.fast_state_smooth(y, mdl)
        al, eps, eta = sk.sim_smooth(y, mdl, N=6, antithetic=True, seed=9)
        pair_mean = (al[:, :, 0::2] + al[:, :, 1::2]) / 2.0
        for j in range(3):
            assert np.allclose(pair_mean[:, :, j], ah, atol=1e-10)

    def test_antithetic_with_diffuse_prior(self):
        mdl = llm(P1=np.inf)
        rng = np.random.default_rng(3)
        y = rng.normal(size=(1, 10)).cumsum()[None, :]
        ah = sk.fast_state_smooth(y, mdl)
        al, _, _ = sk.sim_smooth(y, mdl, N=4, antithetic=True, seed=5)
        pair_mean = (al[:, :, 0::2] + al[:, :, 1::2]) / 2.0
        assert np.allclose(pair_mean[:, :, 0], ah, atol=1e-7)

    def test_monte_carlo_moments(self):
        mdl = llm()
        rng = np.random.default_rng(4)
        y = (rng.normal(size=20).cumsum() + rng.normal(size=20))[None, :]
        ah, V = sk.state_smooth(y, mdl)
        al, eps, eta = sk.sim_smooth(y, mdl, N=10000, seed=11)
        emp_mean = al.mean(axis=2)
        emp_var = al.var(axis=2, ddof=1)
        se = np.sqrt(V[0, 0, :] / 10000)
        assert np.all(np.abs(emp_mean[0] - ah[0]) < 4.5 * se)
        assert np.all(np.abs(emp_var[0] - V[0, 0, :]) < 0.1 * V[0, 0, :])

    def test_draw_count_validated(self):
        with pytest.raises(ValueError):
            sk.sim_smooth(np.array([[1.0]]), llm(), N=0)

    def test_missing_data_draws(self):
        mdl = llm()
        y = np.array([[1.0, np.nan, 3.0, 2.0]])
        al, eps, eta = sk.sim_smooth(y, mdl, N=200, seed=3)
        ah, V = sk.state_smooth(y, mdl)
        assert abs(al[0, 1].mean() - ah[0, 1]) < 4.5 * np.sqrt(V[0, 0, 1] / 200)


class TestSample:
    def test_deterministic_trajectory(self):
        mdl = sk.StateSpaceModel(H=[[0.0]], Z=[[1.0]], T=[[1.1]], R=[[1.0]],
                                 Q=[[0.0]], a1=[[1.0]], P1=[[0.0]])
        y, alpha, eps, eta = sk.sample(mdl, 5, 3, seed=0)
        want = 1.1 ** np.arange(5)
        for j in range(3):
            assert np.allclose(y[0, :, j], want, atol=1e-12)

    def test_seed_determinism(self):
        mdl = llm()
        y1 = sk.sample(mdl, 6, 4, seed=42)[0]
        y2 = sk.sample(mdl, 6, 4, seed=42)[0]
        assert np.array_equal(y1, y2)
        y3 = sk.sample(mdl, 6, 4, seed=43)[0]
        assert not np.array_equal(y1, y3)

    def test_llm_difference_variance(self):
        # delta y_t = eta_{t-1} + eps_t - eps_{t-1}: var = q + 2h
        mdl = llm(hvar=0.5, qvar=1.0, P1=0.0)
        y = sk.sample(mdl, 10000, 1, seed=7)[0][0, :, 0]
        dv = np.diff(y).var()
        assert abs(dv - 2.0) < 0.2


class TestBatch:
    def test_matches_per_replicate_fast_smoothing(self):
        rng = np.random.default_rng(14)
        mdl = random_model(rng, diag_h=True)
        Y = np.stack([random_data(rng, mdl, 6) for _ in range(3)], axis=2)
        ah, eps, eta = sk.batch_smooth(Y, mdl)
        for j in range(3):
            res = sk.smooth_all(Y[:, :, j], mdl, variances=False)
            assert np.allclose(ah[:, :, j], res.alphahat, atol=1e-10)
            assert np.allclose(eps[:, :, j], res.epshat, atol=1e-10)
            assert np.allclose(eta[:, :, j], res.etahat, atol=1e-10)

    def test_missing_rejected(self):
        Y = np.ones((1, 4, 2))
        Y[0, 1, 0] = np.nan
        with pytest.raises(ValueError, match="missing"):
            sk.batch_smooth(Y, llm())


class TestSignal:
    def test_single_component(self):
        mdl = llm()
        alpha = np.arange(4.0)[None, :]
        sig = sk.signal(alpha, mdl)
        assert sig.shape == (1, 4)
        assert np.allclose(sig[0], alpha[0])

    def test_two_components_sum(self):
        mdl = sk.StateSpaceModel(
            H=[[1.0]], Z=[[1.0, 1.0]], T=np.eye(2), R=np.eye(2), Q=np.eye(2),
            components=[sk.Component("x", 0, 1, {}), sk.Component("y", 1, 2, {})],
        )
        alpha = np.array([[1.0, 2.0], [3.0, 4.0]])
        sig = sk.signal(alpha, mdl)
        assert sig.shape == (2, 2)
        assert np.allclose(sig.sum(axis=0), [4.0, 6.0])

    def test_span_mismatch(self):
        mdl = llm()
        with pytest.raises(ValueError, match="states"):
            sk.signal(np.zeros((2, 4)), mdl)
