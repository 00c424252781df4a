import numpy as np
import pytest

import ssmkit as sk
from conftest import random_data, random_model
from oracle import DenseOracle


def llm(hvar=1.0, qvar=1.0, a1=0.0, P1=1.0):
    return sk.StateSpaceModel(H=[[hvar]], Z=[[1.0]], T=[[1.0]], R=[[1.0]],
                              Q=[[qvar]], a1=[[a1]], P1=[[P1]])


class TestBasics:
    def test_degenerate_known_state(self):
        mdl = sk.StateSpaceModel(H=[[1.0]], Z=[[1.0]], T=[[1.0]], R=[[1.0]],
                                 Q=[[0.0]], a1=[[2.0]], P1=[[0.0]])
        res = sk.kalman_filter(np.array([[2.0, 2.0]]), mdl)
        assert np.allclose(res.v, 0.0)
        assert np.allclose(res.F, 1.0)
        assert np.allclose(res.a, 2.0)

    def test_local_level_against_dense_oracle(self):
        mdl = llm()
        y = np.array([[1.0, 2.0, 3.0]])
        orc = DenseOracle(mdl, 3)
        res = sk.kalman_filter(y, mdl)
        for t in range(3):
            mean, var = orc.predicted(y, t)
            assert np.allclose(res.a[:, t], mean, atol=1e-10)
            assert np.allclose(res.P[:, :, t], var, atol=1e-10)
        assert res.loglik == pytest.approx(orc.loglik(y), abs=1e-10)

    def test_diffuse_llm_d_and_kappa_limit(self):
        y = np.array([[1.0, 2.0, 1.5, 2.5]])
        dif = llm(P1=np.inf)
        prop = llm(P1=1e7)
        rd = sk.kalman_filter(y, dif)
        rp = sk.kalman_filter(y, prop)
        assert rd.d == 1
        assert np.allclose(rd.a[:, 2:], rp.a[:, 2:], atol=1e-4)
        # loglik difference is the diffuse constant q*log(kappa)/2
        assert rd.loglik == pytest.approx(rp.loglik + 0.5 * np.log(1e7), abs=1e-3)

    def test_iid_standard_normal_loglik(self):
        mdl = sk.StateSpaceModel(H=[[1.0]], Z=[[0.0]], T=[[1.0]], R=[[1.0]],
                                 Q=[[0.0]], a1=[[0.0]], P1=[[0.0]])
        assert sk.loglik(np.array([[0.0]]), mdl) == pytest.approx(
            -0.5 * np.log(2 * np.pi), abs=1e-12
        )

    def test_nongaussian_model_rejected(self):
        spec = sk.NonGaussianSpec("additive_noise", [True])
        mdl = sk.StateSpaceModel(
            H=sk.Disturbance(sk.DynamicMatrix([[1.0]]), [spec]),
            Z=[[1.0]], T=[[1.0]], R=[[1.0]], Q=[[1.0]],
        )
        with pytest.raises(ValueError, match="approximation"):
            sk.kalman_filter(np.array([[1.0]]), mdl)

    def test_singular_F_with_inconsistent_obs(self):
        mdl = sk.StateSpaceModel(H=[[0.0]], Z=[[1.0]], T=[[1.0]], R=[[1.0]],
                                 Q=[[0.0]], a1=[[0.0]], P1=[[0.0]])
        with pytest.raises(sk.FilterSingularError, match="t=0"):
            sk.kalman_filter(np.array([[1.0]]), mdl)

    def test_consistent_deterministic_obs_skipped(self):
        mdl = sk.StateSpaceModel(H=[[0.0]], Z=[[1.0]], T=[[1.0]], R=[[1.0]],
                                 Q=[[0.0]], a1=[[5.0]], P1=[[0.0]])
        res = sk.kalman_filter(np.array([[5.0, 5.0]]), mdl)
        assert res.loglik == 0.0
        assert np.allclose(res.a, 5.0)


class TestMissing:
    def test_fully_missing_column_is_pure_prediction(self):
        mdl = llm()
        y = np.array([[1.0, np.nan, 3.0]])
        res = sk.kalman_filter(y, mdl)
        # prediction step only: a_2 = a_1(post), P grows by Q
        assert res.a[0, 2] == res.a[0, 1]
        assert res.P[0, 0, 2] == pytest.approx(res.P[0, 0, 1] + 1.0)

    def test_deleting_vs_marking_missing(self):
        rng = np.random.default_rng(3)
        mdl = llm()
        y = rng.normal(size=(1, 5))
        ymiss = y.copy()
        ymiss[0, 2] = np.nan
        res = sk.kalman_filter(ymiss, mdl)
        orc = DenseOracle(mdl, 5)
        mean, var = orc.predicted(ymiss, 4)
        assert np.allclose(res.a[:, 4], mean, atol=1e-10)
        assert np.allclose(res.P[:, :, 4], var, atol=1e-10)

    def test_partial_missing_rows_dropped(self):
        rng = np.random.default_rng(4)
        mdl = random_model(rng, m_max=2, p_max=2, diag_h=True)
        y = random_data(rng, mdl, 6)
        if mdl.p == 1:
            y = np.vstack([y, y])[:, :6]  # force p irrelevant; regenerate below
            mdl = random_model(np.random.default_rng(11), m_max=2, p_max=2, diag_h=True)
            while mdl.p != 2:
                mdl = random_model(np.random.default_rng(int(rng.integers(1e6))), 2, 2, True)
            y = random_data(rng, mdl, 6)
        y[0, 2] = np.nan
        orc = DenseOracle(mdl, 6)
        res = sk.kalman_filter(y, mdl)
        mean, var = orc.predicted(y, 5)
        assert np.allclose(res.a[:, 5], mean, atol=1e-8)
        assert np.allclose(res.P[:, :, 5], var, atol=1e-8)


class TestOracleSweep:
    def test_random_models_match_dense_oracle(self):
        rng = np.random.default_rng(2024)
        for k in range(40):
            mdl = random_model(rng)
            n = int(rng.integers(2, 9))
            y = random_data(rng, mdl, n, missing_frac=0.1 if k % 3 == 0 else 0.0)
            orc = DenseOracle(mdl, n)
            res = sk.kalman_filter(y, mdl)
            ll = orc.loglik(y)
            assert res.loglik == pytest.approx(ll, rel=1e-8, abs=1e-8)
            for t in range(n):
                mean, var = orc.predicted(y, t)
                scale = max(1.0, np.abs(mean).max())
                assert np.allclose(res.a[:, t], mean, atol=1e-8 * scale)
                assert np.allclose(res.P[:, :, t], var, atol=1e-8 * max(1.0, np.abs(var).max()))
            for (t, i, v, F) in orc.innovations(y):
                assert res.v[i, t] == pytest.approx(v, rel=1e-8, abs=1e-8)
                assert res.F[i, t] == pytest.approx(F, rel=1e-8)

    def test_permutation_invariance_univariate_processing(self):
        rng = np.random.default_rng(77)
        for _ in range(10):
            mdl = random_model(rng, m_max=3, p_max=2, diag_h=True)
            if mdl.p < 2:
                continue
            n = 5
            y = random_data(rng, mdl, n)
            perm = np.array([1, 0])
            Z = mdl.Z.mat[perm]
            H = np.diag(np.diag(mdl.H.mat.mat)[perm])
            mdl2 = sk.StateSpaceModel(H=H, Z=Z, T=mdl.T, R=mdl.R, Q=mdl.Q,
                                      c=mdl.c, a1=mdl.a1, P1=mdl.P1)
            r1 = sk.kalman_filter(y, mdl)
            r2 = sk.kalman_filter(y[perm], mdl2)
            assert np.allclose(r1.a[:, -1], r2.a[:, -1], atol=1e-10)
            assert np.allclose(r1.P[:, :, -1], r2.P[:, :, -1], atol=1e-10)
            assert r1.loglik == pytest.approx(r2.loglik, abs=1e-10)


class TestDiffuse:
    def test_post_d_matches_kappa_run(self):
        rng = np.random.default_rng(5)
        for _ in range(10):
            mdl = random_model(rng, diffuse=1)
            n = 8
            y = random_data(rng, mdl, n)
            res = sk.kalman_filter(y, mdl)
            P1k = mdl.P1.mat.copy()
            dg = np.isinf(np.diag(P1k))
            P1k[np.isinf(P1k)] = 0
            np.fill_diagonal(P1k, np.where(dg, 1e7, np.diag(P1k)))
            mk = sk.StateSpaceModel(H=mdl.H, Z=mdl.Z, T=mdl.T, R=mdl.R, Q=mdl.Q,
                                    c=mdl.c, a1=mdl.a1, P1=P1k)
            rk = sk.kalman_filter(y, mk)
            for t in range(res.d + 1, n):
                assert np.allclose(res.a[:, t], rk.a[:, t], atol=1e-3)

    def test_d_equals_diffuse_count_univariate(self):
        rng = np.random.default_rng(6)
        for q in (1, 2, 3):
            mdl = random_model(rng, m_max=3, p_max=1, diffuse=q)
            while mdl.m < q or mdl.p != 1:
                mdl = random_model(rng, m_max=3, p_max=1, diffuse=q)
            y = random_data(rng, mdl, 8, gen_kappa=1.0)
            res = sk.kalman_filter(y, mdl)
            assert res.d == q

    def test_pinf_zero_after_d(self):
        mdl = llm(P1=np.inf)
        res = sk.kalman_filter(np.array([[1.0, 2.0, 3.0]]), mdl)
        assert res.Pinf.shape[2] == res.d + 1
        assert np.all(res.Pinf[:, :, res.d] == 0.0)


class TestForecast:
    def test_deterministic_model(self):
        mdl = sk.StateSpaceModel(H=[[0.0]], Z=[[1.0]], T=[[1.0]], R=[[1.0]],
                                 Q=[[0.0]], a1=[[5.0]], P1=[[0.0]])
        pts, var = sk.forecast(np.array([[5.0, 5.0]]), mdl, 3)
        assert np.allclose(pts, 5.0)
        assert np.allclose(var, 0.0)

    def test_random_walk_variance_accumulation(self):
        mdl = sk.StateSpaceModel(H=[[0.0]], Z=[[1.0]], T=[[1.0]], R=[[1.0]],
                                 Q=[[1.0]], a1=[[0.0]], P1=[[np.inf]])
        pts, var = sk.forecast(np.array([[1.0]]), mdl, 2)
        assert np.allclose(pts, [[1.0, 1.0]])
        assert var[0, 0, 0] == pytest.approx(1.0)
        assert var[0, 0, 1] == pytest.approx(2.0)

    def test_h_must_be_positive(self):
        with pytest.raises(ValueError):
            sk.forecast(np.array([[1.0]]), llm(), 0)
