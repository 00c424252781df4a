import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ssmkit.params import DomainError, ParamSet, ar_to_pacf, pacf_to_ar


def test_half_log_anchors():
    ps = ParamSet.simple(["sigma2"], "1/2 log", [1.0])
    assert ps.psi[0] == pytest.approx(0.0)
    assert ps.with_psi([0.5]).values[0] == pytest.approx(np.e)


def test_df_transform():
    ps = ParamSet.simple(["nu"], "df", [4.0])
    assert ps.with_psi(ps.psi).values[0] == pytest.approx(4.0, rel=1e-12)
    with pytest.raises(DomainError):
        ParamSet.simple(["nu"], "df", [1.5]).psi


def test_arma_degree_one():
    ps = ParamSet(("phi",), np.array([0.0]), ((1, "arma"),))
    assert ps.with_psi([0.0]).values[0] == pytest.approx(0.0)
    ps2 = ParamSet(("phi",), np.array([0.5]), ((1, "arma"),))
    assert ps2.with_psi(ps2.psi).values[0] == pytest.approx(0.5, abs=1e-12)


def test_arma_out_of_domain():
    with pytest.raises(DomainError):
        ParamSet(("phi",), np.array([1.2]), ((1, "arma"),)).psi


@given(st.integers(0, 2**32 - 1), st.integers(1, 5))
@settings(max_examples=100, deadline=None)
def test_arma_roundtrip_random(seed, deg):
    rng = np.random.default_rng(seed)
    pac = np.tanh(rng.normal(size=deg))
    coef = pacf_to_ar(pac)
    assert np.allclose(ar_to_pacf(coef), pac, atol=1e-10)
    # resulting polynomial 1 - a1 z - ... has all roots outside the unit circle
    roots = np.roots(np.concatenate([[1.0], -coef])[::-1])
    assert np.all(np.abs(roots) > 1.0 - 1e-9)


TRANSFORM_DOMAIN = {
    "1/2 log": lambda rng, k: rng.random(k) * 5 + 1e-3,
    "log": lambda rng, k: rng.random(k) * 5 + 1e-3,
    "identity": lambda rng, k: rng.normal(size=k) * 10,
    "df": lambda rng, k: 2.0 + rng.random(k) * 30 + 1e-3,
    "logit01": lambda rng, k: rng.random(k) * 0.98 + 0.01,
    "logit0pi": lambda rng, k: (rng.random(k) * 0.98 + 0.01) * np.pi,
    "arma": lambda rng, k: pacf_to_ar(np.tanh(rng.normal(size=k))),
}


@pytest.mark.parametrize("code", sorted(TRANSFORM_DOMAIN))
def test_roundtrip_100_random_points(code):
    rng = np.random.default_rng(hash(code) % 2**32)
    for _ in range(100):
        k = int(rng.integers(1, 4))
        vals = TRANSFORM_DOMAIN[code](rng, k)
        ps = ParamSet(tuple(f"x{i}" for i in range(k)), vals, ((k, code),))
        back = ps.with_psi(ps.psi).values
        assert np.all(np.abs(back - vals) <= 1e-12 * np.maximum(1.0, np.abs(vals)))


def test_cov_roundtrip():
    # packed order: p variances then covariances column-major; for p <= 3
    # that equals np.tril_indices order
    rng = np.random.default_rng(7)
    for p in (1, 2, 3):
        B = rng.normal(size=(p, p))
        S = B @ B.T + 0.1 * np.eye(p)
        vals = np.concatenate([np.diag(S), S[np.tril_indices(p, -1)]])
        k = p * (p + 1) // 2
        ps = ParamSet(tuple(f"v{i}" for i in range(k)), vals, ((k, "cov"),))
        back = ps.with_psi(ps.psi).values
        assert np.allclose(back, vals, rtol=1e-10)
        with pytest.raises(DomainError):
            bad = vals.copy()
            bad[-1] = 100.0 if p > 1 else -1.0
            ParamSet(tuple(f"v{i}" for i in range(k)), bad, ((k, "cov"),)).psi


def test_concat_masks_partition():
    a = ParamSet.simple(["epsilon var"], "1/2 log", [1.0])
    b = ParamSet.simple(["epsilon var", "rho"], "identity", [2.0, 3.0])
    combined, masks = ParamSet.concat([a, b])
    assert combined.w == 3
    total = np.zeros(3, dtype=int)
    for msk in masks:
        total += msk.astype(int)
    assert np.all(total == 1)
    assert combined.names[0] == "epsilon var (1)"
    assert combined.names[1] == "epsilon var (2)"
    assert combined.names[2] == "rho"
