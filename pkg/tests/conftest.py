import os

import numpy as np
import pytest

FIXDIR = os.path.join(os.path.dirname(__file__), "fixtures")


def fixture_path(name):
    return os.path.join(FIXDIR, name)


def load_fixture(name):
    """Fixture CSV as a float array (rows of the file = time), or skip."""
    path = fixture_path(name)
    if not os.path.exists(path):
        pytest.skip(f"fixture dataset {name} not bundled")
    return np.genfromtxt(path, delimiter=",", names=True)


def random_model(rng, m_max=3, p_max=2, diag_h=None, diffuse=0, with_c=True):
    """Random small Gaussian model for oracle sweeps."""
    import ssmkit as sk

    m = rng.integers(1, m_max + 1)
    p = rng.integers(1, p_max + 1)
    r = rng.integers(1, m + 1)
    Z = rng.normal(size=(p, m))
    T = rng.normal(size=(m, m))
    T *= 0.7 / max(1.0, np.max(np.abs(np.linalg.eigvals(T))))
    R = rng.normal(size=(m, r))
    B = rng.normal(size=(r, r))
    Q = B @ B.T + 0.1 * np.eye(r)
    if diag_h is None:
        diag_h = rng.random() < 0.5
    if diag_h:
        H = np.diag(rng.random(p) + 0.2)
    else:
        B = rng.normal(size=(p, p))
        H = B @ B.T + 0.2 * np.eye(p)
    c = rng.normal(size=(m, 1)) if with_c else np.zeros((m, 1))
    a1 = rng.normal(size=(m, 1))
    B = rng.normal(size=(m, m))
    P1 = B @ B.T + 0.1 * np.eye(m)
    if diffuse:
        q = min(diffuse, m)
        idx = rng.permutation(m)[:q]
        P1[idx, :] = 0.0
        P1[:, idx] = 0.0
        P1[idx, idx] = np.inf
        a1[idx] = 0.0
    return sk.StateSpaceModel(H=H, Z=Z, T=T, R=R, Q=Q, c=c, a1=a1, P1=P1)


def random_data(rng, model, n, missing_frac=0.0, gen_kappa=None):
    import ssmkit as sk

    kw = {} if gen_kappa is None else {"diffuse_kappa": gen_kappa}
    y, _, _, _ = sk.sample(model, n, 1, seed=int(rng.integers(1 << 30)), **kw)
    y = y[:, :, 0]
    if missing_frac > 0:
        mask = rng.random(y.shape) < missing_frac
        y = y.copy()
        y[mask] = np.nan
    return y
