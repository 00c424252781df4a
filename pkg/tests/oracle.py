"""Independent dense-Gaussian oracle used to check filters and smoothers.

Everything is computed from the joint normal distribution of the stacked
basis vector u = [alpha_1, eta_1..eta_{n-1}, eps_1..eps_n]: states and
observations are affine in u, so any conditional moment follows from plain
normal conditioning.  Deliberately brute force and independent of the
recursive implementations it validates.
"""

from __future__ import annotations

import numpy as np


class DenseOracle:
    def __init__(self, model, n, kappa=None):
        p, m, r = model.p, model.m, model.r
        Z = model.Z.realize(n)
        T = model.T.realize(n)
        R = model.R.realize(n)
        Q = model.Q.mat.realize(n)
        H = model.H.mat.realize(n)
        c = model.c.realize(n)[:, :, 0]
        at = lambda A, t: A[t if A.shape[0] > 1 else 0]

        P1 = model.P1.mat.copy()
        if np.isinf(P1).any():
            if kappa is None:
                raise ValueError("oracle needs kappa for diffuse models")
            dif = np.isinf(np.diag(P1))
            P1[np.isinf(P1)] = 0.0
            np.fill_diagonal(P1, np.where(dif, kappa, np.diag(P1)))

        self.p, self.m, self.r, self.n = p, m, r, n
        ku = m + (n - 1) * r + n * p
        self.cov_u = np.zeros((ku, ku))
        self.cov_u[:m, :m] = P1
        pos = m
        self.eta_pos = []
        for t in range(n - 1):
            self.cov_u[pos : pos + r, pos : pos + r] = at(Q, t)
            self.eta_pos.append(pos)
            pos += r
        self.eps_pos = []
        for t in range(n):
            self.cov_u[pos : pos + p, pos : pos + p] = at(H, t)
            self.eps_pos.append(pos)
            pos += p

        # alpha_t = A[t] u + b[t]
        self.A = np.zeros((n, m, ku))
        self.b = np.zeros((n, m))
        self.A[0, :, :m] = np.eye(m)
        self.b[0] = model.a1.mat[:, 0]
        for t in range(n - 1):
            self.A[t + 1] = at(T, t) @ self.A[t]
            self.A[t + 1, :, self.eta_pos[t] : self.eta_pos[t] + r] += at(R, t)
            self.b[t + 1] = at(T, t) @ self.b[t] + c[t if c.shape[0] > 1 else 0]
        # y_t rows = C[t] u + dvec[t]
        self.C = np.zeros((n, p, ku))
        self.dvec = np.zeros((n, p))
        for t in range(n):
            self.C[t] = at(Z, t) @ self.A[t]
            self.C[t, :, self.eps_pos[t] : self.eps_pos[t] + p] += np.eye(p)
            self.dvec[t] = at(Z, t) @ self.b[t]
        self._Qlast = at(Q, n - 1).copy()

    # -- helpers -----------------------------------------------------------
    def _obs_rows(self, y, upto=None, upto_elem=None):
        """Stacked (coef, const, value) for observed scalars in time order.

        ``upto`` limits to times < upto; ``upto_elem`` = (t, i) additionally
        includes elements of time t before row i.
        """
        rows, consts, vals = [], [], []
        n = self.n
        for t in range(n):
            if upto is not None and t >= upto and upto_elem is None:
                break
            for i in range(self.p):
                if upto_elem is not None:
                    te, ie = upto_elem
                    if t > te or (t == te and i >= ie):
                        return np.array(rows).reshape(-1, self.cov_u.shape[0]), np.array(consts), np.array(vals)
                elif upto is not None and t >= upto:
                    return np.array(rows).reshape(-1, self.cov_u.shape[0]), np.array(consts), np.array(vals)
                if np.isnan(y[i, t]):
                    continue
                rows.append(self.C[t, i])
                consts.append(self.dvec[t, i])
                vals.append(y[i, t])
        return np.array(rows).reshape(-1, self.cov_u.shape[0]), np.array(consts), np.array(vals)

    def _condition(self, Atar, btar, y, upto=None, upto_elem=None):
        """E and Var of target = Atar u + btar given observed scalars."""
        C, dc, vals = self._obs_rows(y, upto, upto_elem)
        mean0 = btar
        var0 = Atar @ self.cov_u @ Atar.T
        if C.shape[0] == 0:
            return mean0, var0
        S = C @ self.cov_u @ C.T
        X = Atar @ self.cov_u @ C.T
        sol = np.linalg.solve(S, (vals - dc))
        mean = mean0 + X @ sol
        var = var0 - X @ np.linalg.solve(S, X.T)
        return mean, var

    # -- oracle quantities ---------------------------------------------------
    def loglik(self, y):
        C, dc, vals = self._obs_rows(y)
        if C.shape[0] == 0:
            return 0.0
        S = C @ self.cov_u @ C.T
        resid = vals - dc
        sign, logdet = np.linalg.slogdet(S)
        return float(
            -0.5 * (len(vals) * np.log(2 * np.pi) + logdet + resid @ np.linalg.solve(S, resid))
        )

    def predicted(self, y, t):
        """E, Var of alpha_t given observations before time t."""
        return self._condition(self.A[t], self.b[t], y, upto=t)

    def innovations(self, y):
        """Sequential scalar innovations and variances in processing order."""
        out = []
        for t in range(self.n):
            for i in range(self.p):
                if np.isnan(y[i, t]):
                    continue
                mean, var = self._condition(
                    self.C[t, i : i + 1], self.dvec[t, i : i + 1], y, upto_elem=(t, i)
                )
                out.append((t, i, y[i, t] - mean[0], var[0, 0]))
        return out

    def smoothed(self, y, t):
        return self._condition(self.A[t], self.b[t], y)

    def smoothed_eps(self, y, t):
        A = np.zeros((self.p, self.cov_u.shape[0]))
        A[:, self.eps_pos[t] : self.eps_pos[t] + self.p] = np.eye(self.p)
        return self._condition(A, np.zeros(self.p), y)

    def smoothed_eta(self, y, t):
        if t >= self.n - 1:
            # eta_n never touches an observation: unconditional moments
            return np.zeros(self.r), self._Qlast
        A = np.zeros((self.r, self.cov_u.shape[0]))
        A[:, self.eta_pos[t] : self.eta_pos[t] + self.r] = np.eye(self.r)
        return self._condition(A, np.zeros(self.r), y)


def poisson_grid_loglik(y, q_level, grid_halfwidth=12.0, gridsize=1201):
    """Flat-prior local-level Poisson loglikelihood by grid integration.

    Forward HMM-style integration over a dense state grid; the level prior
    is flat (improper), so the result matches the exact-diffuse convention
    after subtracting log(2 pi)/2.
    """
    from scipy.special import gammaln

    y = np.asarray(y, dtype=float).ravel()
    n = y.size
    center = np.log(np.mean(y) + 0.5)
    lo = center - grid_halfwidth
    hi = center + grid_halfwidth
    grid = np.linspace(lo, hi, gridsize)
    dx = grid[1] - grid[0]

    def logpois(yt, theta):
        return yt * theta - np.exp(theta) - gammaln(yt + 1.0)

    # transition kernel matrix K[i,j] = N(grid_i; grid_j, q) * dx
    D2 = (grid[:, None] - grid[None, :]) ** 2
    logK = -0.5 * (np.log(2 * np.pi * q_level) + D2 / q_level) + np.log(dx)

    logf = logpois(y[0], grid)  # flat prior: density 1
    for t in range(1, n):
        mx = logf.max()
        f = np.exp(logf - mx)
        logf = np.log(np.exp(logK) @ f + 1e-300) + mx + logpois(y[t], grid)
    mx = logf.max()
    return float(mx + np.log(np.sum(np.exp(logf - mx)) * dx))
