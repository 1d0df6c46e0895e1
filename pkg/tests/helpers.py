"""Shared dataset builders and brute-force oracles for the test suite."""

import numpy as np

from jointvct.datamodel import Dataset


def make_dataset(seed, n=200, p=10, n_cases=None, delta=1.0, n_cov=0, maf=0.3):
    """Random genotypes (binomial dosages), expression with eQTL strength ``delta``
    on the first SNP and a fixed case/control split (first ``n_cases`` are cases)."""
    rng = np.random.default_rng(seed)
    n_cases = n // 2 if n_cases is None else n_cases
    s = rng.binomial(2, maf, size=(n, p)).astype(float)
    for j in np.flatnonzero(np.ptp(s, axis=0) == 0):
        s[0, j] = 1.0 - s[0, j] if s[0, j] < 2 else 1.0
    g = delta * s[:, 0] + rng.normal(0, 1.2, size=n)
    y = np.zeros(n)
    y[:n_cases] = 1.0
    x = None
    if n_cov:
        x = np.column_stack([np.ones(n), rng.normal(size=(n, n_cov))])
    return Dataset(y, s, g, x)


def brute_k(mu):
    n = len(mu)
    k = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            if i == j:
                m = mu[i]
                k[i, j] = -4 * m**4 + 8 * m**3 - 5 * m**2 + m
            else:
                k[i, j] = 2 * mu[i] * (1 - mu[i]) * mu[j] * (1 - mu[j])
    return k


def brute_variance_term(z, mu):
    z = np.asarray(z, float)
    if z.ndim == 1:
        z = z[:, None]
    zz = z @ z.T
    return float(np.ones(len(mu)) @ (zz * brute_k(mu) * zz) @ np.ones(len(mu)))


def newton_logistic(design, y, iters=100):
    """Plain Newton-Raphson without safeguards; oracle for the library fit."""
    beta = np.zeros(design.shape[1])
    for _ in range(iters):
        mu = 1.0 / (1.0 + np.exp(-design @ beta))
        h = design.T @ (design * (mu * (1 - mu))[:, None])
        beta = beta + np.linalg.solve(h, design.T @ (y - mu))
    return beta
