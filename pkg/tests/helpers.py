"""Test helpers: random monotone data and a direct restricted log-likelihood."""

import numpy as np

from mmrm.data import MonotoneDataset


def random_monotone(rng, n=40, p=4, qstar=1, retention=(1.0, 0.9, 0.8, 0.7)):
    """Unstructured-covariance monotone data with arbitrary covariates."""
    A = rng.standard_normal((p, p))
    sigma = A @ A.T + p * np.eye(p)
    y = rng.standard_normal((n, p)) @ np.linalg.cholesky(sigma).T
    cov = rng.standard_normal((n, qstar))
    group = np.arange(n) % 2
    y += 1.0 + cov.sum(axis=1, keepdims=True) + 2.0 * group[:, None]
    ret = np.asarray(retention[:p])
    u = rng.random(n)
    r = (u[:, None] < ret).sum(axis=1)
    r[:p + qstar + 4] = p  # enough rows at every visit
    observed = np.arange(p) < r[:, None]
    return MonotoneDataset.from_arrays(y, observed, group, cov)


def stacked_design(data):
    """Per-subject W_i (r_i x pq) and observed outcome vectors."""
    p, q = data.p, data.q
    out = []
    for i in range(data.n):
        r = int(data.pattern[i])
        if r == 0:
            continue
        W = np.zeros((r, p * q))
        for j in range(r):
            W[j, j * q:(j + 1) * q] = data.design[i]
        out.append((W, data.y[i, :r]))
    return out


def direct_restricted_loglik(data, sigma):
    """ell_r = -1/2 [sum log|S_ri| + log|W'S^-1 W| + y'S^-1 y - b' (W'S^-1 W)^-1 b]."""
    p, q = data.p, data.q
    A = np.zeros((p * q, p * q))
    b = np.zeros(p * q)
    logdet = 0.0
    quad = 0.0
    for W, y in stacked_design(data):
        r = y.shape[0]
        Si = np.linalg.inv(sigma[:r, :r])
        logdet += np.linalg.slogdet(sigma[:r, :r])[1]
        A += W.T @ Si @ W
        b += W.T @ Si @ y
        quad += y @ Si @ y
    sign, ld = np.linalg.slogdet(A)
    return -0.5 * (logdet + ld + quad - b @ np.linalg.solve(A, b)), A
