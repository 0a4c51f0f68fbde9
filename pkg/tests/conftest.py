"""Shared oracles and instance generators for the test suite.

Everything here is implemented independently of the package internals:
values are recomputed row by row, trees are enumerated explicitly, and
linear algebra uses dense solves.
"""

from __future__ import annotations

import numpy as np
import pytest
from scipy.spatial.distance import cdist


# ---------------------------------------------------------------------------
# Naive value oracles


def loop_value_weighted(X, gamma, lam, assignments):
    """Per-row weighted value by direct summation."""
    n = gamma.shape[0]
    total = 0.0
    for i in range(n):
        total += float(np.dot(lam, gamma[i, assignments[i], :]))
    return total / n


def rowsum_for_assignment(gamma, lam, assignments):
    """Sum over rows of the weighted chosen-treatment score."""
    n = gamma.shape[0]
    rows = gamma[np.arange(n), assignments, :] @ np.asarray(lam, dtype=float)
    return float(rows.sum())


# ---------------------------------------------------------------------------
# Brute-force tree enumeration oracle


def _midpoints(col):
    vals = np.unique(col)
    return 0.5 * (vals[:-1] + vals[1:])


def enumerate_assignments_depth1(X, d):
    """Assignment vectors of every depth<=1 tree over the full rows."""
    n, p = X.shape
    assigns = [np.full(n, a) for a in range(d)]
    for j in range(p):
        for t in _midpoints(X[:, j]):
            left = X[:, j] <= t
            for la in range(d):
                for lb in range(d):
                    a = np.where(left, la, lb)
                    assigns.append(a)
    return assigns


def brute_force_best_value(X, gamma, lam, depth):
    """Max weighted value over every axis-aligned tree of depth <= depth.

    Explicit enumeration: every (top split, left subtree, right subtree)
    combination is evaluated; no dynamic-programming shortcuts beyond
    evaluating all left x right sums with an outer add.
    """
    n, d, _ = gamma.shape
    lam = np.asarray(lam, dtype=float)
    options = enumerate_assignments_depth1(X, d)
    best = max(rowsum_for_assignment(gamma, lam, a) for a in options)
    if depth >= 2:
        rowvals = gamma[np.arange(n)[:, None], np.stack(options, axis=1), :] @ lam
        # rowvals[i, o] = weighted score of row i under option o
        for j in range(X.shape[1]):
            for t in _midpoints(X[:, j]):
                left = X[:, j] <= t
                left_sums = rowvals[left].sum(axis=0)
                right_sums = rowvals[~left].sum(axis=0)
                combo = np.add.outer(left_sums, right_sums)
                best = max(best, float(combo.max()))
    return best / n


def random_integer_instance(rng, n_max=12, p_max=2, d=2, n_outcomes=2):
    """Random instance with integer scores so all value sums are exact."""
    n = int(rng.integers(4, n_max + 1))
    p = int(rng.integers(1, p_max + 1))
    X = rng.integers(0, 6, size=(n, p)).astype(float)
    gamma = rng.integers(-8, 9, size=(n, d, n_outcomes)).astype(float)
    return X, gamma


# ---------------------------------------------------------------------------
# Pareto oracles


def pairwise_nondominated(values):
    """O(n^2) non-dominated filter by direct pairwise comparison."""
    V = np.asarray(values, dtype=float)
    keep = []
    for i in range(V.shape[0]):
        dominated = False
        for j in range(V.shape[0]):
            if i == j:
                continue
            if np.all(V[j] >= V[i]) and np.any(V[j] > V[i]):
                dominated = True
                break
        if not dominated:
            keep.append(i)
    return keep


def mc_hypervolume(values, ref, n_samples, seed, chunk=2_000_000):
    """Monte-Carlo hypervolume estimate and its standard error."""
    V = np.asarray(values, dtype=float)
    ref = np.asarray(ref, dtype=float)
    hi = V.max(axis=0)
    box = float(np.prod(hi - ref))
    rng = np.random.default_rng(seed)
    hits = 0
    done = 0
    while done < n_samples:
        m = min(chunk, n_samples - done)
        u = ref + rng.random((m, ref.size)) * (hi - ref)
        dominated = np.any(np.all(u[:, None, :] <= V[None, :, :], axis=2), axis=1)
        hits += int(dominated.sum())
        done += m
    p = hits / n_samples
    se = box * np.sqrt(max(p * (1.0 - p), 1e-12) / n_samples)
    return box * p, se


# ---------------------------------------------------------------------------
# GP dense-solve oracle


def oracle_matern52(Z1, Z2, lengthscales, signal_variance):
    r = cdist(Z1 / lengthscales, Z2 / lengthscales)
    s = np.sqrt(5.0) * r
    return signal_variance * (1.0 + s + s**2 / 3.0) * np.exp(-s)


def oracle_gp_posterior(Z, y_raw, ses, mean, scale, lengthscales, signal_variance,
                        jitter, Zp):
    """Raw-unit posterior by one dense linear solve."""
    t = (np.asarray(y_raw, dtype=float) - mean) / scale
    noise = (np.asarray(ses, dtype=float) / scale) ** 2
    K = oracle_matern52(Z, Z, lengthscales, signal_variance)
    K = K + np.diag(noise) + jitter * np.eye(Z.shape[0])
    Ks = oracle_matern52(Z, Zp, lengthscales, signal_variance)
    Kss = oracle_matern52(Zp, Zp, lengthscales, signal_variance)
    Kinv_t = np.linalg.solve(K, t)
    mean_p = mean + scale * (Ks.T @ Kinv_t)
    cov_p = scale**2 * (Kss - Ks.T @ np.linalg.solve(K, Ks))
    return mean_p, cov_p


# ---------------------------------------------------------------------------
# EHVI quadrature oracle (2 objectives, single-point frontier)


def quadrature_ehvi_single_point(mu, sd, frontier_pt, ref, n_nodes=240, width=8.0):
    """Expected exclusive hypervolume of a bivariate independent Gaussian
    candidate over a one-point frontier, by Gauss-Legendre quadrature."""
    mu = np.asarray(mu, dtype=float)
    sd = np.asarray(sd, dtype=float)
    f = np.asarray(frontier_pt, dtype=float)
    r = np.asarray(ref, dtype=float)
    nodes, weights = np.polynomial.legendre.leggauss(n_nodes)

    def axis(k):
        lo, hi = mu[k] - width * sd[k], mu[k] + width * sd[k]
        x = 0.5 * (hi - lo) * nodes + 0.5 * (hi + lo)
        w = 0.5 * (hi - lo) * weights
        dens = np.exp(-0.5 * ((x - mu[k]) / sd[k]) ** 2) / (sd[k] * np.sqrt(2 * np.pi))
        return x, w * dens

    x0, w0 = axis(0)
    x1, w1 = axis(1)
    Y0, Y1 = np.meshgrid(x0, x1, indexing="ij")
    own = np.clip(Y0 - r[0], 0.0, None) * np.clip(Y1 - r[1], 0.0, None)
    overlap = np.clip(np.minimum(Y0, f[0]) - r[0], 0.0, None) * np.clip(
        np.minimum(Y1, f[1]) - r[1], 0.0, None
    )
    hvi = np.clip(own - overlap, 0.0, None)
    return float(w0 @ hvi @ w1)


@pytest.fixture
def rng():
    return np.random.default_rng(20260823)
