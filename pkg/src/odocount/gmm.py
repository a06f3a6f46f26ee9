"""Diagonal-covariance Gaussian mixtures fitted by EM with k-means++ init.

Owning the EM loop (rather than delegating to a library) keeps the
per-iteration log-likelihood trace available: training monotonicity is an
asserted property of both the duration prior and the HMM observation models.
Variance floors are applied as a constrained M-step, which preserves the EM
monotonicity guarantee.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

_LOG_2PI = np.log(2.0 * np.pi)


@dataclass
class DiagonalGMM:
    weights: np.ndarray    # [k]
    means: np.ndarray      # [k, d]
    variances: np.ndarray  # [k, d]
    loglik_trace: np.ndarray = field(default_factory=lambda: np.empty(0))

    @property
    def n_components(self):
        return len(self.weights)

    def component_loglik(self, X):
        """log N(x; mean_k, diag var_k) for every (sample, component)."""
        X = np.asarray(X, dtype=np.float64)
        inv = 1.0 / self.variances
        const = -0.5 * (X.shape[1] * _LOG_2PI + np.sum(np.log(self.variances), axis=1)
                        + np.sum(self.means ** 2 * inv, axis=1))
        return const + (X @ (self.means * inv).T) - 0.5 * ((X ** 2) @ inv.T)

    def loglik(self, X):
        """Per-sample mixture log density."""
        with np.errstate(divide="ignore"):
            logw = np.log(self.weights)
        return logsumexp(self.component_loglik(X) + logw, axis=1)


def _kmeanspp_centers(X, k, rng):
    n = len(X)
    centers = np.empty((k, X.shape[1]), dtype=np.float64)
    centers[0] = X[rng.integers(n)]
    d2 = np.sum((X - centers[0]) ** 2, axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total > 0:
            idx = rng.choice(n, p=d2 / total)
        else:
            idx = rng.integers(n)
        centers[j] = X[idx]
        np.minimum(d2, np.sum((X - centers[j]) ** 2, axis=1), out=d2)
    return centers


def fit_diagonal_gmm(X, n_components, seed=0, var_floor=1e-6, max_iter=100, tol=1e-8):
    """EM to convergence (log-likelihood gain < tol) or max_iter iterations.

    ``seed`` may be an int or anything ``np.random.default_rng`` accepts.
    Deterministic given the seed. The fitted model carries the per-iteration
    total log-likelihood in ``loglik_trace``.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("X must be 2-D [samples, dims]")
    n, d = X.shape
    if n < 1:
        raise ValueError("cannot fit a mixture on zero samples")
    k = min(n_components, n)
    rng = np.random.default_rng(seed)

    means = _kmeanspp_centers(X, k, rng)
    variances = np.tile(np.maximum(X.var(axis=0), var_floor), (k, 1))
    weights = np.full(k, 1.0 / k)

    trace = []
    prev_ll = -np.inf
    model = DiagonalGMM(weights=weights, means=means, variances=variances)
    for _ in range(max_iter):
        with np.errstate(divide="ignore"):
            joint = model.component_loglik(X) + np.log(model.weights)
        per_sample = logsumexp(joint, axis=1)
        ll = float(np.sum(per_sample))
        trace.append(ll)
        if ll - prev_ll < tol and np.isfinite(prev_ll):
            break
        prev_ll = ll

        resp = np.exp(joint - per_sample[:, None])
        nk = resp.sum(axis=0)
        nk_safe = np.maximum(nk, 1e-300)
        model.weights = nk / n
        model.means = (resp.T @ X) / nk_safe[:, None]
        ex2 = (resp.T @ (X * X)) / nk_safe[:, None]
        model.variances = np.maximum(ex2 - model.means ** 2, var_floor)

    model.loglik_trace = np.asarray(trace)
    return model
