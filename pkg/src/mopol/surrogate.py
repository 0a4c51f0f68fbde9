"""Per-outcome Gaussian-process surrogates over the weight simplex.

Each outcome gets an independent Matern-5/2 GP on simplex coordinates
(the first N_y - 1 weight components) with fixed per-point observation
noise taken from bootstrap SEs. Kernel hyperparameters maximize the
marginal likelihood from a fixed grid of starts, so fitting is
deterministic.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import optimize
from scipy.linalg import cho_solve, cholesky, solve_triangular
from scipy.stats import qmc

from .errors import ValidationError
from .pareto import WeightVector, as_weight_vector

_LS_BOUNDS = (1e-3, 10.0)
_SV_BOUNDS = (1e-6, 10.0)
_JITTERS = tuple(10.0 ** (-k) for k in range(10, 3, -1))  # 1e-10 .. 1e-4
_START_GRID = [(ls, sv) for ls in (0.1, 0.3, 1.0) for sv in (0.5, 2.0)]


def matern52(Z1: np.ndarray, Z2: np.ndarray, lengthscales, signal_variance: float) -> np.ndarray:
    ls = np.asarray(lengthscales, dtype=float)
    diff = (Z1[:, None, :] - Z2[None, :, :]) / ls
    r = np.sqrt(np.sum(diff * diff, axis=2))
    sq5r = math.sqrt(5.0) * r
    return signal_variance * (1.0 + sq5r + sq5r * sq5r / 3.0) * np.exp(-sq5r)


@dataclass
class GPOutcome:
    """Fitted single-outcome GP in standardized target units."""

    inputs: np.ndarray  # (n, D) simplex coordinates
    targets: np.ndarray  # (n,) standardized
    noise: np.ndarray  # (n,) standardized noise variances
    mean: float  # raw target mean
    scale: float  # raw target sd
    lengthscales: np.ndarray
    signal_variance: float
    chol: np.ndarray
    alpha: np.ndarray
    jitter: float

    @property
    def signal_variance_raw(self) -> float:
        return self.signal_variance * self.scale**2


@dataclass
class GPModel:
    outcomes: list
    input_dim: int

    @property
    def n_outcomes(self) -> int:
        return len(self.outcomes)

    @property
    def train_inputs(self) -> np.ndarray:
        return self.outcomes[0].inputs

    def fixed_hyperparams(self) -> list:
        """Snapshot usable to refit on new data without re-optimizing."""
        return [
            {
                "lengthscales": gp.lengthscales.copy(),
                "signal_variance": gp.signal_variance,
                "mean": gp.mean,
                "scale": gp.scale,
            }
            for gp in self.outcomes
        ]


def _chol_with_jitter(K: np.ndarray):
    for jitter in _JITTERS:
        try:
            L = cholesky(K + jitter * np.eye(K.shape[0]), lower=True)
            return L, jitter
        except np.linalg.LinAlgError:
            continue
    raise ValidationError("kernel matrix is not positive definite even at jitter 1e-4")


def _nll(log_params: np.ndarray, Z: np.ndarray, t: np.ndarray, noise: np.ndarray) -> float:
    D = Z.shape[1]
    ls = np.exp(log_params[:D])
    sv = float(np.exp(log_params[D]))
    K = matern52(Z, Z, ls, sv) + np.diag(noise) + 1e-10 * np.eye(Z.shape[0])
    try:
        L = cholesky(K, lower=True)
    except np.linalg.LinAlgError:
        return 1e25
    alpha = cho_solve((L, True), t)
    return float(0.5 * t @ alpha + np.sum(np.log(np.diag(L))))


def _fit_outcome(Z, v, noise_raw, hyperparams=None) -> GPOutcome:
    if hyperparams is None:
        mu = float(np.mean(v))
        scale = float(np.std(v))
        if scale < 1e-12:
            scale = 1.0
    else:
        mu = float(hyperparams["mean"])
        scale = float(hyperparams["scale"])
    t = (v - mu) / scale
    noise = noise_raw / scale**2

    D = Z.shape[1]
    if hyperparams is None:
        bounds = [tuple(np.log(_LS_BOUNDS))] * D + [tuple(np.log(_SV_BOUNDS))]
        best = None
        for ls0, sv0 in _START_GRID:
            x0 = np.log(np.array([ls0] * D + [sv0]))
            res = optimize.minimize(
                _nll, x0, args=(Z, t, noise), method="L-BFGS-B", bounds=bounds
            )
            if best is None or res.fun < best.fun:
                best = res
        ls = np.exp(best.x[:D])
        sv = float(np.exp(best.x[D]))
    else:
        ls = np.asarray(hyperparams["lengthscales"], dtype=float)
        sv = float(hyperparams["signal_variance"])

    K = matern52(Z, Z, ls, sv) + np.diag(noise)
    L, jitter = _chol_with_jitter(K)
    alpha = cho_solve((L, True), t)
    return GPOutcome(
        inputs=Z,
        targets=t,
        noise=noise,
        mean=mu,
        scale=scale,
        lengthscales=ls,
        signal_variance=sv,
        chol=L,
        alpha=alpha,
        jitter=jitter,
    )


def _coords(lam) -> np.ndarray:
    return as_weight_vector(lam).simplex_coords


def gp_fit(observations, hyperparams=None) -> GPModel:
    """Fit one GP per outcome to (weights, values, SEs) observations.

    ``hyperparams`` (from :meth:`GPModel.fixed_hyperparams`) skips the
    marginal-likelihood optimization, reusing a previous fit's kernel.
    """
    obs = list(observations)
    if len(obs) < 2:
        raise ValidationError("need at least 2 observations to fit a GP")
    Z = np.array([_coords(lam) for lam, _, _ in obs])
    values = np.array([np.asarray(v, dtype=float) for _, v, _ in obs])
    ses = np.array([np.asarray(s, dtype=float) for _, _, s in obs])
    if values.ndim != 2 or ses.shape != values.shape:
        raise ValidationError("values and SEs must be equal-shape per-outcome vectors")
    n_outcomes = values.shape[1]
    fitted = []
    for y in range(n_outcomes):
        hp = None if hyperparams is None else hyperparams[y]
        fitted.append(_fit_outcome(Z, values[:, y], ses[:, y] ** 2, hp))
    return GPModel(outcomes=fitted, input_dim=Z.shape[1])


def posterior_at_coords(model: GPModel, Zp: np.ndarray):
    """Exact posterior (mean, covariance) per outcome at coordinate rows."""
    Zp = np.atleast_2d(np.asarray(Zp, dtype=float))
    results = []
    for gp in model.outcomes:
        Ks = matern52(gp.inputs, Zp, gp.lengthscales, gp.signal_variance)
        Kss = matern52(Zp, Zp, gp.lengthscales, gp.signal_variance)
        mean = gp.mean + gp.scale * (Ks.T @ gp.alpha)
        v = solve_triangular(gp.chol, Ks, lower=True)
        cov = gp.scale**2 * (Kss - v.T @ v)
        cov = 0.5 * (cov + cov.T)
        np.fill_diagonal(cov, np.clip(np.diag(cov), 0.0, None))
        results.append((mean, cov))
    return results


def gp_posterior(model: GPModel, probes):
    """Posterior at a list of weight vectors; see posterior_at_coords."""
    Zp = np.array([_coords(lam) for lam in probes])
    return posterior_at_coords(model, Zp)


def sobol_init(n_outcomes: int, bounds=None, seed: int = 0) -> list:
    """2(N_y + 1) Sobol points mapped onto the weight simplex."""
    if n_outcomes < 2:
        raise ValidationError("Sobol initialization needs at least 2 outcomes")
    dim = n_outcomes - 1
    count = 2 * (n_outcomes + 1)
    sampler = qmc.Sobol(d=dim, scramble=True, seed=seed)
    with warnings.catch_warnings():
        # the point count is a fixed design size, not a power of 2
        warnings.simplefilter("ignore", UserWarning)
        u = sampler.random(count)
    if bounds is not None:
        bounds = np.asarray(bounds, dtype=float)
        u = qmc.scale(u, bounds[:, 0], bounds[:, 1])
    if n_outcomes == 2:
        return [WeightVector(np.array([x[0], 1.0 - x[0]])) for x in u]
    # order statistics of each row partition [0, 1] into N_y weights
    cuts = np.sort(u, axis=1)
    padded = np.hstack([np.zeros((count, 1)), cuts, np.ones((count, 1))])
    weights = np.diff(padded, axis=1)
    return [WeightVector(w) for w in weights]
