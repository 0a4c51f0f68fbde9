"""Noisy expected-hypervolume-improvement scoring and proposal.

Scores are Monte Carlo: each posterior draw re-samples the latent
frontier at the observed weights (integrating over observation noise)
and the candidate jointly, then measures the candidate's exclusive
hypervolume. All candidates share one set of base normal draws, so
scores are deterministic given the seed and smooth across candidates.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.stats import qmc

from .errors import ValidationError
from .pareto import (
    ParetoSet,
    WeightVector,
    as_weight_vector,
    hvi_2d,
    hvi_3d,
    hypervolume,
    nondominated_mask,
    staircase_2d,
)
from .surrogate import GPModel, gp_fit, posterior_at_coords


@dataclass
class AcquisitionConfig:
    mc_samples: int = 128
    candidate_grid: int = 256
    refine_steps: int = 20
    q: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.mc_samples < 16:
            raise ValidationError("mc_samples must be >= 16")
        if self.q < 1:
            raise ValidationError("q must be >= 1")
        if self.candidate_grid < 2 or self.refine_steps < 0:
            raise ValidationError("candidate_grid must be >= 2 and refine_steps >= 0")


def _cand_coords(candidates) -> np.ndarray:
    return np.array([as_weight_vector(c).simplex_coords for c in candidates])


def _joint_draws(model: GPModel, Z_obs: np.ndarray, Z_cand: np.ndarray, cfg: AcquisitionConfig):
    """Sample latent values at observed inputs and candidates jointly.

    Returns (frontier_draws (S, n, N_y), cand_draws (C, S, N_y)). The
    candidate draws condition on the frontier draw of the same sample,
    with base normals shared across candidates.
    """
    S = cfg.mc_samples
    n = Z_obs.shape[0]
    C = Z_cand.shape[0]
    rng = np.random.default_rng(cfg.seed)
    frontier = np.empty((S, n, model.n_outcomes))
    cand = np.empty((C, S, model.n_outcomes))
    posteriors = posterior_at_coords(model, np.vstack([Z_obs, Z_cand]))
    for y, (mean, cov) in enumerate(posteriors):
        m_o, S_o = mean[:n], cov[:n, :n]
        factor = cho_factor(S_o + 1e-10 * np.eye(n), lower=True)
        L_o = np.tril(factor[0])
        z = rng.standard_normal((S, n))
        zc = rng.standard_normal(S)
        F = m_o[None, :] + z @ L_o.T
        frontier[:, :, y] = F
        cross = cov[:n, n:]  # (n, C)
        A = cho_solve(factor, cross)  # (n, C)
        resid = np.clip(np.diag(cov[n:, n:]) - np.sum(cross * A, axis=0), 0.0, None)
        cond_mean = mean[n:][None, :] + (F - m_o[None, :]) @ A  # (S, C)
        cand[:, :, y] = (cond_mean + np.sqrt(resid)[None, :] * zc[:, None]).T
    return frontier, cand


def nehvi_score(model: GPModel, observed, ref, candidates, cfg: AcquisitionConfig,
                return_se: bool = False):
    """Mean hypervolume improvement of each candidate over MC draws."""
    Z_obs = np.array([as_weight_vector(lam).simplex_coords for lam, _ in observed])
    Z_cand = _cand_coords(candidates)
    ref = np.asarray(ref, dtype=float)
    frontier, cand = _joint_draws(model, Z_obs, Z_cand, cfg)
    S, C = cfg.mc_samples, Z_cand.shape[0]
    hvi = np.empty((S, C))
    if model.n_outcomes == 2:
        for s in range(S):
            xs, ys = staircase_2d(frontier[s])
            hvi[s] = hvi_2d(xs, ys, cand[:, s, :], ref)
    elif model.n_outcomes == 3:
        for s in range(S):
            F = frontier[s]
            F = F[np.all(F >= ref, axis=1)]
            F = F[nondominated_mask(F)] if F.shape[0] else F
            hvi[s] = hvi_3d(F, cand[:, s, :], ref)
    else:
        for s in range(S):
            F = frontier[s]
            F = F[np.all(F >= ref, axis=1)]
            F = F[nondominated_mask(F)] if F.shape[0] else F
            base = hypervolume(F, ref) if F.shape[0] else 0.0
            for c in range(C):
                pt = cand[c, s, :]
                if np.all(pt >= ref):
                    joined = np.vstack([F, pt[None, :]]) if F.shape[0] else pt[None, :]
                    hvi[s, c] = hypervolume(joined, ref) - base
                else:
                    hvi[s, c] = 0.0
    scores = hvi.mean(axis=0)
    if return_se:
        return scores, hvi.std(axis=0, ddof=1) / np.sqrt(S)
    return scores


def _simplex_grid(n_outcomes: int, count: int, seed: int) -> list:
    if n_outcomes == 2:
        ts = np.linspace(0.0, 1.0, count)
        return [WeightVector(np.array([t, 1.0 - t])) for t in ts]
    sampler = qmc.Sobol(d=n_outcomes - 1, scramble=True, seed=seed)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        u = sampler.random(count)
    cuts = np.sort(u, axis=1)
    padded = np.hstack([np.zeros((count, 1)), cuts, np.ones((count, 1))])
    return [WeightVector(w) for w in np.diff(padded, axis=1)]


def _valid_coords(z: np.ndarray) -> bool:
    return bool(np.all(z >= 0.0) and z.sum() <= 1.0 + 1e-12)


def _scan(model, observed, ref, cfg) -> WeightVector:
    """Grid scan plus pattern-search refinement of the NEHVI surface."""
    grid = _simplex_grid(model.n_outcomes, cfg.candidate_grid, cfg.seed)
    scores = nehvi_score(model, observed, ref, grid, cfg)
    best_idx = int(np.argmax(scores))
    best = grid[best_idx].simplex_coords.copy()
    best_score = float(scores[best_idx])
    step = 1.0 / (cfg.candidate_grid - 1)
    dim = model.input_dim
    for _ in range(cfg.refine_steps):
        polls = []
        for k in range(dim):
            for sign in (1.0, -1.0):
                z = best.copy()
                z[k] = z[k] + sign * step
                if _valid_coords(z):
                    polls.append(np.clip(z, 0.0, 1.0))
        if not polls:
            break
        cands = [WeightVector.from_simplex_coords(z) for z in polls]
        poll_scores = nehvi_score(model, observed, ref, cands, cfg)
        k = int(np.argmax(poll_scores))
        if poll_scores[k] > best_score:
            best = polls[k]
            best_score = float(poll_scores[k])
        else:
            step *= 0.5
    return WeightVector.from_simplex_coords(best)


def _model_observations(model: GPModel) -> list:
    obs = []
    Z = model.train_inputs
    for i in range(Z.shape[0]):
        lam = WeightVector.from_simplex_coords(Z[i])
        values = np.array(
            [gp.mean + gp.scale * gp.targets[i] for gp in model.outcomes]
        )
        ses = np.array([gp.scale * np.sqrt(gp.noise[i]) for gp in model.outcomes])
        obs.append((lam, values, ses))
    return obs


def propose_candidates(model: GPModel, pset: ParetoSet, ref, cfg: AcquisitionConfig) -> list:
    """Pick q distinct weight vectors maximizing NEHVI.

    For q > 1, later picks condition on seeded posterior draws at the
    earlier picks (sequential greedy with fantasy observations).
    """
    obs = _model_observations(model)
    picks: list[WeightVector] = []
    current = model
    for k in range(cfg.q):
        observed = [(lam, ses) for lam, _, ses in obs]
        pick = _scan(current, observed, ref, cfg)
        if any(np.allclose(pick.values, p.values) for p in picks):
            grid = _simplex_grid(current.n_outcomes, cfg.candidate_grid, cfg.seed)
            scores = nehvi_score(current, observed, ref, grid, cfg)
            for idx in np.argsort(-scores):
                alt = grid[int(idx)]
                if not any(np.allclose(alt.values, p.values) for p in picks):
                    pick = alt
                    break
        picks.append(pick)
        if k + 1 == cfg.q:
            break
        # fantasy observation at the pick keeps later picks apart
        rng = np.random.default_rng([cfg.seed, 7 + k])
        posts = posterior_at_coords(current, pick.simplex_coords[None, :])
        values = np.array(
            [float(mean[0] + np.sqrt(max(cov[0, 0], 0.0)) * rng.standard_normal())
             for mean, cov in posts]
        )
        ses = np.array([max(float(np.median([o[2][y] for o in obs])), 1e-6)
                        for y in range(current.n_outcomes)])
        obs = obs + [(pick, values, ses)]
        current = gp_fit(obs, hyperparams=model.fixed_hyperparams())
    return picks
