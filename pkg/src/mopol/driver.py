"""End-to-end frontier search: initialization, evaluation with
bootstrap SEs, surrogate refit, acquisition, and final-model fitting."""

from __future__ import annotations

import dataclasses
import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .acquisition import AcquisitionConfig, propose_candidates
from .errors import ValidationError
from .pareto import (
    EvaluatedPoint,
    ParetoSet,
    WeightVector,
    as_weight_vector,
    default_reference_point,
    hypervolume,
    update_pareto,
)
from .surrogate import gp_fit, sobol_init
from .trees import (
    PolicyTree,
    TreeFitConfig,
    _score_array,
    evaluate_outcomes,
    export_tree,
    fit_tree,
    tree_to_dict,
)

log = logging.getLogger("mopol")


@dataclass
class MopolConfig:
    tree: TreeFitConfig
    replicates: int = 100
    budget_iters: int | None = None
    budget_seconds: float | None = None
    acquisition: AcquisitionConfig = field(default_factory=AcquisitionConfig)
    se_mode: str = "conventional"
    seed: int = 0

    def __post_init__(self):
        if self.replicates < 2:
            raise ValidationError("replicates must be >= 2")
        if (self.budget_iters is None) == (self.budget_seconds is None):
            raise ValidationError("set exactly one of budget_iters or budget_seconds")
        if self.budget_iters is not None and self.budget_iters < 1:
            raise ValidationError("budget_iters must be positive")
        if self.budget_seconds is not None and self.budget_seconds <= 0:
            raise ValidationError("budget_seconds must be positive")
        if self.se_mode not in ("conventional", "alg1-literal"):
            raise ValidationError("se_mode must be 'conventional' or 'alg1-literal'")


@dataclass
class RunTrace:
    """Per-iteration records of a frontier run."""

    records: list
    reference_point: np.ndarray
    partial: bool = False

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.records)

    def hypervolumes(self) -> np.ndarray:
        return np.array([r["hypervolume"] for r in self.records])


def _derived_seed(seed: int, tag: int, index: int = 0) -> int:
    return int(np.random.SeedSequence(entropy=(seed, tag, index)).generate_state(1)[0])


def _workers() -> int:
    return max(1, int(os.environ.get("MOPOL_THREADS", "1")))


def bootstrap_se(X, scores, lam, cfg: MopolConfig, seed: int | None = None) -> np.ndarray:
    """Bootstrap SE of per-outcome value for the configured fitter.

    Rows of (X, scores) are resampled jointly; each replicate's tree is
    valued against its own resampled scores. Conventional mode is the
    sample SD of replicate values; alg1-literal divides that by sqrt(B).
    """
    gamma = _score_array(scores)
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    B = cfg.replicates
    rng = np.random.default_rng(cfg.seed if seed is None else seed)
    idx = rng.integers(0, n, size=(B, n))

    def one(b: int) -> np.ndarray:
        Xb, gb = X[idx[b]], gamma[idx[b]]
        tree = fit_tree(Xb, gb, lam, cfg.tree)
        return evaluate_outcomes(tree, gb, Xb)

    workers = _workers()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            vals = np.array(list(pool.map(one, range(B))))
    else:
        vals = np.array([one(b) for b in range(B)])
    conventional = np.std(vals, axis=0, ddof=1)
    if cfg.se_mode == "alg1-literal":
        return np.sqrt(np.var(vals, axis=0, ddof=0) / (B - 1))
    return conventional


def run_mopol(scores, X, cfg: MopolConfig):
    """Map the Pareto frontier of tree values over the weight simplex.

    Sobol initialization points are evaluated first without acquisition;
    afterwards each iteration refits the per-outcome GPs and proposes
    the next weighting by NEHVI, until the budget is exhausted. Fully
    deterministic given the seed in single-candidate mode.

    Returns ``(ParetoSet, RunTrace)``; the trace is flagged partial if
    the budget ran out before initialization finished.
    """
    gamma = _score_array(scores)
    X = np.asarray(X, dtype=float)
    n_outcomes = gamma.shape[2]
    if n_outcomes < 2:
        raise ValidationError("frontier search needs at least 2 outcomes")
    lam_init = sobol_init(n_outcomes, seed=_derived_seed(cfg.seed, 1))

    pset = ParetoSet()
    snapshots: list[np.ndarray] = []
    observations: list = []
    records: list[dict] = []
    pending: list[WeightVector] = []
    start = time.perf_counter()
    i = 0
    while True:
        if cfg.budget_iters is not None and i >= cfg.budget_iters:
            break
        if cfg.budget_seconds is not None and time.perf_counter() - start >= cfg.budget_seconds:
            break
        acq_seconds = 0.0
        if i < len(lam_init):
            lam = lam_init[i]
        elif pending:
            lam = pending.pop(0)
        else:
            t0 = time.perf_counter()
            model = gp_fit(observations)
            all_values = np.array([v for _, v, _ in observations])
            ref_now = default_reference_point(all_values)
            acq_cfg = dataclasses.replace(cfg.acquisition, seed=_derived_seed(cfg.seed, 2, i))
            proposals = propose_candidates(model, pset, ref_now, acq_cfg)
            acq_seconds = time.perf_counter() - t0
            lam = proposals[0]
            pending = list(proposals[1:])

        t0 = time.perf_counter()
        tree = fit_tree(X, gamma, lam, cfg.tree)
        fit_seconds = time.perf_counter() - t0
        values = evaluate_outcomes(tree, gamma, X)
        ses = bootstrap_se(X, gamma, lam, cfg, seed=_derived_seed(cfg.seed, 3, i))
        point = EvaluatedPoint(
            lam=lam, values=values, ses=ses, kind=cfg.tree.kind,
            fit_seconds=fit_seconds, iteration=i,
        )
        pset = update_pareto(pset, point)
        snapshots.append(pset.values_array().copy())
        observations.append((lam, values, ses))
        record = {"iteration": i}
        record.update({f"lambda_{k}": v for k, v in enumerate(lam.values)})
        record.update({f"value_{k}": v for k, v in enumerate(values)})
        record.update({f"se_{k}": v for k, v in enumerate(ses)})
        record["fit_seconds"] = fit_seconds
        record["acq_seconds"] = acq_seconds
        records.append(record)
        log.info(
            "iter=%d lambda=%s values=%s acq_s=%.3f fit_s=%.3f",
            i, np.round(lam.values, 4).tolist(), np.round(values, 4).tolist(),
            acq_seconds, fit_seconds,
        )
        i += 1

    if records:
        all_values = np.array([v for _, v, _ in observations])
        ref = default_reference_point(all_values)
        for rec, snap in zip(records, snapshots):
            rec["hypervolume"] = hypervolume(snap, ref)
    else:
        ref = np.zeros(n_outcomes)
    partial = len(records) < len(lam_init)
    return pset, RunTrace(records=records, reference_point=ref, partial=partial)


@dataclass
class FinalReport:
    """Held-out evaluation of one final tree at a chosen weighting."""

    lam: WeightVector
    kind: str
    depth: int
    split: float
    seed: int
    n_train: int
    n_test: int
    train_values: np.ndarray
    test_values: np.ndarray
    fit_seconds: float
    tree: PolicyTree

    def to_dict(self, feature_names=None) -> dict:
        names = feature_names or [f"x{j}" for j in range(self.tree.n_features)]
        return {
            "lambda": self.lam.values.tolist(),
            "fitter": self.kind,
            "depth": self.depth,
            "split": self.split,
            "seed": self.seed,
            "n_train": self.n_train,
            "n_test": self.n_test,
            "train_values": self.train_values.tolist(),
            "test_values": self.test_values.tolist(),
            "fit_seconds": self.fit_seconds,
            "tree": tree_to_dict(self.tree),
            "tree_text": export_tree(self.tree, names, "text"),
        }


def fit_final(scores, X, lam, split: float, cfg: MopolConfig, treatments=None) -> FinalReport:
    """Fit at a chosen weighting on a seeded train split and report
    train and held-out test values per outcome.

    Rows are shuffled with ``default_rng(cfg.seed)``; the first
    ``round(split * n)`` shuffled rows form the training set.
    """
    if not 0.0 < split < 1.0:
        raise ValidationError("split must lie in (0, 1)")
    lam = as_weight_vector(lam)
    gamma = _score_array(scores)
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    rng = np.random.default_rng(cfg.seed)
    perm = rng.permutation(n)
    n_train = min(max(int(round(split * n)), 1), n - 1)
    train, test = perm[:n_train], perm[n_train:]
    if treatments is not None:
        w = np.asarray(treatments)[train]
        missing = sorted(set(range(gamma.shape[1])) - set(np.unique(w).tolist()))
        if missing:
            import warnings

            warnings.warn(f"treatment arm(s) {missing} missing from the train partition")
    t0 = time.perf_counter()
    tree = fit_tree(X[train], gamma[train], lam, cfg.tree)
    fit_seconds = time.perf_counter() - t0
    return FinalReport(
        lam=lam,
        kind=cfg.tree.kind,
        depth=cfg.tree.depth,
        split=split,
        seed=cfg.seed,
        n_train=int(train.size),
        n_test=int(test.size),
        train_values=evaluate_outcomes(tree, gamma[train], X[train]),
        test_values=evaluate_outcomes(tree, gamma[test], X[test]),
        fit_seconds=fit_seconds,
        tree=tree,
    )


def evaluate_rules(tree: PolicyTree, scores, X) -> np.ndarray:
    """Per-outcome values of a fixed (possibly handpicked) tree."""
    return evaluate_outcomes(tree, scores, X)
