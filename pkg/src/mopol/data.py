"""Datasets, nuisance estimates, and doubly robust scores.

Scores are either loaded from files (externally estimated nuisances) or
produced by a synthetic data generating process with oracle nuisances.
No nuisance fitting happens in this package.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from typing import Any

import numpy as np
import pandas as pd

from .errors import ValidationError

ROLES = ("covariate", "treatment", "outcome")


@dataclass
class Dataset:
    """Covariates, integer treatments, and one or more outcomes.

    Treatments must be labelled 0..d-1 with every label present at
    least once; ``load_dataset`` relabels non-contiguous inputs.
    """

    covariates: np.ndarray  # (n, p)
    treatments: np.ndarray  # (n,) ints in {0..d-1}
    outcomes: np.ndarray  # (n, n_outcomes)
    provenance: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        self.covariates = np.asarray(self.covariates, dtype=float)
        self.treatments = np.asarray(self.treatments)
        self.outcomes = np.asarray(self.outcomes, dtype=float)
        if self.covariates.ndim != 2:
            raise ValidationError("covariates must be a 2-d matrix")
        if self.outcomes.ndim != 2:
            raise ValidationError("outcomes must be a 2-d matrix")
        n, p = self.covariates.shape
        if n < 1 or p < 1:
            raise ValidationError("need n >= 1 rows and p >= 1 covariates")
        if self.treatments.shape != (n,):
            raise ValidationError("treatments must be a length-n vector")
        if self.outcomes.shape[0] != n or self.outcomes.shape[1] < 1:
            raise ValidationError("outcomes must be n x N_y with N_y >= 1")
        if not np.all(np.isfinite(self.covariates)):
            raise ValidationError("covariates contain missing or non-finite entries")
        if not np.all(np.isfinite(self.outcomes)):
            raise ValidationError("outcomes contain missing or non-finite entries")
        w = np.asarray(self.treatments, dtype=float)
        if not np.all(np.isfinite(w)) or not np.all(w == np.round(w)):
            raise ValidationError("treatments must be integers")
        self.treatments = w.astype(int)
        labels = np.unique(self.treatments)
        d = labels.size
        if d < 2:
            raise ValidationError("need at least two distinct treatment labels")
        if labels[0] != 0 or labels[-1] != d - 1:
            raise ValidationError(
                f"treatment labels must be contiguous 0..{d - 1}, got {labels.tolist()}"
            )

    @property
    def n(self) -> int:
        return self.covariates.shape[0]

    @property
    def p(self) -> int:
        return self.covariates.shape[1]

    @property
    def n_treatments(self) -> int:
        return int(self.treatments.max()) + 1

    @property
    def n_outcomes(self) -> int:
        return self.outcomes.shape[1]


@dataclass
class NuisanceEstimates:
    """Outcome-model predictions and treatment propensities.

    ``outcome_model[i, w, y]`` is the predicted outcome y for unit i
    under treatment w; ``propensities[i, w]`` the probability of
    receiving w. Rows of propensities must sum to one.
    """

    outcome_model: np.ndarray  # (n, d, n_outcomes)
    propensities: np.ndarray  # (n, d)

    def __post_init__(self):
        self.outcome_model = np.asarray(self.outcome_model, dtype=float)
        self.propensities = np.asarray(self.propensities, dtype=float)
        if self.outcome_model.ndim != 3:
            raise ValidationError("outcome_model must be an n x d x N_y tensor")
        if self.propensities.shape != self.outcome_model.shape[:2]:
            raise ValidationError("propensities must be n x d matching outcome_model")
        if not np.all(np.isfinite(self.outcome_model)):
            raise ValidationError("outcome_model contains non-finite entries")
        e = self.propensities
        if not np.all((e > 0.0) & (e < 1.0)):
            raise ValidationError("every propensity must lie strictly in (0, 1)")
        if not np.allclose(e.sum(axis=1), 1.0, atol=1e-8, rtol=0.0):
            raise ValidationError("propensity rows must sum to 1 within 1e-8")


@dataclass
class ScoreMatrix:
    """Doubly robust scores, one per (unit, treatment, outcome)."""

    scores: np.ndarray  # (n, d, n_outcomes)

    def __post_init__(self):
        self.scores = np.asarray(self.scores, dtype=float)
        if self.scores.ndim != 3:
            raise ValidationError("scores must be an n x d x N_y tensor")
        if not np.all(np.isfinite(self.scores)):
            raise ValidationError("scores contain non-finite entries")

    @property
    def n(self) -> int:
        return self.scores.shape[0]

    @property
    def n_treatments(self) -> int:
        return self.scores.shape[1]

    @property
    def n_outcomes(self) -> int:
        return self.scores.shape[2]


# ---------------------------------------------------------------------------
# CSV / schema I/O


def load_schema(path) -> dict:
    with open(path) as fh:
        schema = json.load(fh)
    for col, role in schema.items():
        if role not in ROLES:
            raise ValidationError(f"schema column {col!r} has unknown role {role!r}")
    return schema


def save_schema(schema: dict, path) -> None:
    with open(path, "w") as fh:
        json.dump(schema, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_dataset(path, schema: dict) -> Dataset:
    """Read a dataset CSV using a column -> role map.

    Missing cells are rejected with their row and column named.
    Non-contiguous treatment labels are relabelled to 0..d-1 with a
    warning recorded in the dataset's provenance.
    """
    roles = {role: [c for c, r in schema.items() if r == role] for role in ROLES}
    if len(roles["treatment"]) != 1:
        raise ValidationError("schema must name exactly one treatment column")
    if not roles["covariate"] or not roles["outcome"]:
        raise ValidationError("schema must name at least one covariate and one outcome column")

    frame = pd.read_csv(path)
    missing_cols = [c for c in schema if c not in frame.columns]
    if missing_cols:
        raise ValidationError(f"file is missing schema columns: {missing_cols}")

    # preserve the file's column order within each role
    cov_cols = [c for c in frame.columns if c in roles["covariate"]]
    out_cols = [c for c in frame.columns if c in roles["outcome"]]
    treat_col = roles["treatment"][0]
    used = frame[cov_cols + [treat_col] + out_cols]

    if used.isna().any().any():
        cells = [
            f"row {i}, column {c!r}"
            for c in used.columns
            for i in used.index[used[c].isna()]
        ]
        raise ValidationError("missing values at: " + "; ".join(cells[:20]))

    treatments = used[treat_col].to_numpy()
    w = np.asarray(treatments, dtype=float)
    if not np.all(w == np.round(w)):
        raise ValidationError(f"treatment column {treat_col!r} must be integer valued")
    w = w.astype(int)
    labels = np.unique(w)
    provenance: dict[str, Any] = {"source": str(path), "warnings": []}
    if labels[0] != 0 or labels[-1] != labels.size - 1:
        mapping = {int(old): new for new, old in enumerate(labels)}
        w = np.vectorize(mapping.get)(w)
        msg = f"treatment labels {labels.tolist()} relabelled to 0..{labels.size - 1}"
        warnings.warn(msg)
        provenance["warnings"].append(msg)
        provenance["treatment_relabeling"] = mapping

    return Dataset(
        covariates=used[cov_cols].to_numpy(dtype=float),
        treatments=w,
        outcomes=used[out_cols].to_numpy(dtype=float),
        provenance={
            **provenance,
            "covariate_names": cov_cols,
            "outcome_names": out_cols,
            "treatment_name": treat_col,
        },
    )


def default_schema(data: Dataset) -> dict:
    names = data.provenance.get("covariate_names") or [f"x{j}" for j in range(data.p)]
    outs = data.provenance.get("outcome_names") or [f"y{k}" for k in range(data.n_outcomes)]
    treat = data.provenance.get("treatment_name") or "w"
    schema = {c: "covariate" for c in names}
    schema[treat] = "treatment"
    schema.update({c: "outcome" for c in outs})
    return schema


def save_dataset(data: Dataset, path) -> dict:
    """Write a dataset CSV; returns the matching schema map."""
    schema = default_schema(data)
    cov = [c for c, r in schema.items() if r == "covariate"]
    out = [c for c, r in schema.items() if r == "outcome"]
    treat = next(c for c, r in schema.items() if r == "treatment")
    frame = pd.DataFrame(data.covariates, columns=cov)
    frame[treat] = data.treatments
    for k, c in enumerate(out):
        frame[c] = data.outcomes[:, k]
    frame.to_csv(path, index=False)
    return schema


def _dense_pivot(frame: pd.DataFrame, value_col: str, index_cols: list[str]) -> np.ndarray:
    sizes = [int(frame[c].max()) + 1 for c in index_cols]
    expected = int(np.prod(sizes))
    if len(frame) != expected or frame.duplicated(index_cols).any():
        raise ValidationError(
            f"{value_col} file must be dense over {index_cols} "
            f"(expected {expected} rows, got {len(frame)})"
        )
    arr = np.full(sizes, np.nan)
    arr[tuple(frame[c].to_numpy(dtype=int) for c in index_cols)] = frame[value_col].to_numpy(
        dtype=float
    )
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{value_col} file contains missing entries")
    return arr


def load_scores(path) -> ScoreMatrix:
    frame = pd.read_csv(path)
    for col in ("row", "treatment", "outcome", "score"):
        if col not in frame.columns:
            raise ValidationError(f"score file must have a {col!r} column")
    return ScoreMatrix(_dense_pivot(frame, "score", ["row", "treatment", "outcome"]))


def save_scores(scores: ScoreMatrix, path) -> None:
    n, d, k = scores.scores.shape
    rows, treats, outs = np.meshgrid(np.arange(n), np.arange(d), np.arange(k), indexing="ij")
    pd.DataFrame(
        {
            "row": rows.ravel(),
            "treatment": treats.ravel(),
            "outcome": outs.ravel(),
            "score": scores.scores.ravel(),
        }
    ).to_csv(path, index=False)


def load_nuisance(mhat_path, ehat_path) -> NuisanceEstimates:
    mframe = pd.read_csv(mhat_path)
    eframe = pd.read_csv(ehat_path)
    for col in ("row", "treatment", "outcome", "mhat"):
        if col not in mframe.columns:
            raise ValidationError(f"mhat file must have a {col!r} column")
    for col in ("row", "treatment", "ehat"):
        if col not in eframe.columns:
            raise ValidationError(f"ehat file must have a {col!r} column")
    mhat = _dense_pivot(mframe, "mhat", ["row", "treatment", "outcome"])
    ehat = _dense_pivot(eframe, "ehat", ["row", "treatment"])
    return NuisanceEstimates(outcome_model=mhat, propensities=ehat)


def save_nuisance(nuisance: NuisanceEstimates, mhat_path, ehat_path) -> None:
    n, d, k = nuisance.outcome_model.shape
    rows, treats, outs = np.meshgrid(np.arange(n), np.arange(d), np.arange(k), indexing="ij")
    pd.DataFrame(
        {
            "row": rows.ravel(),
            "treatment": treats.ravel(),
            "outcome": outs.ravel(),
            "mhat": nuisance.outcome_model.ravel(),
        }
    ).to_csv(mhat_path, index=False)
    rows2, treats2 = np.meshgrid(np.arange(n), np.arange(d), indexing="ij")
    pd.DataFrame(
        {
            "row": rows2.ravel(),
            "treatment": treats2.ravel(),
            "ehat": nuisance.propensities.ravel(),
        }
    ).to_csv(ehat_path, index=False)


# ---------------------------------------------------------------------------
# AIPW


def aipw_scores(
    data: Dataset, nuisance: NuisanceEstimates, propensity_floor: float = 1e-3
) -> ScoreMatrix:
    """Augmented inverse propensity weighted scores.

    score[i, w, y] = mhat[i, w, y] + 1{W_i = w} (Y[i, y] - mhat[i, w, y]) / ehat[i, w]
    """
    n, d, k = nuisance.outcome_model.shape
    if (n, d, k) != (data.n, data.n_treatments, data.n_outcomes):
        raise ValidationError(
            f"nuisance dimensions {(n, d, k)} do not match dataset "
            f"{(data.n, data.n_treatments, data.n_outcomes)}"
        )
    e = nuisance.propensities
    small = np.any(e <= propensity_floor, axis=1)
    if small.any():
        bad = np.flatnonzero(small)
        raise ValidationError(
            f"propensities at or below floor {propensity_floor:g} for rows "
            f"{bad[:20].tolist()}{'...' if bad.size > 20 else ''}"
        )
    onehot = np.zeros((n, d))
    onehot[np.arange(n), data.treatments] = 1.0
    m = nuisance.outcome_model
    resid = data.outcomes[:, None, :] - m  # (n, d, k)
    gamma = m + (onehot / e)[:, :, None] * resid
    return ScoreMatrix(gamma)


# ---------------------------------------------------------------------------
# Synthetic data generating processes


def _eval_form(form: dict, X: np.ndarray) -> np.ndarray:
    """Evaluate a mean/effect form over covariate rows."""
    kind = form["kind"]
    n = X.shape[0]
    if kind == "zero":
        return np.zeros(n)
    if kind == "constant":
        return np.full(n, float(form["value"]))
    if kind == "linear":
        coef = np.asarray(form["coef"], dtype=float)
        if coef.shape != (X.shape[1],):
            raise ValidationError("linear form coef length must equal p")
        return X @ coef + float(form.get("intercept", 0.0))
    if kind == "threshold":
        j = int(form["feature"])
        below = float(form["below"])
        above = float(form["above"])
        return np.where(X[:, j] <= float(form["threshold"]), below, above)
    if kind == "piecewise":
        j = int(form["feature"])
        mask = X[:, j] <= float(form["threshold"])
        return np.where(mask, _eval_form(form["below"], X), _eval_form(form["above"], X))
    if kind == "sum":
        return np.sum([_eval_form(t, X) for t in form["terms"]], axis=0)
    raise ValidationError(f"unknown form kind {kind!r}")


@dataclass
class DGPSpec:
    """Description of a synthetic data generating process.

    ``effects[y][w]`` gives the additive effect of treatment ``w`` on
    outcome ``y`` relative to the per-outcome baseline mean.
    """

    n: int
    p: int
    d: int
    n_outcomes: int
    propensity: dict
    baselines: list
    effects: list
    covariates: dict = field(default_factory=lambda: {"kind": "uniform"})
    noise_sd: Any = 1.0

    def __post_init__(self):
        if self.n < 1 or self.p < 1 or self.d < 2 or self.n_outcomes < 1:
            raise ValidationError("DGP needs n >= 1, p >= 1, d >= 2, N_y >= 1")
        if len(self.baselines) != self.n_outcomes:
            raise ValidationError("need one baseline form per outcome")
        if len(self.effects) != self.n_outcomes or any(
            len(row) != self.d for row in self.effects
        ):
            raise ValidationError("effects must be an N_y x d grid of forms")

    @property
    def noise_vector(self) -> np.ndarray:
        sd = np.broadcast_to(np.asarray(self.noise_sd, dtype=float), (self.n_outcomes,))
        if np.any(sd < 0):
            raise ValidationError("noise_sd must be non-negative")
        return np.array(sd)

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.__dict__, fh, indent=2)
            fh.write("\n")

    @classmethod
    def from_json(cls, path) -> "DGPSpec":
        with open(path) as fh:
            raw = json.load(fh)
        return cls(**raw)


def _draw_covariates(spec: DGPSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    kind = spec.covariates.get("kind", "uniform")
    if kind == "uniform":
        return rng.random((n, spec.p))
    if kind == "normal":
        return rng.standard_normal((n, spec.p))
    raise ValidationError(f"unknown covariate kind {kind!r}")


def propensity_matrix(spec: DGPSpec, X: np.ndarray) -> np.ndarray:
    """True treatment-assignment probabilities for each row."""
    form = spec.propensity
    kind = form["kind"]
    n = X.shape[0]
    if kind == "constant":
        probs = np.asarray(form["probs"], dtype=float)
        if probs.shape != (spec.d,) or not np.isclose(probs.sum(), 1.0):
            raise ValidationError("constant propensity needs d probabilities summing to 1")
        e = np.tile(probs, (n, 1))
    elif kind == "logistic":
        if spec.d != 2:
            raise ValidationError("logistic propensity requires d = 2")
        z = X @ np.asarray(form["coef"], dtype=float) + float(form.get("intercept", 0.0))
        p1 = 1.0 / (1.0 + np.exp(-z))
        clip = float(form.get("clip", 0.02))
        p1 = np.clip(p1, clip, 1.0 - clip)
        e = np.column_stack([1.0 - p1, p1])
    elif kind == "softmax":
        coef = np.asarray(form["coef"], dtype=float)  # (d, p)
        icept = np.asarray(form.get("intercepts", np.zeros(spec.d)), dtype=float)
        z = X @ coef.T + icept
        z -= z.max(axis=1, keepdims=True)
        e = np.exp(z)
        e /= e.sum(axis=1, keepdims=True)
        clip = float(form.get("clip", 0.02))
        e = np.clip(e, clip, None)
        e /= e.sum(axis=1, keepdims=True)
    else:
        raise ValidationError(f"unknown propensity kind {kind!r}")
    if np.any(e <= 0.0) or np.any(e >= 1.0):
        raise ValidationError("degenerate DGP: propensities must lie strictly in (0, 1)")
    return e


def mean_tensor(spec: DGPSpec, X: np.ndarray) -> np.ndarray:
    """True conditional means m[i, w, y] under the DGP."""
    n = X.shape[0]
    m = np.empty((n, spec.d, spec.n_outcomes))
    for y in range(spec.n_outcomes):
        base = _eval_form(spec.baselines[y], X)
        for w in range(spec.d):
            m[:, w, y] = base + _eval_form(spec.effects[y][w], X)
    return m


def synth_generate(spec: DGPSpec, seed: int):
    """Draw a dataset from the DGP with oracle nuisances and scores.

    Returns ``(Dataset, NuisanceEstimates, ScoreMatrix)``. Identical
    (spec, seed) pairs produce bit-identical output.
    """
    rng = np.random.default_rng(seed)
    X = _draw_covariates(spec, spec.n, rng)
    e = propensity_matrix(spec, X)
    u = rng.random(spec.n)
    w = (u[:, None] > np.cumsum(e, axis=1)).sum(axis=1)
    if np.unique(w).size < spec.d:
        raise ValidationError(
            "a treatment arm received no units; increase n or adjust propensities"
        )
    m = mean_tensor(spec, X)
    noise = rng.standard_normal((spec.n, spec.n_outcomes)) * spec.noise_vector
    Y = m[np.arange(spec.n), w, :] + noise
    data = Dataset(covariates=X, treatments=w, outcomes=Y, provenance={"source": "synthetic"})
    nuisance = NuisanceEstimates(outcome_model=m, propensities=e)
    return data, nuisance, aipw_scores(data, nuisance)


def tradeoff_dgp(n: int = 2000, n_outcomes: int = 2) -> DGPSpec:
    """DGP with a genuine treatment trade-off between outcomes.

    For units with x0 <= 0.5 the effect of treatment 1 on outcome 1 is
    the exact negation of its effect on outcome 0; elsewhere treating
    mildly helps both, so weight sweeps trace a curved frontier. With
    ``n_outcomes=3`` a third outcome driven by x1 is added, making the
    weight simplex two-dimensional.
    """
    if n_outcomes not in (2, 3):
        raise ValidationError("tradeoff_dgp supports 2 or 3 outcomes")
    tau0 = {"kind": "linear", "coef": [-1.2, 1.0], "intercept": 0.6}
    tau1 = {
        "kind": "piecewise",
        "feature": 0,
        "threshold": 0.5,
        "below": {"kind": "linear", "coef": [1.2, -1.0], "intercept": -0.6},
        "above": {"kind": "linear", "coef": [0.0, 0.5], "intercept": 0.1},
    }
    zero = {"kind": "zero"}
    baselines = [zero] * n_outcomes
    effects = [[zero, tau0], [zero, tau1]]
    if n_outcomes == 3:
        tau2 = {
            "kind": "piecewise",
            "feature": 1,
            "threshold": 0.5,
            "below": {"kind": "linear", "coef": [0.8, -1.6], "intercept": 0.4},
            "above": {"kind": "linear", "coef": [-0.8, 1.6], "intercept": -1.0},
        }
        effects.append([zero, tau2])
    return DGPSpec(
        n=n,
        p=2,
        d=2,
        n_outcomes=n_outcomes,
        propensity={"kind": "constant", "probs": [0.5, 0.5]},
        baselines=baselines,
        effects=effects,
        covariates={"kind": "uniform"},
        noise_sd=0.5,
    )
