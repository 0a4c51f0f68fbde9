"""Depth-limited policy trees: greedy, hybrid-lookahead, and exact fitters.

All fitters maximize the average chosen-treatment score over the
sample. Routing is "x_j <= threshold goes left"; split candidates are
midpoints between consecutive distinct feature values; ties break
lexicographically (lowest feature, lowest threshold, lowest left-leaf
treatment) so fitting is deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .errors import FeasibilityError, ValidationError

_DEPTH2_CHUNK = 256  # candidate prefixes per vectorized block


@dataclass(frozen=True)
class Leaf:
    treatment: int


@dataclass(frozen=True)
class Split:
    feature: int
    threshold: float
    left: "Node"
    right: "Node"


Node = Union[Leaf, Split]


@dataclass(frozen=True)
class PolicyTree:
    """Immutable axis-aligned decision tree over covariates."""

    root: Node
    n_features: int

    def apply(self, X) -> np.ndarray:
        return apply(self, X)

    def depth(self) -> int:
        return _node_depth(self.root)

    def node_count(self) -> int:
        return _node_count(self.root)


def _node_depth(node: Node) -> int:
    if isinstance(node, Leaf):
        return 0
    return 1 + max(_node_depth(node.left), _node_depth(node.right))


def _node_count(node: Node) -> int:
    if isinstance(node, Leaf):
        return 1
    return 1 + _node_count(node.left) + _node_count(node.right)


@dataclass
class TreeFitConfig:
    kind: str
    depth: int
    lookahead: int = 2
    value_epsilon: float = 1e-12
    feature_mask: Optional[Sequence[int]] = None
    feasibility_limit: float = 1e10

    def __post_init__(self):
        if self.kind not in ("greedy", "hybrid", "optimal"):
            raise ValidationError(f"unknown fitter kind {self.kind!r}")
        if self.depth < 0:
            raise ValidationError("depth must be >= 0")
        if self.kind == "hybrid" and self.lookahead < 2:
            raise ValidationError("hybrid lookahead must be >= 2")
        if self.feature_mask is not None and len(self.feature_mask) < 1:
            raise ValidationError("feature mask must select at least one feature")


@dataclass
class ObjectiveMetric:
    """A value axis: either a score-backed outcome or a model scalar."""

    name: str
    outcome: Optional[int] = None
    model_fn: Optional[Callable[[PolicyTree], float]] = None

    def __post_init__(self):
        if (self.outcome is None) == (self.model_fn is None):
            raise ValidationError("metric needs exactly one of outcome index or model_fn")

    @classmethod
    def for_outcome(cls, y: int) -> "ObjectiveMetric":
        return cls(name=f"outcome_{y}", outcome=y)


# ---------------------------------------------------------------------------
# Value functionals


def _score_array(scores) -> np.ndarray:
    arr = getattr(scores, "scores", scores)
    return np.asarray(arr, dtype=float)


def check_weights(lam, n_weights: Optional[int] = None) -> np.ndarray:
    lam = np.asarray(getattr(lam, "values", lam), dtype=float)
    if lam.ndim != 1:
        raise ValidationError("weights must be a vector")
    if n_weights is not None and lam.size != n_weights:
        raise ValidationError(f"expected {n_weights} weights, got {lam.size}")
    if np.any(lam < 0):
        raise ValidationError("weights must be non-negative")
    if abs(lam.sum() - 1.0) > 1e-9:
        raise ValidationError(f"weights must sum to 1 within 1e-9, got {lam.sum()!r}")
    return lam


def value_binary(assignments, scores) -> float:
    """(1/n) sum_i (2 pi_i - 1) score_i for a 0/1 policy."""
    a = np.asarray(assignments)
    s = np.asarray(scores, dtype=float)
    if a.shape != s.shape or a.ndim != 1:
        raise ValidationError("assignments and scores must be equal-length vectors")
    return float(np.mean((2.0 * a - 1.0) * s))


def value_multi(assignments, scores, outcome: int) -> float:
    """(1/n) sum_i score[i, pi_i, outcome]."""
    gamma = _score_array(scores)
    a = np.asarray(assignments, dtype=int)
    if a.ndim != 1 or a.shape[0] != gamma.shape[0]:
        raise ValidationError("assignments must be a length-n vector")
    if a.min() < 0 or a.max() >= gamma.shape[1]:
        raise ValidationError("assignments contain out-of-range treatments")
    return float(np.mean(gamma[np.arange(gamma.shape[0]), a, outcome]))


def value_weighted(tree: PolicyTree, X, scores, lam, metrics=None) -> float:
    """Weighted sum of per-metric values for a fitted tree."""
    gamma = _score_array(scores)
    if metrics is None:
        metrics = [ObjectiveMetric.for_outcome(y) for y in range(gamma.shape[2])]
    weights = check_weights(lam, len(metrics))
    assignments = None
    total = 0.0
    for weight, metric in zip(weights, metrics):
        if metric.outcome is not None:
            if assignments is None:
                assignments = apply(tree, X)
            v = value_multi(assignments, gamma, metric.outcome)
        else:
            v = float(metric.model_fn(tree))
        total += weight * v
    return total


def apply(tree: PolicyTree, X) -> np.ndarray:
    """Route every row to its leaf treatment."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValidationError("X must be a 2-d matrix")
    out = np.empty(X.shape[0], dtype=int)

    def route(node: Node, idx: np.ndarray) -> None:
        if isinstance(node, Leaf):
            out[idx] = node.treatment
            return
        if node.feature >= X.shape[1]:
            raise ValidationError(
                f"tree splits on feature {node.feature} but X has {X.shape[1]} columns"
            )
        go_left = X[idx, node.feature] <= node.threshold
        route(node.left, idx[go_left])
        route(node.right, idx[~go_left])

    route(tree.root, np.arange(X.shape[0]))
    return out


def evaluate_outcomes(tree: PolicyTree, scores, X) -> np.ndarray:
    """Per-outcome values of a fixed tree (no fitting)."""
    gamma = _score_array(scores)
    assignments = apply(tree, X)
    return gamma[np.arange(gamma.shape[0]), assignments, :].mean(axis=0)


# ---------------------------------------------------------------------------
# Fitting internals. All solvers work on extracted subset arrays and
# track score *sums*; division by the full sample size happens once at
# the value level.


def _best_leaf(G: np.ndarray):
    sums = G.sum(axis=0)
    t = int(np.argmax(sums))
    return float(sums[t]), Leaf(t)


def _best_single_split(Xs: np.ndarray, G: np.ndarray, features):
    """Best (feature, threshold, leaf, leaf) split by score sum.

    Returns None when no feature varies. Ties break toward the lowest
    feature, lowest threshold, lowest left treatment.
    """
    best = None
    for j in features:
        order = np.argsort(Xs[:, j], kind="stable")
        xs = Xs[order, j]
        bpos = np.flatnonzero(xs[:-1] < xs[1:])
        if bpos.size == 0:
            continue
        cs = np.cumsum(G[order], axis=0)
        total = cs[-1]
        left = cs[bpos]
        lt = np.argmax(left, axis=1)
        right = total[None, :] - left
        rt = np.argmax(right, axis=1)
        idx = np.arange(bpos.size)
        vals = left[idx, lt] + right[idx, rt]
        k = int(np.argmax(vals))
        if best is None or vals[k] > best[0]:
            thresh = 0.5 * (xs[bpos[k]] + xs[bpos[k] + 1])
            best = (float(vals[k]), j, float(thresh), int(lt[k]), int(rt[k]))
    return best


def _solve_depth1(Xs, G, features):
    leaf_sum, leaf = _best_leaf(G)
    if Xs.shape[0] <= 1:
        return leaf_sum, leaf
    best = _best_single_split(Xs, G, features)
    if best is not None and best[0] > leaf_sum:
        val, j, t, lt, rt = best
        return val, Split(j, t, Leaf(lt), Leaf(rt))
    return leaf_sum, leaf


def _solve_depth2(Xs, G, features):
    """Exact depth-2 search, vectorized over all top-split prefixes."""
    m, d = G.shape
    leaf_sum, leaf = _best_leaf(G)
    if m <= 1:
        return leaf_sum, leaf
    best_val, best_split = -np.inf, None
    for j in features:
        srt = np.argsort(Xs[:, j], kind="stable")
        xs = Xs[srt, j]
        bpos = np.flatnonzero(xs[:-1] < xs[1:])
        if bpos.size == 0:
            continue
        svals = bpos + 1  # prefix lengths at candidate cuts
        gj = G[srt]
        csj = np.cumsum(gj, axis=0)
        tot = csj[-1]
        pre_tot = csj[bpos]  # (S, d)
        suf_tot = tot[None, :] - pre_tot
        left_best = pre_tot.max(axis=1)  # leaf option per prefix
        right_best = suf_tot.max(axis=1)
        rank = np.empty(m, dtype=np.int64)
        rank[srt] = np.arange(m)
        for j2 in features:
            srt2 = np.argsort(Xs[:, j2], kind="stable")
            xs2 = Xs[srt2, j2]
            bpos2 = np.flatnonzero(xs2[:-1] < xs2[1:])
            if bpos2.size == 0:
                continue
            pos_in_j = rank[srt2]
            g2 = G[srt2]
            full_cum = np.cumsum(g2, axis=0)
            for lo in range(0, svals.size, _DEPTH2_CHUNK):
                sl = slice(lo, min(lo + _DEPTH2_CHUNK, svals.size))
                member = pos_in_j[None, :] < svals[sl, None]  # (c, m)
                cum = np.cumsum(member[:, :, None] * g2[None, :, :], axis=1)
                A = cum[:, bpos2, :]  # (c, B, d) left-of-cut sums within prefix
                totL = pre_tot[sl][:, None, :]
                splitL = (A.max(axis=2) + (totL - A).max(axis=2)).max(axis=1)
                AR = full_cum[None, bpos2, :] - A  # within-suffix sums
                totR = suf_tot[sl][:, None, :]
                splitR = (AR.max(axis=2) + (totR - AR).max(axis=2)).max(axis=1)
                np.maximum(left_best[sl], splitL, out=left_best[sl])
                np.maximum(right_best[sl], splitR, out=right_best[sl])
        vals = left_best + right_best
        k = int(np.argmax(vals))
        if vals[k] > best_val:
            best_val = float(vals[k])
            best_split = (j, 0.5 * (xs[bpos[k]] + xs[bpos[k] + 1]))
    if best_split is None or best_val <= leaf_sum:
        return leaf_sum, leaf
    j, t = best_split
    go_left = Xs[:, j] <= t
    lval, lnode = _solve_depth1(Xs[go_left], G[go_left], features)
    rval, rnode = _solve_depth1(Xs[~go_left], G[~go_left], features)
    if lval + rval <= leaf_sum:
        return leaf_sum, leaf
    return lval + rval, Split(j, float(t), lnode, rnode)


def _solve_exact(Xs, G, features, depth):
    """Exact maximizer over trees of depth <= depth on a row subset."""
    m = Xs.shape[0]
    leaf_sum, leaf = _best_leaf(G)
    if depth == 0 or m <= 1:
        return leaf_sum, leaf
    if depth == 1:
        return _solve_depth1(Xs, G, features)
    if depth == 2:
        return _solve_depth2(Xs, G, features)
    best_val, best_node = leaf_sum, leaf
    for j in features:
        srt = np.argsort(Xs[:, j], kind="stable")
        xs = Xs[srt, j]
        bpos = np.flatnonzero(xs[:-1] < xs[1:])
        for i in bpos:
            thresh = 0.5 * (xs[i] + xs[i + 1])
            go_left = Xs[:, j] <= thresh
            lval, lnode = _solve_exact(Xs[go_left], G[go_left], features, depth - 1)
            rval, rnode = _solve_exact(Xs[~go_left], G[~go_left], features, depth - 1)
            if lval + rval > best_val:
                best_val = lval + rval
                best_node = Split(j, float(thresh), lnode, rnode)
    return best_val, best_node


def _prepare(X, scores, lam, cfg: TreeFitConfig):
    X = np.asarray(X, dtype=float)
    gamma = _score_array(scores)
    if X.ndim != 2 or gamma.ndim != 3 or X.shape[0] != gamma.shape[0]:
        raise ValidationError("X must be n x p and scores n x d x N_y")
    weights = check_weights(lam, gamma.shape[2])
    G = gamma @ weights  # (n, d) weighted scores
    if cfg.feature_mask is not None:
        features = sorted(int(j) for j in cfg.feature_mask)
        if features and (features[0] < 0 or features[-1] >= X.shape[1]):
            raise ValidationError("feature mask index out of range")
    else:
        features = list(range(X.shape[1]))
    return X, G, features


def fit_greedy(X, scores, lam, cfg: TreeFitConfig) -> PolicyTree:
    """Myopic fitter: each node takes the best single split, recursing."""
    if cfg.kind != "greedy":
        raise ValidationError("config kind must be 'greedy'")
    X, G, features = _prepare(X, scores, lam, cfg)
    eps_sum = cfg.value_epsilon * X.shape[0]

    def build(Xs, Gs, depth) -> Node:
        leaf_sum, leaf = _best_leaf(Gs)
        if depth == 0 or Xs.shape[0] <= 1:
            return leaf
        best = _best_single_split(Xs, Gs, features)
        if best is None or best[0] <= leaf_sum + eps_sum:
            return leaf
        _, j, t, _, _ = best
        go_left = Xs[:, j] <= t
        return Split(
            j,
            t,
            build(Xs[go_left], Gs[go_left], depth - 1),
            build(Xs[~go_left], Gs[~go_left], depth - 1),
        )

    return PolicyTree(build(X, G, cfg.depth), X.shape[1])


def fit_hybrid(X, scores, lam, cfg: TreeFitConfig) -> PolicyTree:
    """Lookahead fitter: picks each split by exact search over the next
    ``lookahead`` levels, commits only the top split, then recurses."""
    if cfg.kind != "hybrid":
        raise ValidationError("config kind must be 'hybrid'")
    X, G, features = _prepare(X, scores, lam, cfg)
    eps_sum = cfg.value_epsilon * X.shape[0]

    def build(Xs, Gs, depth) -> Node:
        leaf_sum, leaf = _best_leaf(Gs)
        if depth == 0 or Xs.shape[0] <= 1:
            return leaf
        horizon = min(cfg.lookahead, depth)
        val, node = _solve_exact(Xs, Gs, features, horizon)
        if isinstance(node, Leaf) or val <= leaf_sum + eps_sum:
            return leaf
        go_left = Xs[:, node.feature] <= node.threshold
        return Split(
            node.feature,
            node.threshold,
            build(Xs[go_left], Gs[go_left], depth - 1),
            build(Xs[~go_left], Gs[~go_left], depth - 1),
        )

    return PolicyTree(build(X, G, cfg.depth), X.shape[1])


def fit_optimal(X, scores, lam, cfg: TreeFitConfig) -> PolicyTree:
    """Exact maximizer over all depth-limited axis-aligned trees."""
    if cfg.kind != "optimal":
        raise ValidationError("config kind must be 'optimal'")
    X, G, features = _prepare(X, scores, lam, cfg)
    n = X.shape[0]
    cost = (len(features) * n) ** cfg.depth * (math.log2(max(n, 2)) + G.shape[1])
    if cost > cfg.feasibility_limit:
        raise FeasibilityError(
            f"exact search cost ~{cost:.2e} exceeds limit {cfg.feasibility_limit:.2e}; "
            "use the greedy or hybrid fitter, or raise feasibility_limit"
        )
    _, root = _solve_exact(X, G, features, cfg.depth)
    return PolicyTree(root, X.shape[1])


_FITTERS = {"greedy": fit_greedy, "hybrid": fit_hybrid, "optimal": fit_optimal}


def fit_tree(X, scores, lam, cfg: TreeFitConfig) -> PolicyTree:
    return _FITTERS[cfg.kind](X, scores, lam, cfg)


# ---------------------------------------------------------------------------
# Serialization


def tree_to_dict(tree: PolicyTree) -> dict:
    def enc(node: Node) -> dict:
        if isinstance(node, Leaf):
            return {"leaf": {"treatment": node.treatment}}
        return {
            "split": {
                "feature": node.feature,
                "threshold": node.threshold,
                "left": enc(node.left),
                "right": enc(node.right),
            }
        }

    return {"n_features": tree.n_features, "tree": enc(tree.root)}


def tree_from_dict(payload: dict) -> PolicyTree:
    def dec(node: dict) -> Node:
        if "leaf" in node:
            return Leaf(int(node["leaf"]["treatment"]))
        if "split" in node:
            s = node["split"]
            return Split(int(s["feature"]), float(s["threshold"]), dec(s["left"]), dec(s["right"]))
        raise ValidationError("tree node must contain 'leaf' or 'split'")

    return PolicyTree(dec(payload["tree"]), int(payload["n_features"]))


def export_tree(tree: PolicyTree, feature_names: Sequence[str], format: str = "text") -> str:
    """Render a tree as indented rules or GraphViz DOT."""
    if len(feature_names) != tree.n_features:
        raise ValidationError("need one feature name per covariate")
    if format == "text":
        lines: list[str] = []

        def render(node: Node, indent: int) -> None:
            pad = "  " * indent
            if isinstance(node, Leaf):
                lines.append(f"{pad}assign treatment {node.treatment}")
                return
            lines.append(f"{pad}if {feature_names[node.feature]} <= {node.threshold!r}:")
            render(node.left, indent + 1)
            lines.append(f"{pad}else:")
            render(node.right, indent + 1)

        render(tree.root, 0)
        return "\n".join(lines) + "\n"
    if format == "dot":
        lines = ["digraph policy_tree {", "  node [shape=box];"]
        counter = [0]

        def emit(node: Node) -> int:
            nid = counter[0]
            counter[0] += 1
            if isinstance(node, Leaf):
                lines.append(f'  n{nid} [label="assign treatment {node.treatment}"];')
                return nid
            lines.append(
                f'  n{nid} [label="{feature_names[node.feature]} <= {node.threshold:g}"];'
            )
            left_id = emit(node.left)
            right_id = emit(node.right)
            lines.append(f'  n{nid} -> n{left_id} [label="yes"];')
            lines.append(f'  n{nid} -> n{right_id} [label="no"];')
            return nid

        emit(tree.root)
        lines.append("}")
        return "\n".join(lines) + "\n"
    raise ValidationError(f"unknown export format {format!r}")


def parse_tree_text(text: str, feature_names: Sequence[str]) -> PolicyTree:
    """Inverse of text export; reconstructs an apply-equivalent tree."""
    name_to_idx = {name: j for j, name in enumerate(feature_names)}
    raw = [ln for ln in text.splitlines() if ln.strip()]
    items = [((len(ln) - len(ln.lstrip())) // 2, ln.strip()) for ln in raw]
    pos = [0]

    def parse(indent: int) -> Node:
        level, line = items[pos[0]]
        if level != indent:
            raise ValidationError(f"bad indentation in tree text at line {pos[0]}")
        pos[0] += 1
        if line.startswith("assign treatment "):
            return Leaf(int(line.removeprefix("assign treatment ")))
        if line.startswith("if ") and line.endswith(":"):
            cond = line[3:-1]
            name, _, rest = cond.partition(" <= ")
            if name not in name_to_idx:
                raise ValidationError(f"unknown feature name {name!r} in tree text")
            left = parse(indent + 1)
            else_level, else_line = items[pos[0]]
            if else_line != "else:" or else_level != indent:
                raise ValidationError("expected 'else:' branch in tree text")
            pos[0] += 1
            right = parse(indent + 1)
            return Split(name_to_idx[name], float(rest), left, right)
        raise ValidationError(f"cannot parse tree text line: {line!r}")

    root = parse(0)
    if pos[0] != len(items):
        raise ValidationError("trailing content in tree text")
    return PolicyTree(root, len(feature_names))
