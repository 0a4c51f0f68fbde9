"""Non-dominated set maintenance and hypervolume (maximization)."""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np
import pandas as pd

from .errors import ValidationError


@dataclass(frozen=True)
class WeightVector:
    """Point on the outcome-weight simplex."""

    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 1 or vals.size < 1:
            raise ValidationError("weights must be a non-empty vector")
        if np.any(vals < 0):
            raise ValidationError("weights must be non-negative")
        if abs(vals.sum() - 1.0) > 1e-9:
            raise ValidationError(f"weights must sum to 1 within 1e-9, got {vals.sum()!r}")
        object.__setattr__(self, "values", vals)

    @property
    def simplex_coords(self) -> np.ndarray:
        """First N_y - 1 components; the last is redundant."""
        return self.values[:-1]

    @classmethod
    def from_simplex_coords(cls, coords) -> "WeightVector":
        coords = np.asarray(coords, dtype=float)
        last = 1.0 - coords.sum()
        # guard tiny negative overshoot from float arithmetic
        if -1e-9 < last < 0.0:
            last = 0.0
        return cls(np.append(coords, last))

    def __eq__(self, other):
        return isinstance(other, WeightVector) and np.array_equal(self.values, other.values)


def as_weight_vector(lam, n_outcomes: Optional[int] = None) -> WeightVector:
    wv = lam if isinstance(lam, WeightVector) else WeightVector(np.asarray(lam, dtype=float))
    if n_outcomes is not None and wv.values.size != n_outcomes:
        raise ValidationError(f"expected {n_outcomes} weights, got {wv.values.size}")
    return wv


@dataclass
class EvaluatedPoint:
    """One evaluated weighting: per-outcome values and bootstrap SEs."""

    lam: WeightVector
    values: np.ndarray
    ses: np.ndarray
    kind: str = ""
    fit_seconds: float = 0.0
    iteration: int = 0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.ses = np.asarray(self.ses, dtype=float)
        if not np.all(np.isfinite(self.values)):
            raise ValidationError("point values must be finite")
        if self.ses.shape != self.values.shape or np.any(self.ses < 0):
            raise ValidationError("SEs must be non-negative and match values")


def dominates(a, b) -> bool:
    """True iff a is at least as good everywhere and better somewhere."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValidationError("dominance needs equal-length vectors")
    return bool(np.all(a >= b) and np.any(a > b))


def nondominated_mask(values: np.ndarray) -> np.ndarray:
    """Boolean mask of rows not strictly dominated by any other row."""
    V = np.asarray(values, dtype=float)
    if V.shape[0] == 0:
        return np.zeros(0, dtype=bool)
    ge = np.all(V[:, None, :] >= V[None, :, :], axis=2)  # ge[j, i]: j >= i everywhere
    gt = np.any(V[:, None, :] > V[None, :, :], axis=2)
    return ~np.any(ge & gt, axis=0)


@dataclass
class ParetoSet:
    """Ordered non-dominated set of evaluated points."""

    points: list = field(default_factory=list)

    def values_array(self) -> np.ndarray:
        if not self.points:
            return np.zeros((0, 0))
        return np.array([pt.values for pt in self.points])

    def __len__(self) -> int:
        return len(self.points)

    def __iter__(self):
        return iter(self.points)


def update_pareto(pset: ParetoSet, point: EvaluatedPoint) -> ParetoSet:
    """Insert a point, dropping any members it newly dominates.

    Returns a fresh set; the input is not modified. A point dominated
    by an existing member leaves the set unchanged.
    """
    for member in pset.points:
        if dominates(member.values, point.values):
            return ParetoSet(list(pset.points))
    kept = [m for m in pset.points if not dominates(point.values, m.values)]
    kept.append(point)
    return ParetoSet(kept)


# ---------------------------------------------------------------------------
# Hypervolume


def _hv_2d(V: np.ndarray, ref: np.ndarray) -> float:
    xs, ys = staircase_2d(V)
    widths = np.diff(np.append(xs, ref[0])) * -1.0
    return float(np.sum(widths * (ys - ref[1])))


def staircase_2d(V: np.ndarray):
    """Non-dominated points as (x descending, y ascending) arrays."""
    keep = nondominated_mask(V)
    V = np.unique(V[keep], axis=0)
    order = np.argsort(-V[:, 0], kind="stable")
    V = V[order]
    return V[:, 0], V[:, 1]


def _hv_recursive(V: np.ndarray, ref: np.ndarray) -> float:
    if V.shape[0] == 0:
        return 0.0
    k = V.shape[1]
    if k == 1:
        return float(V[:, 0].max() - ref[0])
    if k == 2:
        return _hv_2d(V, ref)
    order = np.argsort(-V[:, -1], kind="stable")
    V = V[order]
    zs = V[:, -1]
    total = 0.0
    for i in range(V.shape[0]):
        z_lo = zs[i + 1] if i + 1 < V.shape[0] else ref[-1]
        thickness = zs[i] - z_lo
        if thickness <= 0:
            continue
        slab = V[: i + 1, :-1]
        total += thickness * _hv_recursive(slab[nondominated_mask(slab)], ref[:-1])
    return total


def hypervolume(points, ref) -> float:
    """Lebesgue measure of the union of boxes [ref, value] over members.

    Members falling below the reference point in any coordinate
    contribute nothing and are skipped with a warning.
    """
    if isinstance(points, ParetoSet):
        V = points.values_array()
    else:
        V = np.asarray(points, dtype=float)
    ref = np.asarray(ref, dtype=float)
    if V.shape[0] == 0:
        return 0.0
    if V.shape[1] != ref.size:
        raise ValidationError("reference point dimension must match values")
    ok = np.all(V >= ref, axis=1)
    if not ok.all():
        warnings.warn(
            f"{int((~ok).sum())} point(s) fall below the reference point and are skipped"
        )
        V = V[ok]
    if V.shape[0] == 0:
        return 0.0
    return _hv_recursive(V[nondominated_mask(V)], ref)


def hvi_2d(xs: np.ndarray, ys: np.ndarray, cand: np.ndarray, ref) -> np.ndarray:
    """Exclusive hypervolume of candidate points over a 2-d staircase.

    ``xs``/``ys`` are a staircase from :func:`staircase_2d`; ``cand``
    is (C, 2). Vectorized over candidates.
    """
    a = cand[:, 0][:, None]
    b = cand[:, 1][:, None]
    rx, ry = float(ref[0]), float(ref[1])
    box = np.clip(cand[:, 0] - rx, 0.0, None) * np.clip(cand[:, 1] - ry, 0.0, None)
    if xs.size == 0:
        return box
    xs_lo = np.append(xs[1:], rx)
    widths = np.minimum(xs[None, :], a) - np.minimum(xs_lo[None, :], a)
    heights = np.clip(np.minimum(ys[None, :], b) - ry, 0.0, None)
    covered = np.sum(np.clip(widths, 0.0, None) * heights, axis=1)
    return np.clip(box - covered, 0.0, None)


def hvi_3d(F: np.ndarray, cand: np.ndarray, ref) -> np.ndarray:
    """Exclusive hypervolume of candidate points over a 3-d frontier.

    ``F`` is (n, 3) with every row at or above ``ref``; ``cand`` is
    (C, 3). Decomposes the dominated region into slabs along the third
    axis, reusing the 2-d staircase within each slab. Vectorized over
    candidates.
    """
    cand = np.asarray(cand, dtype=float)
    ref = np.asarray(ref, dtype=float)
    if F.shape[0] == 0:
        return np.prod(np.clip(cand - ref[None, :], 0.0, None), axis=1)
    zs = np.unique(F[:, 2])
    lowers = np.concatenate([[ref[2]], zs])
    uppers = np.concatenate([zs, [np.inf]])
    c2 = cand[:, 2]
    out = np.zeros(cand.shape[0])
    free_area = np.clip(cand[:, 0] - ref[0], 0.0, None) * np.clip(
        cand[:, 1] - ref[1], 0.0, None
    )
    for a, b in zip(lowers, uppers):
        # a candidate occupies heights [ref_2, c_2]; its overlap with
        # the slab (a, b] has thickness min(c_2, b) - a
        h = np.clip(np.minimum(c2, b) - a, 0.0, None)
        if not np.any(h > 0):
            continue
        active = F[F[:, 2] >= b] if np.isfinite(b) else F[:0]
        if active.shape[0]:
            xs, ys = staircase_2d(active[:, :2])
            area = hvi_2d(xs, ys, cand[:, :2], ref[:2])
        else:
            area = free_area
        out += h * area
    return out


def default_reference_point(values: np.ndarray, margin: float = 0.01) -> np.ndarray:
    """Component-wise minimum minus a share of each component's range."""
    V = np.asarray(values, dtype=float)
    lo = V.min(axis=0)
    span = V.max(axis=0) - lo
    span = np.where(span > 0, span, 1e-9)  # degenerate axis guard
    return lo - margin * span


# ---------------------------------------------------------------------------
# Frontier serialization


def frontier_records(pset: ParetoSet) -> list:
    return [
        {
            "lambda": pt.lam.values.tolist(),
            "values": pt.values.tolist(),
            "ses": pt.ses.tolist(),
            "kind": pt.kind,
            "iteration": pt.iteration,
        }
        for pt in pset.points
    ]


def frontier_to_json(pset: ParetoSet, ref=None) -> str:
    if ref is None and len(pset) > 0:
        ref = default_reference_point(pset.values_array())
    hv = hypervolume(pset, ref) if len(pset) > 0 else 0.0
    payload = {
        "reference_point": None if ref is None else np.asarray(ref, dtype=float).tolist(),
        "hypervolume": hv,
        "points": frontier_records(pset),
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def frontier_to_frame(pset: ParetoSet) -> pd.DataFrame:
    rows = []
    for pt in pset.points:
        row = {"iteration": pt.iteration, "kind": pt.kind}
        row.update({f"lambda_{i}": v for i, v in enumerate(pt.lam.values)})
        row.update({f"value_{i}": v for i, v in enumerate(pt.values)})
        row.update({f"se_{i}": v for i, v in enumerate(pt.ses)})
        rows.append(row)
    return pd.DataFrame(rows)
