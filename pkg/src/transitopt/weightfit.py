"""Scalarization: least-squares weight inference from network ratings, plus
the weighted and uniform (min-max normalized) scalarizers."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .evaluation import OBJECTIVE_NAMES, ObjectiveVector

N_OBJECTIVES = len(OBJECTIVE_NAMES)


class FitError(ValueError):
    """Rating data cannot support a least-squares fit."""


@dataclass(frozen=True)
class RatingRecord:
    network_id: str
    rater_id: str
    rating: float

    def validate(self, max_rating: float) -> None:
        if not (1.0 <= self.rating <= max_rating):
            raise ValueError(
                f"rating {self.rating} for {self.network_id} outside [1, {max_rating}]"
            )


def aggregate_ratings(records: Iterable[RatingRecord]) -> dict[str, float]:
    """Mean rating per network, last record winning per (network, rater)."""
    latest: dict[tuple[str, str], float] = {}
    for rec in records:
        latest[(rec.network_id, rec.rater_id)] = rec.rating
    sums: dict[str, list[float]] = {}
    for (network_id, _), rating in latest.items():
        sums.setdefault(network_id, []).append(rating)
    return {nid: sum(vals) / len(vals) for nid, vals in sums.items()}


@dataclass(frozen=True)
class WeightVector:
    """Affine scalarization weights: intercept plus one weight per objective,
    aligned to (total length, unsatisfied demand, in-vehicle time, transfers)."""

    w0: float
    w1: float
    w2: float
    w3: float
    w4: float

    def __post_init__(self) -> None:
        if any(not math.isfinite(w) for w in self.as_tuple()):
            raise ValueError("weights must be finite")

    def as_tuple(self) -> tuple[float, float, float, float, float]:
        return (self.w0, self.w1, self.w2, self.w3, self.w4)

    def as_dict(self) -> dict[str, float]:
        return {f"w{i}": w for i, w in enumerate(self.as_tuple())}

    @classmethod
    def from_dict(cls, d: dict) -> "WeightVector":
        return cls(*(float(d[f"w{i}"]) for i in range(5)))


@dataclass(frozen=True)
class FitResult:
    weights: WeightVector
    residuals: tuple[float, ...]
    residual_norm: float
    n_samples: int


def design_matrix(samples: Sequence[tuple[ObjectiveVector, float]]) -> np.ndarray:
    return np.array([(1.0, *vec.as_tuple()) for vec, _ in samples], dtype=float)


def fit_weights(
    samples: Sequence[tuple[ObjectiveVector, float]], max_rating: float
) -> FitResult:
    """Least-squares weights from (objectives, mean rating) samples.

    Targets are ``max_rating`` minus the rating so better-rated networks get
    lower scalarized values. Solved by QR-based least squares, equal to the
    normal-equations solution on full-column-rank designs.
    """
    if len(samples) < N_OBJECTIVES + 2:
        raise FitError(
            f"need at least {N_OBJECTIVES + 2} rated networks, got {len(samples)}"
        )
    x = design_matrix(samples)
    t = np.array([max_rating - rating for _, rating in samples], dtype=float)
    if np.linalg.matrix_rank(x) < x.shape[1]:
        raise FitError(
            "design matrix is rank deficient; rate more (and more varied) networks "
            "or normalize the objectives"
        )
    w, *_ = np.linalg.lstsq(x, t, rcond=None)
    residuals = t - x @ w
    return FitResult(
        weights=WeightVector(*(float(v) for v in w)),
        residuals=tuple(float(r) for r in residuals),
        residual_norm=float(np.linalg.norm(residuals)),
        n_samples=len(samples),
    )


def scalarize_weighted(v: ObjectiveVector, w: WeightVector) -> float:
    """Affine combination: intercept plus weighted objectives."""
    vals = v.as_tuple()
    return w.w0 + w.w1 * vals[0] + w.w2 * vals[1] + w.w3 * vals[2] + w.w4 * vals[3]


Bounds = Sequence[tuple[float, float]]


def objective_bounds(vectors: Iterable[ObjectiveVector]) -> list[tuple[float, float]]:
    """Per-objective (min, max) over a set of vectors, e.g. the Pareto archive."""
    tuples = [v.as_tuple() for v in vectors]
    if not tuples:
        raise ValueError("cannot take bounds of an empty set")
    return [
        (min(v[i] for v in tuples), max(v[i] for v in tuples))
        for i in range(N_OBJECTIVES)
    ]


def scalarize_uniform(v: ObjectiveVector, bounds: Bounds) -> float:
    """Sum of min-max normalized objectives; degenerate objectives contribute 0."""
    if len(bounds) != N_OBJECTIVES:
        raise ValueError("bounds must cover every objective")
    total = 0.0
    for value, (lo, hi) in zip(v.as_tuple(), bounds):
        if not (math.isfinite(lo) and math.isfinite(hi)) or hi < lo:
            raise ValueError(f"bad normalization bounds ({lo}, {hi})")
        if hi > lo:
            total += (value - lo) / (hi - lo)
    return total
