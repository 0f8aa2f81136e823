"""Exact ECE for finitely supported measures, grouped by level sets.

Both the population form (masses, true conditionals, predictor values) and the
empirical form (a sample with its uniform measure) reduce to the same
computation: partition the support by predicted value, average the target
within each part, and sum mass-weighted absolute gaps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (BinaryPredictionSet, LinkFunction, PreconditionError, SIGMOID,
                   ValidationError, _readonly)

DEFAULT_WITNESS_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class DiscreteDistributionSpec:
    """Finite-support population: point masses, P(Y=1 | X=i), and g(i)."""

    mass: np.ndarray
    true_conditional: np.ndarray
    predictor: np.ndarray

    def __post_init__(self):
        arrays = [np.array(getattr(self, name), dtype=np.float64).reshape(-1)
                  for name in ("mass", "true_conditional", "predictor")]
        mass, cond, pred = arrays
        if mass.size == 0:
            raise ValidationError("support must be nonempty")
        if not (mass.size == cond.size == pred.size):
            raise ValidationError("mass, true_conditional and predictor differ in length")
        if not all(np.all(np.isfinite(a)) for a in arrays):
            raise ValidationError("spec values must be finite")
        if np.any(mass <= 0):
            raise ValidationError("every support point needs positive mass")
        if abs(mass.sum() - 1.0) > 1e-9:
            raise ValidationError(f"masses sum to {mass.sum()!r}, not 1")
        for name, a in (("true_conditional", cond), ("predictor", pred)):
            if np.any((a < 0) | (a > 1)):
                raise ValidationError(f"{name} values must lie in [0, 1]")
        for name, a in zip(("mass", "true_conditional", "predictor"), arrays):
            object.__setattr__(self, name, _readonly(a))

    @property
    def n(self) -> int:
        return int(self.mass.size)

    def with_predictor(self, predictor) -> "DiscreteDistributionSpec":
        return DiscreteDistributionSpec(self.mass, self.true_conditional, predictor)


@dataclass(frozen=True, eq=False)
class LevelSetPartition:
    """Indices grouped by identical value, with per-group mass and target mean.

    ``values[k]`` is the shared value of group ``k`` and ``members[k]`` its
    indices; ``index_group[i]`` maps an index back to its group.
    """

    values: np.ndarray
    members: tuple
    index_group: np.ndarray
    mass: np.ndarray
    mean: np.ndarray | None

    @property
    def groups(self) -> dict:
        return {float(v): m for v, m in zip(self.values, self.members)}

    def __len__(self) -> int:
        return int(self.values.size)

    def sizes(self) -> np.ndarray:
        return np.bincount(self.index_group, minlength=len(self))


def level_sets(values, weights=None, targets=None) -> LevelSetPartition:
    """Partition indices by exact floating-point equality of ``values``.

    No tolerance is applied: two values land in the same group only when they
    are the same double (``0.0`` and ``-0.0`` count as equal).

    Parameters
    ----------
    values : array_like
        Predicted values, one per support point.
    weights : array_like, optional
        Point masses; defaults to uniform weights ``1/n``.
    targets : array_like, optional
        Quantity averaged within each group (labels or true conditionals).
        When omitted, ``mean`` is None.
    """
    v = np.asarray(values, dtype=np.float64).reshape(-1)
    if v.size == 0:
        raise ValueError("values must be nonempty")
    if np.any(np.isnan(v)):
        raise ValueError("cannot form level sets of NaN values")
    uniq, inverse = np.unique(v, return_inverse=True)
    inverse = inverse.reshape(-1)
    w = (np.full(v.size, 1.0 / v.size) if weights is None
         else np.asarray(weights, dtype=np.float64).reshape(-1))
    mass = np.bincount(inverse, weights=w, minlength=uniq.size)
    mean = None
    if targets is not None:
        tgt = np.asarray(targets, dtype=np.float64).reshape(-1)
        mean = np.bincount(inverse, weights=w * tgt, minlength=uniq.size) / mass
    order = np.argsort(inverse, kind="stable")
    splits = np.cumsum(np.bincount(inverse, minlength=uniq.size))[:-1]
    members = tuple(np.split(order, splits))
    return LevelSetPartition(uniq, members, inverse, mass, mean)


def _grouped_ece(values, weights, targets) -> float:
    part = level_sets(values, weights, targets)
    return float(np.sum(part.mass * np.abs(part.mean - part.values)))


def population_ece(spec: DiscreteDistributionSpec) -> float:
    """ECE of ``spec.predictor`` under the finite population ``spec``."""
    return _grouped_ece(spec.predictor, spec.mass, spec.true_conditional)


def empirical_exact_ece(data: BinaryPredictionSet, link: LinkFunction = SIGMOID) -> float:
    """ECE of the sample's own empirical measure, grouped by exact probability.

    For continuous predictors every level set is a singleton, so this collapses
    to ``mean |y_i - p_i|``, which is not a consistent estimate of the
    population ECE.
    """
    probs = np.asarray(link.forward(data.logits), dtype=np.float64)
    return _grouped_ece(probs, None, data.labels)


def discontinuity_witnesses(spec: DiscreteDistributionSpec,
                            tol: float = DEFAULT_WITNESS_TOL) -> list[int]:
    """Indices m where ``|g*(m) - g(m)|`` and ``|E[Y | g(X) = g(m)] - g(m)|`` differ.

    The comparison is made pointwise at each support point. Singleton level
    sets always have equal gaps, so every witness lies in a group of size > 1.
    """
    if not tol > 0:
        raise ValueError(f"tol must be positive, got {tol!r}")
    part = level_sets(spec.predictor, spec.mass, spec.true_conditional)
    group_gap = np.abs(part.mean[part.index_group] - spec.predictor)
    point_gap = np.abs(spec.true_conditional - spec.predictor)
    return [int(i) for i in np.flatnonzero(np.abs(point_gap - group_gap) > tol)]


def perturbation_probe(spec: DiscreteDistributionSpec, index: int, delta: float) -> float:
    """Population ECE after moving ``g(index)`` by ``delta`` onto a fresh value."""
    if not 0 <= index < spec.n:
        raise PreconditionError(f"index {index} outside support of size {spec.n}")
    moved = float(spec.predictor[index]) + float(delta)
    if not 0.0 <= moved <= 1.0:
        raise PreconditionError(f"perturbed value {moved!r} leaves [0, 1]")
    others = np.delete(spec.predictor, index)
    if np.any(others == moved):
        raise PreconditionError(f"perturbed value {moved!r} collides with another point")
    pred = spec.predictor.copy()
    pred[index] = moved
    return population_ece(spec.with_predictor(pred))
