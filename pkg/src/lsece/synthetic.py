"""Synthetic populations with known calibration behaviour.

``two_point``: X is -1/2 or +1/2 with equal probability and Y = X + 1/2, so
any constant predictor of 1/2 is calibrated while arbitrarily small splits of
that constant are maximally miscalibrated.

``counterexample``: X1 ~ Uni[0, 1]; given X1, X2 lands in [0.5, 1) with
probability X1 and in [0, 0.5) otherwise; Y = 1{X2 >= 0.5}. The predictor X1
is calibrated with no repeated values, yet predictors within any sup-distance
of it can have ECE near 1/3.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (DEFAULT_CLAMP_TOL, SIGMOID, BinaryPredictionSet, LinkFunction,
                   make_rng, probs_to_logits, _readonly)

DISTRIBUTIONS = ("two-point", "counterexample")
DEFAULT_ALPHA = 1e-3


@dataclass(frozen=True, eq=False)
class TwoPointSample:
    x: np.ndarray
    y: np.ndarray

    def __len__(self):
        return int(self.x.size)


@dataclass(frozen=True, eq=False)
class CounterexampleSample:
    x1: np.ndarray
    x2: np.ndarray
    y: np.ndarray

    def __len__(self):
        return int(self.x1.size)


def _check_n(n):
    if isinstance(n, bool) or int(n) != n or n < 1:
        raise ValueError(f"n must be a positive integer, got {n!r}")
    return int(n)


def sample_two_point(n: int, seed: int = 0) -> TwoPointSample:
    rng = make_rng(seed)
    y = rng.integers(0, 2, size=_check_n(n))
    return TwoPointSample(_readonly(y - 0.5), _readonly(y))


def two_point_logit_predictor(alpha: float = DEFAULT_ALPHA):
    """Logit map ``x -> alpha * x``; through the sigmoid it predicts 1/2 +- eps."""
    alpha = float(alpha)
    if not np.isfinite(alpha):
        raise ValueError("alpha must be finite")

    def h(x):
        return alpha * np.asarray(x, dtype=np.float64)

    return h


def sample_counterexample(n: int, seed: int = 0) -> CounterexampleSample:
    n = _check_n(n)
    rng = make_rng(seed)
    x1 = rng.random(n)
    upper = rng.random(n) < x1
    u = rng.random(n)
    x2 = np.where(upper, 0.5 + 0.5 * u, 0.5 * u)
    y = (x2 >= 0.5).astype(np.int64)
    return CounterexampleSample(_readonly(x1), _readonly(x2), _readonly(y))


def _cells(delta):
    if not (np.isfinite(delta) and 0 < delta < 1):
        raise ValueError(f"delta must be 1/k for an integer k >= 2, got {delta!r}")
    k = round(1.0 / delta)
    if k < 2 or abs(1.0 / k - delta) > 1e-12:
        raise ValueError(f"delta must be 1/k for an integer k >= 2, got {delta!r}")
    return k


def perturbed_branches(z, delta: float, variant: str = "printed"):
    """The two branch functions ``(g_0(z), g_1(z))`` of the perturbed predictor.

    Cell ``c = floor(z / delta)``. The ``printed`` variant places the branches
    at ``(c + 1 - delta/4) delta`` and ``(c + delta/4) delta``; the ``quarter``
    variant uses ``3/4`` and ``1/4`` of the cell instead. Outputs are clipped
    into [0, 1], which only matters at ``z = 1``.
    """
    k = _cells(delta)
    d = 1.0 / k
    c = np.floor(np.asarray(z, dtype=np.float64) * k)
    if variant == "printed":
        g0 = (c + 1.0 - d / 4.0) * d
        g1 = (c + d / 4.0) * d
    elif variant == "quarter":
        g0 = (c + 0.75) * d
        g1 = (c + 0.25) * d
    else:
        raise ValueError(f"unknown variant {variant!r}")
    return np.clip(g0, 0.0, 1.0), np.clip(g1, 0.0, 1.0)


def perturbed_predictor(delta: float, variant: str = "printed"):
    """Predictor ``g(x1, x2)`` within ``delta`` of ``x1`` that separates the labels."""
    _cells(delta)

    def g(x1, x2):
        g0, g1 = perturbed_branches(x1, delta, variant)
        return np.where(np.asarray(x2) < 0.5, g0, g1)

    return g


def two_point_predictions(n: int, seed: int = 0, alpha: float = DEFAULT_ALPHA) -> BinaryPredictionSet:
    s = sample_two_point(n, seed)
    return BinaryPredictionSet(two_point_logit_predictor(alpha)(s.x), s.y)


def counterexample_predictions(n: int, seed: int = 0, delta: float | None = None,
                               link: LinkFunction = SIGMOID,
                               tol: float = DEFAULT_CLAMP_TOL,
                               variant: str = "printed") -> BinaryPredictionSet:
    """Counterexample sample scored by ``x1`` or, with ``delta``, by its perturbation."""
    s = sample_counterexample(n, seed)
    probs = s.x1 if delta is None else perturbed_predictor(delta, variant)(s.x1, s.x2)
    return BinaryPredictionSet(probs_to_logits(probs, link, tol), s.y)


def synthetic_predictions(dist: str, n: int, seed: int = 0, **kwargs) -> BinaryPredictionSet:
    if dist == "two-point":
        return two_point_predictions(n, seed, kwargs.get("alpha", DEFAULT_ALPHA))
    if dist == "counterexample":
        return counterexample_predictions(n, seed, **kwargs)
    raise ValueError(f"unknown distribution {dist!r}; choose from {DISTRIBUTIONS}")
