"""Shared prediction-set types, link functions, noise kernels and seeding."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import special, stats

DEFAULT_CLAMP_TOL = 1e-7
MAX_SEED = 2**64 - 1


class CalibrationError(Exception):
    """Base class for errors raised by this package."""


class ValidationError(CalibrationError, ValueError):
    """Input data violates a documented invariant."""


class PreconditionError(CalibrationError, ValueError):
    """An operation was asked to run outside its documented domain."""


class DegenerateWeightsError(CalibrationError, ArithmeticError):
    """Every kernel weight vanished, so a conditional mean is undefined."""


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class BinaryPredictionSet:
    """Paired logits and binary labels; the empirical measure of a sample.

    Arrays are copied on construction and frozen, so instances can be shared
    between threads.
    """

    logits: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        logits = np.array(self.logits, dtype=np.float64).reshape(-1)
        raw = np.asarray(self.labels).reshape(-1)
        if logits.size == 0:
            raise ValidationError("prediction set must contain at least one sample")
        if raw.size != logits.size:
            raise ValidationError(
                f"logits and labels differ in length ({logits.size} vs {raw.size})")
        if not np.all(np.isfinite(logits)):
            bad = int(np.flatnonzero(~np.isfinite(logits))[0])
            raise ValidationError(f"non-finite logit at index {bad}")
        labels = raw.astype(np.int64)
        if raw.dtype.kind == "f" and not np.array_equal(raw, labels):
            raise ValidationError("labels must be exactly 0 or 1")
        if np.any((labels != 0) & (labels != 1)):
            raise ValidationError("labels must be exactly 0 or 1")
        object.__setattr__(self, "logits", _readonly(logits))
        object.__setattr__(self, "labels", _readonly(labels))

    @property
    def n(self) -> int:
        return int(self.logits.size)

    def __len__(self) -> int:
        return self.n

    def probabilities(self, link: "LinkFunction | None" = None) -> np.ndarray:
        return (link or SIGMOID).forward(self.logits)

    @classmethod
    def from_probabilities(cls, probs, labels, link: "LinkFunction | None" = None,
                           tol: float = DEFAULT_CLAMP_TOL) -> "BinaryPredictionSet":
        return cls(probs_to_logits(probs, link or SIGMOID, tol), labels)


@dataclass(frozen=True, eq=False)
class MulticlassPredictionSet:
    """Rows of class probabilities with integer labels in ``range(k)``."""

    probs: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        probs = np.array(self.probs, dtype=np.float64)
        raw = np.asarray(self.labels).reshape(-1)
        if probs.ndim != 2:
            raise ValidationError("probs must be a 2-d array of shape (n, k)")
        n, k = probs.shape
        if n == 0:
            raise ValidationError("prediction set must contain at least one sample")
        if k < 2:
            raise ValidationError("need at least two classes")
        if raw.size != n:
            raise ValidationError(f"probs has {n} rows but {raw.size} labels")
        if not np.all(np.isfinite(probs)):
            raise ValidationError("probabilities must be finite")
        if np.any((probs < 0) | (probs > 1)):
            raise ValidationError("probabilities must lie in [0, 1]")
        sums = probs.sum(axis=1)
        off = np.flatnonzero(np.abs(sums - 1.0) > 1e-6)
        if off.size:
            raise ValidationError(f"row {int(off[0])} sums to {sums[off[0]]!r}, not 1")
        labels = raw.astype(np.int64)
        if raw.dtype.kind == "f" and not np.array_equal(raw, labels):
            raise ValidationError("labels must be integers")
        if np.any((labels < 0) | (labels >= k)):
            raise ValidationError(f"labels must lie in [0, {k})")
        object.__setattr__(self, "probs", _readonly(probs))
        object.__setattr__(self, "labels", _readonly(labels))

    @property
    def n(self) -> int:
        return int(self.probs.shape[0])

    @property
    def k(self) -> int:
        return int(self.probs.shape[1])


@dataclass(frozen=True)
class LinkFunction:
    """A strictly increasing map from logits to probabilities.

    ``inverse_derivative`` is the derivative of ``inverse`` with respect to the
    probability, i.e. the Jacobian that turns logit-space densities into
    probability-space densities.
    """

    name: str
    forward: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    inverse: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    inverse_derivative: Callable[[np.ndarray], np.ndarray] = field(repr=False)


def _sigmoid_inverse_derivative(p):
    p = np.asarray(p, dtype=np.float64)
    return 1.0 / (p * (1.0 - p))


def _probit_inverse_derivative(p):
    p = np.asarray(p, dtype=np.float64)
    return 1.0 / stats.norm.pdf(stats.norm.ppf(p))


SIGMOID = LinkFunction("sigmoid", special.expit, special.logit,
                       _sigmoid_inverse_derivative)
PROBIT = LinkFunction("probit", special.ndtr, special.ndtri,
                      _probit_inverse_derivative)
LINKS = {link.name: link for link in (SIGMOID, PROBIT)}


def get_link(name: str) -> LinkFunction:
    try:
        return LINKS[name]
    except KeyError:
        raise ValueError(f"unknown link {name!r}; choose from {sorted(LINKS)}") from None


_BASE_LOG_NORM = {"gaussian": -0.5 * math.log(2 * math.pi), "uniform": 0.0}


@dataclass(frozen=True)
class NoiseKernel:
    """Scaled noise law ``sigma * R`` whose density doubles as a regression kernel.

    ``base`` selects the law of ``R``: a standard normal, or the uniform
    distribution on ``[-1/2, 1/2]``.
    """

    sigma: float
    base: str = "gaussian"

    def __post_init__(self):
        if self.base not in _BASE_LOG_NORM:
            raise ValueError(f"unknown kernel {self.base!r}; choose gaussian or uniform")
        if not (math.isfinite(self.sigma) and self.sigma > 0):
            raise ValueError(f"sigma must be positive and finite, got {self.sigma!r}")
        object.__setattr__(self, "sigma", float(self.sigma))

    @property
    def compact(self) -> bool:
        return self.base == "uniform"

    @property
    def base_sup(self) -> float:
        """Supremum of the unscaled density of R (finite for both bases)."""
        return math.exp(_BASE_LOG_NORM[self.base])

    @property
    def log_norm(self) -> float:
        """Log of the scaled density's peak value."""
        return _BASE_LOG_NORM[self.base] - math.log(self.sigma)

    def log_density(self, u):
        z = np.asarray(u, dtype=np.float64) / self.sigma
        if self.base == "gaussian":
            return self.log_norm - 0.5 * z * z
        return np.where(np.abs(z) <= 0.5, self.log_norm, -np.inf)

    def density(self, u):
        return np.exp(self.log_density(u))

    def sample(self, rng: np.random.Generator, size=None):
        if self.base == "gaussian":
            return self.sigma * rng.standard_normal(size)
        return self.sigma * rng.uniform(-0.5, 0.5, size)


def check_seed(seed) -> int:
    """Validate a 64-bit unsigned seed and return it as a plain int."""
    if isinstance(seed, (bool, np.bool_)) or not isinstance(seed, (int, np.integer)):
        raise ValueError(f"seed must be an integer, got {seed!r}")
    seed = int(seed)
    if not 0 <= seed <= MAX_SEED:
        raise ValueError(f"seed must lie in [0, 2**64), got {seed}")
    return seed


def make_rng(seed, *keys: int) -> np.random.Generator:
    """Independent stream for ``(seed, *keys)``; the same tuple gives the same stream."""
    return np.random.Generator(np.random.PCG64(
        np.random.SeedSequence(check_seed(seed), spawn_key=tuple(int(k) for k in keys))))


def derive_seed(seed, *keys: int) -> int:
    """Mix ``(seed, *keys)`` into a fresh 64-bit seed."""
    ss = np.random.SeedSequence(check_seed(seed), spawn_key=tuple(int(k) for k in keys))
    return int(ss.generate_state(1, np.uint64)[0])


def clamp_probability(p, tol: float = DEFAULT_CLAMP_TOL):
    """Clamp probabilities into ``[tol, 1 - tol]`` so their logits stay finite.

    Accepts scalars or arrays; scalars come back as floats.
    """
    if not (0 < tol < 0.5):
        raise ValueError(f"tol must lie in (0, 0.5), got {tol!r}")
    arr = np.asarray(p, dtype=np.float64)
    if np.any(np.isnan(arr)):
        raise ValueError("cannot clamp NaN")
    if np.any((arr < 0) | (arr > 1)):
        raise ValueError("probabilities must lie in [0, 1]")
    out = np.minimum(np.maximum(arr, tol), 1.0 - tol)
    return float(out) if out.ndim == 0 else out


def probs_to_logits(probs, link: LinkFunction = SIGMOID, tol: float = DEFAULT_CLAMP_TOL):
    return np.asarray(link.inverse(np.asarray(clamp_probability(probs, tol))),
                      dtype=np.float64)
