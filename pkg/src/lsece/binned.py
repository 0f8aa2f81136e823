"""Binned ECE, reliability-diagram statistics, and the top-class reduction."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (DEFAULT_CLAMP_TOL, SIGMOID, BinaryPredictionSet, LinkFunction,
                   MulticlassPredictionSet, probs_to_logits)

SCHEMES = ("uniform", "equal_mass")


@dataclass(frozen=True)
class BinningScheme:
    kind: str = "uniform"
    m: int = 15

    def __post_init__(self):
        kind = self.kind.replace("-", "_")
        if kind not in SCHEMES:
            raise ValueError(f"unknown binning scheme {self.kind!r}")
        if isinstance(self.m, bool) or int(self.m) != self.m or self.m < 1:
            raise ValueError(f"bin count must be a positive integer, got {self.m!r}")
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "m", int(self.m))


@dataclass(frozen=True)
class BinRecord:
    lo: float
    hi: float
    count: int
    mean_conf: float | None
    mean_label: float | None

    @property
    def empty(self) -> bool:
        return self.count == 0


@dataclass(frozen=True)
class ReliabilityDiagram:
    bins: tuple
    n: int
    scheme: BinningScheme

    def ece(self) -> float:
        total = 0.0
        for b in self.bins:
            if b.count:
                total += (b.count / self.n) * abs(b.mean_label - b.mean_conf)
        return total

    def rows(self):
        """``(bin_lo, bin_hi, count, mean_conf, mean_label)`` tuples; None marks an empty bin."""
        return [(b.lo, b.hi, b.count, b.mean_conf, b.mean_label) for b in self.bins]


def _check_probs(probs) -> np.ndarray:
    p = np.asarray(probs, dtype=np.float64).reshape(-1)
    if np.any(np.isnan(p)) or np.any((p < 0) | (p > 1)):
        raise ValueError("probabilities must lie in [0, 1]")
    return p


def _uniform_edges(m: int) -> np.ndarray:
    return np.arange(m + 1, dtype=np.float64) / m


def _equal_mass_order(p, labels):
    # label as secondary key makes tie-breaking independent of input order
    if labels is None:
        return np.argsort(p, kind="stable")
    return np.lexsort((np.asarray(labels), p))


def _assign(p, scheme: BinningScheme, labels=None):
    m = scheme.m
    if scheme.kind == "uniform":
        edges = _uniform_edges(m)
        idx = np.searchsorted(edges, p, side="right") - 1
        return np.clip(idx, 0, m - 1), edges
    n = p.size
    order = _equal_mass_order(p, labels)
    idx = np.empty(n, dtype=np.int64)
    idx[order] = (np.arange(n) * m) // n
    # bin j starts at rank ceil(j n / m); edges are the values found there
    starts = -((-np.arange(m + 1) * n) // m)
    sorted_p = p[order]
    edges = np.ones(m + 1)
    inside = starts < n
    edges[inside] = sorted_p[starts[inside]]
    edges[0], edges[m] = 0.0, 1.0
    return idx, edges


def bin_assignments(probs, scheme: BinningScheme) -> np.ndarray:
    """Bin index for every probability.

    Uniform bins are ``[(j-1)/m, j/m)`` with the last one closed at 1.
    Equal-mass bins give the sample of sorted rank ``r`` the bin
    ``floor(r m / n)``; ties keep their sort order.
    """
    p = _check_probs(probs)
    return _assign(p, scheme)[0]


def reliability(data: BinaryPredictionSet, link: LinkFunction = SIGMOID,
                scheme: BinningScheme = BinningScheme()) -> ReliabilityDiagram:
    p = _check_probs(link.forward(data.logits))
    y = data.labels.astype(np.float64)
    idx, edges = _assign(p, scheme, data.labels)
    m = scheme.m
    counts = np.bincount(idx, minlength=m)
    conf = np.bincount(idx, weights=p, minlength=m)
    hits = np.bincount(idx, weights=y, minlength=m)
    bins = []
    for j in range(m):
        c = int(counts[j])
        bins.append(BinRecord(float(edges[j]), float(edges[j + 1]), c,
                              float(conf[j] / c) if c else None,
                              float(hits[j] / c) if c else None))
    return ReliabilityDiagram(tuple(bins), data.n, scheme)


def binned_ece(data: BinaryPredictionSet, link: LinkFunction = SIGMOID,
               scheme: BinningScheme = BinningScheme()) -> float:
    """Plug-in ECE over a partition of [0, 1]; empty bins contribute nothing."""
    return reliability(data, link, scheme).ece()


def top_class_reduce(data: MulticlassPredictionSet, link: LinkFunction = SIGMOID,
                     tol: float = DEFAULT_CLAMP_TOL) -> BinaryPredictionSet:
    """Confidence-calibration view of a multiclass prediction set.

    The label becomes 1 when the true class is among the arg-max classes, so a
    tie that includes the true class counts as correct.
    """
    conf = data.probs.max(axis=1)
    true_p = data.probs[np.arange(data.n), data.labels]
    correct = (true_p == conf).astype(np.int64)
    return BinaryPredictionSet(probs_to_logits(conf, link, tol), correct)
