"""Logit-smoothed ECE.

The smoothed confidence is ``rho(h(X) + xi)``. Under the empirical measure,
``E[Y | h + xi = t]`` is a Nadaraya-Watson regression of the labels on the
logits with the noise density as kernel; the Jacobian of ``rho^-1`` appears in
both numerator and denominator density and cancels. The outer expectation is
estimated by Monte Carlo over (sample index, noise) pairs.

Queries run against a compressed index of the data: distinct logits with
their counts and positive-label counts. Gaussian weights are summed only over
the logits whose log-weight is within ``LOG_WEIGHT_CUTOFF`` of the nearest
one, and are normalised by that nearest weight, so the ratio stays finite even
when every raw weight would underflow. The dropped tail is below
``n * exp(-LOG_WEIGHT_CUTOFF)`` relative to the kept mass.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numba
import numpy as np

from .core import (SIGMOID, BinaryPredictionSet, DegenerateWeightsError, LinkFunction,
                   NoiseKernel, check_seed, make_rng)

LOG_WEIGHT_CUTOFF = 60.0
DEFAULT_MC_SAMPLES = 10_000
DEFAULT_CHUNK_SIZE = 2048
# widen compact windows by this relative amount to absorb rounding in t = h + xi
_COMPACT_SLACK = 1e-12


@numba.njit(cache=True, nogil=True)
def _gaussian_sums(ts, u, counts, positives, sigma, cutoff):
    """Per query: kernel sums over counts and positives, scaled by the peak weight.

    Returns ``(num, den, log_scale)`` where the true sums are
    ``num * exp(log_scale)`` and ``den * exp(log_scale)`` (without the kernel's
    normalising constant).
    """
    q = ts.size
    m = u.size
    num = np.empty(q)
    den = np.empty(q)
    log_scale = np.empty(q)
    reach = 2.0 * sigma * sigma * cutoff
    for k in range(q):
        t = ts[k]
        j = np.searchsorted(u, t)
        dmin = np.inf
        if j < m:
            dmin = u[j] - t
        if j > 0 and t - u[j - 1] < dmin:
            dmin = t - u[j - 1]
        r = math.sqrt(dmin * dmin + reach)
        lo = np.searchsorted(u, t - r)
        hi = np.searchsorted(u, t + r, side="right")
        zmin = dmin / sigma
        peak = -0.5 * zmin * zmin
        a = 0.0
        b = 0.0
        for i in range(lo, hi):
            z = (t - u[i]) / sigma
            w = math.exp(-0.5 * z * z - peak)
            a += w * positives[i]
            b += w * counts[i]
        num[k] = a
        den[k] = b
        log_scale[k] = peak
    return num, den, log_scale


class KernelSmoother:
    """Reusable Nadaraya-Watson regressor over one prediction set.

    Parameters
    ----------
    data : BinaryPredictionSet
        Logits and labels to regress on.
    kernel : NoiseKernel
        Noise law whose density is the regression kernel.
    """

    def __init__(self, data: BinaryPredictionSet, kernel: NoiseKernel):
        self.data = data
        self.kernel = kernel
        u, inverse = np.unique(data.logits, return_inverse=True)
        inverse = inverse.reshape(-1)
        self.support = u
        self.counts = np.bincount(inverse, minlength=u.size).astype(np.float64)
        self.positives = np.bincount(inverse, weights=data.labels.astype(np.float64),
                                     minlength=u.size)
        if kernel.compact:
            self._cum_counts = np.concatenate(([0.0], np.cumsum(self.counts)))
            self._cum_pos = np.concatenate(([0.0], np.cumsum(self.positives)))

    def _sums(self, ts):
        """Unnormalised kernel sums ``(num, den, log_scale)`` for logits ``ts``."""
        ts = np.ascontiguousarray(ts, dtype=np.float64).reshape(-1)
        if not self.kernel.compact:
            return _gaussian_sums(ts, self.support, self.counts, self.positives,
                                  self.kernel.sigma, LOG_WEIGHT_CUTOFF)
        half = 0.5 * self.kernel.sigma
        slack = _COMPACT_SLACK * (np.abs(ts) + half)
        lo = np.searchsorted(self.support, ts - half - slack, side="left")
        hi = np.searchsorted(self.support, ts + half + slack, side="right")
        num = self._cum_pos[hi] - self._cum_pos[lo]
        den = self._cum_counts[hi] - self._cum_counts[lo]
        return num, den, np.zeros_like(ts)

    def conditional_mean(self, ts, *, strict: bool = True) -> np.ndarray:
        """Kernel-weighted label average at each logit in ``ts``.

        With a compact kernel a query may see no data at all; that raises
        DegenerateWeightsError unless ``strict`` is False, in which case the
        entry is NaN.
        """
        num, den, _ = self._sums(ts)
        empty = den <= 0
        if np.any(empty):
            if strict:
                bad = float(np.asarray(ts, dtype=np.float64).reshape(-1)[np.argmax(empty)])
                raise DegenerateWeightsError(
                    f"no sample within the kernel support of t={bad!r}")
            den = np.where(empty, np.nan, den)
        return np.clip(num / den, 0.0, 1.0)

    def logit_density(self, ts):
        """Densities of ``h + xi`` and of ``(h + xi, Y = 1)`` at logits ``ts``."""
        num, den, log_scale = self._sums(ts)
        scale = np.exp(log_scale + self.kernel.log_norm) / self.data.n
        return den * scale, num * scale


def nw_conditional_mean(t: float, data: BinaryPredictionSet, kernel: NoiseKernel) -> float:
    """Nadaraya-Watson estimate of ``E[Y | h + xi = t]`` at a single logit."""
    return float(KernelSmoother(data, kernel).conditional_mean([t])[0])


@dataclass(frozen=True)
class SmoothedEstimate:
    """An LS-ECE value plus everything needed to replay it bit-for-bit."""

    value: float
    samples_used: int
    sigma: float
    kernel: str
    seed: int
    chunk_size: int
    link: str = "sigmoid"


def _chunk_gaps(smoother, link, seed, c, size):
    rng = make_rng(seed, c)
    idx = rng.integers(smoother.data.n, size=size)
    t = smoother.data.logits[idx] + smoother.kernel.sample(rng, size)
    r = smoother.conditional_mean(t)
    return np.abs(r - link.forward(t))


def ls_ece(data: BinaryPredictionSet, link: LinkFunction = SIGMOID,
           kernel: NoiseKernel | None = None, mc_samples: int = DEFAULT_MC_SAMPLES,
           seed: int = 0, *, chunk_size: int = DEFAULT_CHUNK_SIZE,
           workers: int = 1) -> SmoothedEstimate:
    """Monte Carlo estimate of the logit-smoothed ECE of ``data``.

    Each Monte Carlo draw picks a sample index uniformly and a noise value from
    ``kernel``, then scores ``|E[Y | t] - rho(t)|`` at ``t = h_i + xi``. Draws
    are generated in chunks of ``chunk_size``; chunk ``c`` uses its own stream
    derived from ``(seed, c)``, so the result depends on ``(seed, chunk_size)``
    but not on ``workers``.
    """
    if kernel is None:
        raise ValueError("kernel is required; sigma has no default")
    if isinstance(mc_samples, bool) or int(mc_samples) != mc_samples or mc_samples < 1:
        raise ValueError(f"mc_samples must be a positive integer, got {mc_samples!r}")
    if chunk_size < 1:
        raise ValueError("chunk_size must be positive")
    seed = check_seed(seed)
    mc_samples = int(mc_samples)
    smoother = KernelSmoother(data, kernel)
    sizes = [min(chunk_size, mc_samples - s) for s in range(0, mc_samples, chunk_size)]
    jobs = list(enumerate(sizes))
    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda job: _chunk_gaps(smoother, link, seed, *job), jobs))
    else:
        parts = [_chunk_gaps(smoother, link, seed, c, size) for c, size in jobs]
    value = float(np.concatenate(parts).mean())
    return SmoothedEstimate(min(max(value, 0.0), 1.0), mc_samples, kernel.sigma,
                            kernel.base, seed, int(chunk_size), link.name)


def _to_probability_space(dens, conf, link):
    # conf can round to 0 or 1 where the Jacobian is infinite; zero density stays zero
    with np.errstate(divide="ignore", invalid="ignore"):
        out = dens * link.inverse_derivative(conf)
    return np.where(dens == 0, 0.0, out)


def smoothed_density(t, data: BinaryPredictionSet, kernel: NoiseKernel,
                     link: LinkFunction = SIGMOID):
    """Densities of the smoothed confidence at probability ``rho(t)``.

    Returns ``(p_T, p_T_y1)``: the density of ``rho(h + xi)`` and the joint
    density with ``Y = 1``, both including the ``(rho^-1)'`` Jacobian. Accepts
    a scalar or an array of logits.
    """
    ts = np.asarray(t, dtype=np.float64)
    dens, dens1 = KernelSmoother(data, kernel).logit_density(ts.reshape(-1))
    conf = link.forward(ts.reshape(-1))
    p = _to_probability_space(dens, conf, link)
    p1 = _to_probability_space(dens1, conf, link)
    if ts.ndim == 0:
        return float(p[0]), float(p1[0])
    return p.reshape(ts.shape), p1.reshape(ts.shape)


@dataclass(frozen=True, eq=False)
class SmoothReliabilityCurve:
    """Smoothed reliability curve on a logit grid.

    ``cond_mean`` is NaN where a compact kernel sees no data; ``density`` is
    the probability-space density ``p_T`` at ``conf``.
    """

    t: np.ndarray
    conf: np.ndarray
    cond_mean: np.ndarray
    density: np.ndarray

    def rows(self):
        return list(zip(self.t.tolist(), self.conf.tolist(),
                        self.cond_mean.tolist(), self.density.tolist()))


def smooth_reliability(data: BinaryPredictionSet, link: LinkFunction = SIGMOID,
                       kernel: NoiseKernel | None = None,
                       grid_size: int = 200) -> SmoothReliabilityCurve:
    if kernel is None:
        raise ValueError("kernel is required; sigma has no default")
    if grid_size < 2:
        raise ValueError("grid_size must be at least 2")
    span = 4.0 * kernel.sigma
    grid = np.linspace(data.logits.min() - span, data.logits.max() + span, grid_size)
    smoother = KernelSmoother(data, kernel)
    r = smoother.conditional_mean(grid, strict=False)
    dens, _ = smoother.logit_density(grid)
    conf = link.forward(grid)
    density = _to_probability_space(dens, conf, link)
    return SmoothReliabilityCurve(grid, conf, r, density)
