"""Bin/bandwidth sweeps, cross-model comparisons and consistency studies.

Every random draw is keyed by a sub-seed derived from the run seed and the
row's parameters, so rows can be computed in any order (or in parallel) and
still reproduce exactly.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .binned import BinningScheme, binned_ece
from .core import (SIGMOID, BinaryPredictionSet, CalibrationError, LinkFunction,
                   NoiseKernel, PreconditionError, derive_seed)
from .exact import empirical_exact_ece
from .io import fmt_float
from .smooth import DEFAULT_MC_SAMPLES, ls_ece
from .synthetic import DISTRIBUTIONS, synthetic_predictions

log = logging.getLogger(__name__)

COMPARISON_BINS = (1,) + tuple(range(10, 101, 10))
REFERENCE_N = 10**6

# sub-seed stream tags
_SWEEP, _REF_DATA, _REF_MC, _REP_DATA, _REP_MC, _LIMIT_DATA, _LIMIT_MC = range(7)


@dataclass(frozen=True)
class SweepRow:
    model: str
    bins: int
    sigma: float
    binned_ece: float | None
    ls_ece: float | None
    smece: float | None = None
    error: str | None = None

    def csv_row(self):
        return [self.model, str(self.bins), fmt_float(self.sigma), fmt_float(self.binned_ece),
                fmt_float(self.ls_ece), fmt_float(self.smece)]


SWEEP_HEADER = ["model", "bins", "sigma", "binned_ece", "ls_ece", "smece"]


def run_sweep(data: BinaryPredictionSet, bin_list, kernel: str = "gaussian",
              mc_samples: int = DEFAULT_MC_SAMPLES, seed: int = 0, *,
              link: LinkFunction = SIGMOID, model: str = "model", sigma_list=None,
              smece: float | None = None) -> list[SweepRow]:
    """Binned ECE (uniform bins) next to LS-ECE with ``sigma = 1/bins``.

    ``sigma_list`` decouples the bandwidths from the bin counts; it must then
    have the same length as ``bin_list``. A row whose metric fails is kept
    with empty values and the failure reason.
    """
    bin_list = [int(m) for m in bin_list]
    if not bin_list or min(bin_list) < 1:
        raise PreconditionError("bin counts must be positive integers")
    if sigma_list is None:
        sigma_list = [1.0 / m for m in bin_list]
    elif len(sigma_list) != len(bin_list):
        raise PreconditionError("sigma_list and bin_list differ in length")
    rows = []
    for m, sigma in zip(bin_list, sigma_list):
        try:
            b = binned_ece(data, link, BinningScheme("uniform", m))
            est = ls_ece(data, link, NoiseKernel(sigma, kernel), mc_samples,
                         derive_seed(seed, _SWEEP, m))
            rows.append(SweepRow(model, m, sigma, b, est.value, smece))
        except (CalibrationError, ArithmeticError) as exc:
            log.warning("%s: bins=%d failed: %s", model, m, exc)
            rows.append(SweepRow(model, m, sigma, None, None, smece, str(exc)))
    return rows


@dataclass(frozen=True)
class ComparisonRow:
    bins: int
    sigma: float
    mean_abs_diff_ls: float
    std_abs_diff_ls: float
    mean_abs_diff_smece: float | None
    std_abs_diff_smece: float | None
    n_models: int

    def csv_row(self):
        return [str(self.bins), fmt_float(self.sigma), fmt_float(self.mean_abs_diff_ls),
                fmt_float(self.std_abs_diff_ls), fmt_float(self.mean_abs_diff_smece),
                fmt_float(self.std_abs_diff_smece), str(self.n_models)]


COMPARISON_HEADER = ["bins", "sigma", "mean_abs_diff_ls", "std_abs_diff_ls",
                     "mean_abs_diff_smece", "std_abs_diff_smece", "n_models"]


@dataclass(frozen=True)
class ComparisonSummary:
    rows: tuple
    models: tuple
    sweeps: tuple = field(default=(), repr=False)


def summarize_sweeps(sweep_rows) -> ComparisonSummary:
    """Aggregate ``|binned - ls|`` (and ``|binned - smece|``) across models per (bins, sigma)."""
    groups = {}
    models = []
    for r in sweep_rows:
        if r.model not in models:
            models.append(r.model)
        if r.error is not None or r.binned_ece is None or r.ls_ece is None:
            continue
        groups.setdefault((r.bins, r.sigma), []).append(r)
    out = []
    for (m, sigma) in sorted(groups):
        rows = groups[(m, sigma)]
        d_ls = np.array([abs(r.binned_ece - r.ls_ece) for r in rows])
        d_sm = np.array([abs(r.binned_ece - r.smece) for r in rows if r.smece is not None])
        out.append(ComparisonRow(
            m, sigma, float(d_ls.mean()), float(d_ls.std()),
            float(d_sm.mean()) if d_sm.size else None,
            float(d_sm.std()) if d_sm.size else None,
            len(rows)))
    return ComparisonSummary(tuple(out), tuple(models), tuple(sweep_rows))


def run_comparison(inputs, bin_list=COMPARISON_BINS, kernel: str = "gaussian",
                   mc_samples: int = DEFAULT_MC_SAMPLES, seed: int = 0, *,
                   link: LinkFunction = SIGMOID, external_smece: dict | None = None,
                   sigma_list=None) -> ComparisonSummary:
    """Sweep every model and summarise how far LS-ECE sits from binned ECE.

    Parameters
    ----------
    inputs : sequence of (model_id, BinaryPredictionSet)
        One entry per model; ids are used to join ``external_smece``.
    external_smece : dict, optional
        Externally computed smECE per model id. Models without a value are
        reported and left out of the smECE columns.
    """
    inputs = list(inputs)
    if not inputs:
        raise PreconditionError("need at least one input")
    sweeps = []
    for model, data in inputs:
        sm = None
        if external_smece is not None:
            sm = external_smece.get(model)
            if sm is None:
                log.warning("no external smECE value for model %r; skipping it", model)
        sweeps.extend(run_sweep(data, bin_list, kernel, mc_samples, seed, link=link,
                                model=model, sigma_list=sigma_list, smece=sm))
    if external_smece:
        for extra in sorted(set(external_smece) - {m for m, _ in inputs}):
            log.warning("external smECE given for unknown model %r", extra)
    return summarize_sweeps(sweeps)


@dataclass(frozen=True)
class ConsistencyRow:
    n: int
    mean_error: float
    std_error: float


@dataclass(frozen=True)
class ConsistencyTable:
    rows: tuple
    reference: float
    reference_n: int
    sigma: float

    def slope(self) -> float:
        """Least-squares slope of log(mean error) against log(n)."""
        n = np.array([r.n for r in self.rows], dtype=np.float64)
        e = np.array([r.mean_error for r in self.rows])
        return float(np.polyfit(np.log(n), np.log(e), 1)[0])


def _draw(dist, n, seed, link, dist_kwargs):
    if dist == "counterexample":
        dist_kwargs = {"link": link, **dist_kwargs}
    return synthetic_predictions(dist, n, seed, **dist_kwargs)


def _check_dist(dist):
    if dist not in DISTRIBUTIONS:
        raise PreconditionError(f"unknown distribution {dist!r}; choose from {DISTRIBUTIONS}")


def run_consistency(dist: str, n_list, sigma: float = 0.1, kernel: str = "gaussian",
                    repeats: int = 20, mc_samples: int = DEFAULT_MC_SAMPLES,
                    seed: int = 0, *, reference_n: int = REFERENCE_N,
                    link: LinkFunction = SIGMOID, **dist_kwargs) -> ConsistencyTable:
    """Mean absolute deviation of LS-ECE from a large-sample reference, per n.

    The reference is LS-ECE on ``reference_n`` draws; its data and Monte Carlo
    streams come from ``(seed, 1)`` and ``(seed, 2)``. Repeat ``r`` at size
    ``n`` draws from ``(seed, 3, n, r)`` and ``(seed, 4, n, r)``.
    """
    _check_dist(dist)
    n_list = [int(n) for n in n_list]
    if not n_list or any(b <= a for a, b in zip(n_list, n_list[1:])) or n_list[0] < 1:
        raise PreconditionError("n_list must be strictly increasing positive integers")
    if repeats < 5:
        raise PreconditionError("need at least 5 repeats")
    noise = NoiseKernel(sigma, kernel)
    ref_data = _draw(dist, reference_n, derive_seed(seed, _REF_DATA), link, dist_kwargs)
    reference = ls_ece(ref_data, link, noise, mc_samples, derive_seed(seed, _REF_MC)).value
    rows = []
    for n in n_list:
        errs = []
        for r in range(repeats):
            data = _draw(dist, n, derive_seed(seed, _REP_DATA, n, r), link, dist_kwargs)
            est = ls_ece(data, link, noise, mc_samples, derive_seed(seed, _REP_MC, n, r))
            errs.append(abs(est.value - reference))
        errs = np.array(errs)
        rows.append(ConsistencyRow(n, float(errs.mean()), float(errs.std())))
    return ConsistencyTable(tuple(rows), reference, reference_n, float(sigma))


@dataclass(frozen=True)
class SigmaLimitRow:
    sigma: float
    ls_ece: float
    exact_grouped: float
    binned_reference: float
    bins: int


def run_sigma_limit(dist: str, n: int, sigma_list, kernel: str = "gaussian",
                    mc_samples: int = DEFAULT_MC_SAMPLES, seed: int = 0, *,
                    link: LinkFunction = SIGMOID, **dist_kwargs) -> list[SigmaLimitRow]:
    """LS-ECE on one sample as the bandwidth shrinks, beside two plug-in references.

    ``exact_grouped`` is the empirical ECE grouped by exact value (about 1/3
    for a continuous calibrated predictor, since every level set is a single
    point). ``binned_reference`` is uniform-bin ECE with ``round(1/sigma)``
    bins, the usual stand-in for the population ECE.
    """
    _check_dist(dist)
    if dist == "two-point":
        raise PreconditionError(
            "the two-point distribution has atomic logits; shrinking sigma only "
            "converges to the true ECE when the logit law has a density")
    sigma_list = [float(s) for s in sigma_list]
    if not sigma_list or any(b >= a for a, b in zip(sigma_list, sigma_list[1:])):
        raise PreconditionError("sigma_list must be strictly decreasing")
    data = _draw(dist, n, derive_seed(seed, _LIMIT_DATA), link, dist_kwargs)
    exact = empirical_exact_ece(data, link)
    rows = []
    for k, sigma in enumerate(sigma_list):
        bins = max(1, round(1.0 / sigma))
        est = ls_ece(data, link, NoiseKernel(sigma, kernel), mc_samples,
                     derive_seed(seed, _LIMIT_MC, k))
        rows.append(SigmaLimitRow(sigma, est.value, exact,
                                  binned_ece(data, link, BinningScheme("uniform", bins)),
                                  bins))
    return rows
