"""The two-Gaussian simulation study, end to end.

Reference draws come from N(mu_p, var_p), target draws from
N(mu_q, var_q); the exact ratio of those densities is

    beta(x) = sqrt(var_p / var_q)
              * exp( (x - mu_p)^2 / (2 var_p) - (x - mu_q)^2 / (2 var_q) ),

which the study uses as ground truth.  Accuracy is measured by the mean
squared deviation over the reference sample,

    msd = (1/n) * sum_i ( beta(x_i) - beta_hat(x_i) )^2.

Every replication cell derives its own seed from (config.seed, mu_q,
replication) through a SplitMix64 chain, so cells are independent,
reproducible in isolation, and independent of execution order — running
with any thread count produces byte-identical reports.
"""

from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, NumericalError
from .estimator import RatioModel, evaluate_batch, fit_iterated_lavrentiev_path
from .kernel import KernelSpec, SampleSet, assemble_gram
from .selection import LambdaGrid, choose_from_values, lambda_mn

_MASK64 = (1 << 64) - 1


def _splitmix64(state: int) -> int:
    state = (state + 0x9E3779B97F4A7C15) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_seed(master: int, *parts: int) -> int:
    """Mix a master seed with integer parts into one 64-bit stream id.

    SplitMix64 applied along the chain; collisions across distinct part
    tuples are as unlikely as 64-bit hash collisions.
    """
    state = _splitmix64(master & _MASK64)
    for part in parts:
        state = _splitmix64((state ^ (part & _MASK64)) & _MASK64)
    return state


def _float_bits(value: float) -> int:
    """IEEE-754 bit pattern of a float, for exact seed mixing."""
    return int(np.float64(value).view(np.uint64))


def true_beta(x, mu_q: float, mu_p: float = 2.0, var_p: float = 5.0,
              var_q: float = 0.5):
    """Exact density ratio of N(mu_q, var_q) over N(mu_p, var_p).

    Vectorized over x.  With the default parameters this reduces to
    sqrt(10) * exp(((x - 2)^2 - 10 (x - mu_q)^2) / 10).
    """
    if not (var_p > 0.0 and var_q > 0.0):
        raise InputError(f"variances must be positive, got var_p={var_p!r}, var_q={var_q!r}")
    arr = np.asarray(x, dtype=float)
    out = math.sqrt(var_p / var_q) * np.exp(
        (arr - mu_p) ** 2 / (2.0 * var_p) - (arr - mu_q) ** 2 / (2.0 * var_q))
    return float(out) if out.ndim == 0 else out


def sample_normal(mu: float, var: float, count: int, seed: int,
                  measure_tag: str = "p") -> SampleSet:
    """Draw count i.i.d. values from N(mu, var).

    The generator is numpy's PCG64 seeded directly with ``seed``, so
    identical seeds give identical samples on any platform.
    """
    if not (var > 0.0):
        raise InputError(f"var must be positive, got {var!r}")
    if count < 1:
        raise InputError(f"count must be at least 1, got {count!r}")
    rng = np.random.Generator(np.random.PCG64(seed))
    points = mu + math.sqrt(var) * rng.standard_normal(count)
    return SampleSet(points=points.reshape(-1, 1), measure_tag=measure_tag, seed=seed)


def msd(model: RatioModel, mu_q: float, mu_p: float = 2.0, var_p: float = 5.0,
        var_q: float = 0.5) -> float:
    """Mean squared deviation from the exact ratio over the reference points."""
    if model.xp_points.shape[1] != 1:
        raise InputError("msd is defined for 1-d studies; model has "
                         f"dimension {model.xp_points.shape[1]}")
    truth = true_beta(model.xp_points[:, 0], mu_q, mu_p, var_p, var_q)
    return float(np.mean((truth - model.values_at_xp) ** 2))


def nearest_rank_quantile(sorted_values, fraction: float) -> float:
    """Type-1 (nearest-rank) quantile: smallest value covering ``fraction``."""
    count = len(sorted_values)
    if count == 0:
        raise InputError("cannot take a quantile of an empty list")
    index = max(int(math.ceil(fraction * count)) - 1, 0)
    return float(sorted_values[index])


def box_stats(values) -> dict:
    """min / q1 / median / q3 / max under the nearest-rank convention."""
    ordered = sorted(float(v) for v in values)
    return {
        "min": ordered[0],
        "q1": nearest_rank_quantile(ordered, 0.25),
        "median": nearest_rank_quantile(ordered, 0.50),
        "q3": nearest_rank_quantile(ordered, 0.75),
        "max": ordered[-1],
        "count": len(ordered),
    }


@dataclass(frozen=True)
class SimConfig:
    """Study configuration; defaults reproduce the two-Gaussian benchmark."""

    n: int = 100
    m: int = 100
    mu_p: float = 2.0
    var_p: float = 5.0
    mu_q_list: tuple[float, ...] = (2.0, 3.0, 4.0)
    var_q: float = 0.5
    k_list: tuple[int, ...] = (1, 2, 3, 5, 10)
    replications: int = 20
    grid: LambdaGrid = field(default_factory=LambdaGrid)
    seed: int = 0
    kernel: KernelSpec = field(default_factory=KernelSpec)

    def __post_init__(self):
        if self.n < 2 or self.m < 2:
            raise InputError(f"sample sizes must be at least 2, got n={self.n}, m={self.m}")
        if not (self.var_p > 0.0 and self.var_q > 0.0):
            raise InputError("variances must be positive")
        if self.replications < 1:
            raise InputError(f"replications must be at least 1, got {self.replications}")
        object.__setattr__(self, "mu_q_list", tuple(float(v) for v in self.mu_q_list))
        object.__setattr__(self, "k_list", tuple(int(k) for k in self.k_list))
        if not self.mu_q_list or not self.k_list:
            raise InputError("mu_q_list and k_list must be non-empty")
        if min(self.k_list) < 1:
            raise InputError("iteration counts must be positive")

    def to_dict(self) -> dict:
        return {
            "n": self.n, "m": self.m, "mu_p": self.mu_p, "var_p": self.var_p,
            "mu_q_list": list(self.mu_q_list), "var_q": self.var_q,
            "k_list": list(self.k_list), "replications": self.replications,
            "grid": self.grid.to_dict(), "seed": self.seed,
            "kernel": self.kernel.to_dict(),
        }

    @staticmethod
    def from_dict(data: dict) -> "SimConfig":
        fields = dict(data)
        if "grid" in fields:
            fields["grid"] = LambdaGrid.from_dict(fields["grid"])
        if "kernel" in fields:
            fields["kernel"] = KernelSpec.from_dict(fields["kernel"])
        return SimConfig(**fields)


@dataclass(frozen=True)
class CellResult:
    """One (mu_q, k, replication) cell of the study."""

    mu_q: float
    k: int
    replication: int
    chosen_lambda: float | None
    chosen_index: int | None
    msd: float | None
    max_pointwise_error: float | None = None
    error: str | None = None

    def to_dict(self) -> dict:
        return {
            "mu_q": self.mu_q, "k": self.k, "replication": self.replication,
            "chosen_lambda": self.chosen_lambda, "chosen_index": self.chosen_index,
            "msd": self.msd, "max_pointwise_error": self.max_pointwise_error,
            "error": self.error,
        }


@dataclass(frozen=True)
class ExperimentReport:
    """Raw cells plus box summaries; quartiles are recomputable from cells."""

    config: SimConfig
    cells: tuple[CellResult, ...]
    box: dict
    failures: int
    probe_grid: tuple[float, ...] | None = None

    def msd_values(self, mu_q: float, k: int) -> list[float]:
        return [c.msd for c in self.cells
                if c.mu_q == mu_q and c.k == k and c.error is None]

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "cells": [c.to_dict() for c in self.cells],
            "box_stats": self.box,
            "failures": self.failures,
            "probe_grid": list(self.probe_grid) if self.probe_grid is not None else None,
        }


def _run_cell(config: SimConfig, mu_q: float, replication: int,
              probe_grid: np.ndarray | None) -> list[CellResult]:
    """All k values for one (mu_q, replication) draw; isolated failures."""
    seed_p = derive_seed(config.seed, _float_bits(mu_q), replication, 0)
    seed_q = derive_seed(config.seed, _float_bits(mu_q), replication, 1)
    try:
        xp = sample_normal(config.mu_p, config.var_p, config.n, seed_p, "p")
        xq = sample_normal(mu_q, config.var_q, config.m, seed_q, "q")
        gram = assemble_gram(config.kernel, xp, xq)
        ladder = config.grid.with_anchor()
        by_lambda = [
            fit_iterated_lavrentiev_path(gram, xp, xq, config.kernel, lam,
                                         config.k_list)
            for lam in ladder
        ]
    except (InputError, NumericalError) as exc:
        message = f"{type(exc).__name__}: {exc}"
        return [CellResult(mu_q=mu_q, k=k, replication=replication,
                           chosen_lambda=None, chosen_index=None, msd=None,
                           error=message)
                for k in config.k_list]

    truth_on_grid = (true_beta(probe_grid, mu_q, config.mu_p, config.var_p,
                               config.var_q)
                     if probe_grid is not None else None)
    results = []
    for k in config.k_list:
        diffs, chosen = choose_from_values(
            [models[k].values_at_xp for models in by_lambda])
        model = by_lambda[chosen + 1][k]  # +1 skips the anchor fit
        cell_msd = msd(model, mu_q, config.mu_p, config.var_p, config.var_q)
        max_err = None
        if probe_grid is not None:
            fitted = evaluate_batch(model, probe_grid.reshape(-1, 1))
            max_err = float(np.abs(truth_on_grid - fitted).max())
        results.append(CellResult(
            mu_q=mu_q, k=k, replication=replication,
            chosen_lambda=config.grid.values[chosen], chosen_index=chosen,
            msd=cell_msd, max_pointwise_error=max_err))
    return results


def run_study(config: SimConfig, threads: int | None = None,
              probe_grid=None) -> ExperimentReport:
    """Run the full replication study.

    ``threads`` bounds the worker pool (default: available cores); the
    result is byte-identical for any value because cells are seeded
    independently and sorted before aggregation.  ``probe_grid`` (1-d,
    optional) additionally records each cell's maximum absolute
    pointwise error over that grid.
    """
    if threads is None:
        threads = os.cpu_count() or 1
    if threads < 1:
        raise InputError(f"threads must be at least 1, got {threads!r}")
    grid_arr = None if probe_grid is None else np.asarray(probe_grid, dtype=float).ravel()

    tasks = [(mu_q, rep) for mu_q in config.mu_q_list
             for rep in range(config.replications)]
    if threads == 1:
        batches = [_run_cell(config, mu_q, rep, grid_arr) for mu_q, rep in tasks]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            batches = list(pool.map(
                lambda task: _run_cell(config, task[0], task[1], grid_arr), tasks))

    cells = sorted(
        (cell for batch in batches for cell in batch),
        key=lambda c: (config.mu_q_list.index(c.mu_q), c.k, c.replication))

    box: dict = {}
    failures = 0
    for mu_q in config.mu_q_list:
        per_k = {}
        for k in config.k_list:
            completed = [c.msd for c in cells
                         if c.mu_q == mu_q and c.k == k and c.error is None]
            per_k[str(k)] = box_stats(completed) if completed else None
        box[repr(mu_q)] = per_k
    failures = sum(1 for c in cells if c.error is not None)

    return ExperimentReport(
        config=config, cells=tuple(cells), box=box, failures=failures,
        probe_grid=tuple(grid_arr.tolist()) if grid_arr is not None else None)


# ---------------------------------------------------------------------------
# Report serialization: JSON (full) + two CSVs for external plotting.

def report_to_json(report: ExperimentReport) -> str:
    return json.dumps(report.to_dict(), sort_keys=True, indent=2) + "\n"


def save_report_json(report: ExperimentReport, path) -> None:
    with open(path, "w") as handle:
        handle.write(report_to_json(report))


def load_report_json(path) -> dict:
    with open(path) as handle:
        return json.load(handle)


def save_report_csv(report: ExperimentReport, path) -> None:
    """One row per replication cell: mu_q, k, replication, chosen_lambda, msd."""
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["mu_q", "k", "replication", "chosen_lambda", "msd"])
        for cell in report.cells:
            writer.writerow([
                repr(cell.mu_q), cell.k, cell.replication,
                "" if cell.chosen_lambda is None else repr(cell.chosen_lambda),
                "" if cell.msd is None else repr(cell.msd),
            ])


def save_box_csv(report: ExperimentReport, path) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["mu_q", "k", "min", "q1", "median", "q3", "max"])
        for mu_q in report.config.mu_q_list:
            for k in report.config.k_list:
                stats = report.box[repr(mu_q)][str(k)]
                if stats is None:
                    continue
                writer.writerow([repr(mu_q), k] + [
                    repr(stats[name]) for name in ("min", "q1", "median", "q3", "max")])


# ---------------------------------------------------------------------------
# Convergence-rate fits.

def fit_log_slope(n_values, errors) -> float:
    """Least-squares slope of log(error) against log(n**-0.5).

    An error sequence c * (n**-0.5)**r comes back as exactly r up to
    floating rounding in the logs.
    """
    n_arr = np.asarray(n_values, dtype=float)
    err = np.asarray(errors, dtype=float)
    if n_arr.size != err.size or n_arr.size < 2:
        raise InputError("need at least two (n, error) pairs with matching lengths")
    if (err <= 0.0).any():
        raise InputError("errors must be positive for a log-log fit")
    return float(np.polyfit(np.log(n_arr**-0.5), np.log(err), 1)[0])


@dataclass(frozen=True)
class RateRecord:
    """Median errors along an n grid with fitted log-log slopes."""

    n_list: tuple[int, ...]
    eta: float
    varsigma: float
    iterations: int
    replications: int
    seed: int
    mu_q: float
    probe_x: float
    lambdas: tuple[float, ...]
    pointwise_medians: tuple[float, ...]
    rms_medians: tuple[float, ...]
    pointwise_slope: float | None
    rms_slope: float | None
    insufficient_points: bool

    def to_dict(self) -> dict:
        return {
            "n_list": list(self.n_list), "eta": self.eta,
            "varsigma": self.varsigma, "iterations": self.iterations,
            "replications": self.replications, "seed": self.seed,
            "mu_q": self.mu_q, "probe_x": self.probe_x,
            "lambdas": list(self.lambdas),
            "pointwise_medians": list(self.pointwise_medians),
            "rms_medians": list(self.rms_medians),
            "pointwise_slope": self.pointwise_slope,
            "rms_slope": self.rms_slope,
            "insufficient_points": self.insufficient_points,
        }


def save_rate_json(record: RateRecord, path) -> None:
    with open(path, "w") as handle:
        json.dump(record.to_dict(), handle, sort_keys=True, indent=2)
        handle.write("\n")


def run_rate_study(n_list, eta: float, varsigma: float, iterations: int,
                   replications: int, seed: int, mu_q: float = 2.0,
                   probe_x: float | None = None, mu_p: float = 2.0,
                   var_p: float = 5.0, var_q: float = 0.5,
                   kernel: KernelSpec | None = None) -> RateRecord:
    """Empirical error decay along an increasing n grid, m = n per point.

    Each point fits at the a-priori strength lambda_mn(n, n, eta,
    varsigma) and records the median (over replications) absolute error
    at the probe point (default: mu_q, the target mode) and the median
    root-mean-square error over the reference sample.  Slopes of
    log-error against log(n**-0.5) are emitted, not asserted; with a
    single n they are None and the record is marked insufficient.
    """
    n_seq = [int(n) for n in n_list]
    if not n_seq:
        raise InputError("n_list must be non-empty")
    if any(b <= a for a, b in zip(n_seq, n_seq[1:])):
        raise InputError(f"n_list must be strictly increasing, got {n_seq}")
    if replications < 1:
        raise InputError(f"replications must be at least 1, got {replications!r}")
    if iterations < 1:
        raise InputError(f"iterations must be at least 1, got {iterations!r}")
    kernel = KernelSpec() if kernel is None else kernel
    probe = mu_q if probe_x is None else float(probe_x)
    truth_at_probe = true_beta(probe, mu_q, mu_p, var_p, var_q)

    lambdas, point_meds, rms_meds = [], [], []
    for n in n_seq:
        lam = lambda_mn(n, n, eta, varsigma)
        point_errors, rms_errors = [], []
        for rep in range(replications):
            seed_p = derive_seed(seed, n, rep, 0)
            seed_q = derive_seed(seed, n, rep, 1)
            xp = sample_normal(mu_p, var_p, n, seed_p, "p")
            xq = sample_normal(mu_q, var_q, n, seed_q, "q")
            gram = assemble_gram(kernel, xp, xq)
            model = fit_iterated_lavrentiev_path(
                gram, xp, xq, kernel, lam, [iterations])[iterations]
            fitted_at_probe = float(evaluate_batch(model, [[probe]])[0])
            point_errors.append(abs(truth_at_probe - fitted_at_probe))
            truth = true_beta(xp.points[:, 0], mu_q, mu_p, var_p, var_q)
            rms_errors.append(float(np.sqrt(np.mean(
                (truth - model.values_at_xp) ** 2))))
        lambdas.append(lam)
        point_meds.append(nearest_rank_quantile(sorted(point_errors), 0.5))
        rms_meds.append(nearest_rank_quantile(sorted(rms_errors), 0.5))

    insufficient = len(n_seq) < 2
    return RateRecord(
        n_list=tuple(n_seq), eta=float(eta), varsigma=float(varsigma),
        iterations=int(iterations), replications=int(replications),
        seed=int(seed), mu_q=float(mu_q), probe_x=probe,
        lambdas=tuple(lambdas), pointwise_medians=tuple(point_meds),
        rms_medians=tuple(rms_meds),
        pointwise_slope=None if insufficient else fit_log_slope(n_seq, point_meds),
        rms_slope=None if insufficient else fit_log_slope(n_seq, rms_meds),
        insufficient_points=insufficient)
