"""Capacity diagnostics: regularized pointwise leverage and its integrals.

For the empirical covariance operator T built from the reference sample,
the regularized leverage of a point x (a regularized Christoffel-type
quantity) is

    C_lam(x) = < k(., x), (lam I + T)^{-1} k(., x) >
             = (1/lam) * ( k(x, x) - (1/n) * k_x^T (lam I + K/n)^{-1} k_x ),

with k_x the vector of kernel values against the reference points.  Its
average over the reference sample equals the effective dimension

    N(lam) = trace( (lam I + K/n)^{-1} K/n ) = sum_i t_i / (lam + t_i),

a cross-check the tests exercise, and its supremum over a probe region
estimates the sup-norm capacity.  The balance point lambda_star solves
N(lam) / lam = n, the largest regularization strength at which the
variance budget matches the sample size; N(lam)/lam is strictly
decreasing, so the solution is unique whenever the bracket straddles n.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import InputError, NumericalError
from .kernel import GramSystem, KernelSpec, SampleSet, eval_kernel, kernel_matrix


def _normalized_spectrum(gram: GramSystem) -> np.ndarray:
    """Eigenvalues of K/n, floored at zero."""
    try:
        spectrum = np.linalg.eigvalsh(gram.k_matrix / gram.n)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("eigendecomposition of the kernel matrix failed") from exc
    return np.clip(spectrum, 0.0, None)


def _leverage_factor(gram: GramSystem, lam: float):
    a_matrix = gram.k_matrix / gram.n + lam * np.eye(gram.n)
    try:
        return scipy.linalg.cho_factor(a_matrix, lower=True)
    except scipy.linalg.LinAlgError as exc:
        smallest = float(np.linalg.eigvalsh(a_matrix)[0])
        raise NumericalError("regularized kernel system is not positive definite",
                             lam=lam, smallest_eigenvalue=smallest) from exc


def _leverage_batch(gram: GramSystem, spec: KernelSpec, xp: SampleSet,
                    lam: float, probes: np.ndarray) -> np.ndarray:
    """C_lam at many probe points, sharing one factorization."""
    factor = _leverage_factor(gram, lam)
    k_cross = kernel_matrix(spec, xp.points, probes)  # (n, p)
    solved = scipy.linalg.cho_solve(factor, k_cross)
    diag = np.array([eval_kernel(spec, probe, probe) for probe in probes])
    quad = np.einsum("ip,ip->p", k_cross, solved) / gram.n
    return (diag - quad) / lam


def christoffel(gram: GramSystem, spec: KernelSpec, xp: SampleSet,
                lam: float, x) -> float:
    """Regularized leverage C_lam(x) of a single point.

    Non-negative in exact arithmetic; tiny negative values (above about
    -1e-10 on unit-scale kernels) can appear through the factorization
    and are returned as computed.
    """
    if not (lam > 0.0):
        raise InputError(f"lam must be positive, got {lam!r}")
    probe = np.atleast_1d(np.asarray(x, dtype=float)).reshape(1, -1)
    if probe.shape[1] != xp.dim:
        raise InputError(f"point has dimension {probe.shape[1]}, sample has {xp.dim}")
    return float(_leverage_batch(gram, spec, xp, lam, probe)[0])


def effective_dimension(gram: GramSystem, lam: float) -> float:
    """N(lam) = sum_i t_i / (lam + t_i) over the spectrum of K/n.

    Strictly positive, below n, and decreasing in lam.
    """
    if not (lam > 0.0):
        raise InputError(f"lam must be positive, got {lam!r}")
    spectrum = _normalized_spectrum(gram)
    return float(np.sum(spectrum / (lam + spectrum)))


def n_inf_estimate(gram: GramSystem, spec: KernelSpec, xp: SampleSet,
                   lam: float, probe_points) -> float:
    """Sup-norm capacity estimate: max regularized leverage over probes.

    The reference points themselves are always included in the scan, so
    the estimate is never below the in-sample maximum.
    """
    if not (lam > 0.0):
        raise InputError(f"lam must be positive, got {lam!r}")
    probes = np.asarray(probe_points, dtype=float)
    if probes.ndim == 1:
        probes = probes.reshape(-1, 1)
    if probes.shape[0] == 0:
        raise InputError("probe_points must be non-empty")
    if probes.shape[1] != xp.dim:
        raise InputError(
            f"probes have dimension {probes.shape[1]}, sample has {xp.dim}")
    scan = np.vstack([probes, xp.points])
    return float(_leverage_batch(gram, spec, xp, lam, scan).max())


def find_lambda_star(gram: GramSystem, bracket: tuple[float, float] | None = None,
                     rel_tol: float = 1e-9, max_iter: int = 200) -> float:
    """Solve N(lam) / lam = n by bisection in log(lam).

    The default bracket is (1e-8, max diagonal of K); the map
    lam -> N(lam)/lam is strictly decreasing, so the root is unique
    inside any bracket on which the map straddles n.
    """
    if bracket is None:
        bracket = (1e-8, float(gram.k_matrix.diagonal().max()))
    lo, hi = float(bracket[0]), float(bracket[1])
    if not (0.0 < lo < hi):
        raise InputError(f"bracket must satisfy 0 < lo < hi, got {bracket!r}")
    spectrum = _normalized_spectrum(gram)

    def ratio(lam: float) -> float:
        return float(np.sum(spectrum / (lam + spectrum))) / lam

    r_lo, r_hi = ratio(lo), ratio(hi)
    if not (r_lo > gram.n > r_hi):
        raise InputError(
            "bracket does not straddle the balance point: "
            f"N/lam at lo={lo!r} is {r_lo!r}, at hi={hi!r} is {r_hi!r}, "
            f"target n={gram.n}")
    for _ in range(max_iter):
        mid = math.sqrt(lo * hi)
        if ratio(mid) > gram.n:
            lo = mid
        else:
            hi = mid
        if hi - lo <= rel_tol * mid:
            break
    return math.sqrt(lo * hi)


@dataclass(frozen=True)
class CapacityProfile:
    """Capacity diagnostics tabulated over a decreasing grid of strengths."""

    lambdas: np.ndarray
    n_eff: np.ndarray
    n_inf: np.ndarray
    lambda_star: float | None

    def to_dict(self) -> dict:
        return {
            "lambdas": self.lambdas.tolist(),
            "n_eff": self.n_eff.tolist(),
            "n_inf": self.n_inf.tolist(),
            "lambda_star": self.lambda_star,
        }


def default_probe_grid(xp: SampleSet, count: int = 200) -> np.ndarray:
    """Probe points: a uniform grid over the sample's bounding box, inflated 20%.

    In one dimension this is a plain linspace; in d dimensions the grid
    takes ceil(count**(1/d)) points per axis.
    """
    low = xp.points.min(axis=0)
    high = xp.points.max(axis=0)
    center = (low + high) / 2.0
    half = np.maximum((high - low) / 2.0, 1e-8) * 1.2
    low, high = center - half, center + half
    if xp.dim == 1:
        return np.linspace(low[0], high[0], count).reshape(-1, 1)
    per_axis = max(2, math.ceil(count ** (1.0 / xp.dim)))
    axes = [np.linspace(low[d], high[d], per_axis) for d in range(xp.dim)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def capacity_profile(gram: GramSystem, spec: KernelSpec, xp: SampleSet,
                     lambdas, probe_points=None) -> CapacityProfile:
    """Tabulate N(lam), the sup-capacity estimate, and the balance point.

    ``lambdas`` must be positive; it is sorted into decreasing order.
    ``lambda_star`` is None when the default bracket does not straddle
    the balance point (tiny samples), rather than an error.
    """
    lams = np.asarray(lambdas, dtype=float)
    if lams.size == 0:
        raise InputError("lambdas must be non-empty")
    if lams.min() <= 0.0:
        raise InputError("lambdas must be positive")
    lams = np.sort(lams)[::-1]
    probes = (default_probe_grid(xp) if probe_points is None
              else np.asarray(probe_points, dtype=float))
    spectrum = _normalized_spectrum(gram)
    n_eff = np.array([float(np.sum(spectrum / (lam + spectrum))) for lam in lams])
    n_inf = np.array([n_inf_estimate(gram, spec, xp, lam, probes) for lam in lams])
    try:
        star = find_lambda_star(gram)
    except InputError:
        star = None
    return CapacityProfile(lambdas=lams, n_eff=n_eff, n_inf=n_inf, lambda_star=star)


def save_profile_csv(profile: CapacityProfile, path) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["lambda", "n_eff", "n_inf"])
        for lam, ne, ni in zip(profile.lambdas, profile.n_eff, profile.n_inf):
            writer.writerow([repr(float(lam)), repr(float(ne)), repr(float(ni))])


def save_profile_json(profile: CapacityProfile, path) -> None:
    with open(path, "w") as handle:
        json.dump(profile.to_dict(), handle, sort_keys=True, indent=2)
        handle.write("\n")
