"""Spectral regularization schemes and their filter algebra.

A scheme is a family of scalar functions g_lam applied to the spectrum of
the normalized kernel matrix.  Writing r_lam(t) = 1 - t * g_lam(t) for the
residual, a usable scheme satisfies, for all 0 < t <= t_max and lam > 0,

    |r_lam(t)|            <= c_residual,
    sqrt(t) * |g_lam(t)|  <= c_half / sqrt(lam),
    |g_lam(t)|            <= c_inverse / lam,
    t**s * |r_lam(t)|     <= lam**s          (qualification s).

The iterated shifted inversion with k steps has

    g_lam(t) = (1 - (lam / (lam + t))**k) / t,
    r_lam(t) = (lam / (lam + t))**k,

with constants c_residual = 1, c_half = sqrt(k), c_inverse = k and
qualification k; a single step (k = 1) is plain shifted inversion.  Hard
spectral cutoff keeps 1/t above the threshold and zero below, with all
three constants equal to 1 and unbounded qualification.

Filters are evaluated in forms that stay accurate for t near zero: the
iterated filter uses the geometric-sum identity

    g_lam(t) = (1 / (lam + t)) * sum_{j=0}^{k-1} (lam / (lam + t))**j,

which is exact at t = 0 (value k / lam) instead of 0/0, and the residual
uses the closed power form rather than 1 - t * g.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InputError

SCHEME_KINDS = ("lavrentiev", "iterated_lavrentiev", "spectral_cutoff")


@dataclass(frozen=True)
class RegScheme:
    """A regularization scheme: kind, strength, and iteration count.

    ``kind`` is one of ``"lavrentiev"`` (single shifted inversion),
    ``"iterated_lavrentiev"`` (k shifted inversions), or
    ``"spectral_cutoff"``.  ``lam`` must be positive.  ``iterations``
    is the step count k of the iterated scheme; for ``"lavrentiev"``
    it must be 1 and for ``"spectral_cutoff"`` it is ignored and
    stored as 1.
    """

    kind: str
    lam: float
    iterations: int = 1

    def __post_init__(self):
        if self.kind not in SCHEME_KINDS:
            raise InputError(f"unknown scheme kind {self.kind!r}; expected one of {SCHEME_KINDS}")
        if not (self.lam > 0.0) or not math.isfinite(self.lam):
            raise InputError(f"lam must be a positive finite real, got {self.lam!r}")
        if int(self.iterations) != self.iterations or self.iterations < 1:
            raise InputError(f"iterations must be a positive integer, got {self.iterations!r}")
        object.__setattr__(self, "iterations", int(self.iterations))
        if self.kind == "lavrentiev" and self.iterations != 1:
            raise InputError("kind 'lavrentiev' means a single iteration; "
                             "use 'iterated_lavrentiev' for k > 1")
        if self.kind == "spectral_cutoff":
            object.__setattr__(self, "iterations", 1)

    # -- filter constants ---------------------------------------------------

    @property
    def residual_bound(self) -> float:
        """Uniform bound on |r_lam| (1 for every scheme here)."""
        return 1.0

    @property
    def half_order_bound(self) -> float:
        """Bound c with sqrt(t) |g_lam(t)| <= c / sqrt(lam)."""
        if self.kind == "spectral_cutoff":
            return 1.0
        return math.sqrt(self.iterations)

    @property
    def inverse_order_bound(self) -> float:
        """Bound c with |g_lam(t)| <= c / lam."""
        if self.kind == "spectral_cutoff":
            return 1.0
        return float(self.iterations)

    @property
    def qualification(self) -> float:
        """Largest s with t**s |r_lam(t)| <= lam**s (inf for cutoff)."""
        if self.kind == "spectral_cutoff":
            return math.inf
        return float(self.iterations)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "k": self.iterations, "lambda": self.lam}

    @staticmethod
    def from_dict(data: dict) -> "RegScheme":
        return RegScheme(kind=data["kind"], lam=data["lambda"],
                         iterations=data.get("k", 1))


def lavrentiev(lam: float) -> RegScheme:
    return RegScheme(kind="lavrentiev", lam=lam, iterations=1)


def iterated_lavrentiev(lam: float, iterations: int) -> RegScheme:
    return RegScheme(kind="iterated_lavrentiev", lam=lam, iterations=iterations)


def spectral_cutoff(lam: float) -> RegScheme:
    return RegScheme(kind="spectral_cutoff", lam=lam)


def _as_spectrum(t) -> tuple[np.ndarray, bool]:
    arr = np.asarray(t, dtype=float)
    scalar = arr.ndim == 0
    arr = np.atleast_1d(arr)
    if arr.size and arr.min() < 0.0:
        raise InputError(f"spectral arguments must be non-negative, got min {arr.min()!r}")
    return arr, scalar


def filter_value(scheme: RegScheme, t):
    """Evaluate g_lam at t (scalar or array, t >= 0).

    The iterated scheme is evaluated through its geometric-sum form,
    which involves only the positive quantity lam / (lam + t) and is
    therefore stable down to and including t = 0, where it returns
    exactly iterations / lam.
    """
    arr, scalar = _as_spectrum(t)
    lam = scheme.lam
    if scheme.kind == "spectral_cutoff":
        out = np.zeros(arr.shape)
        keep = arr >= lam
        out[keep] = 1.0 / arr[keep]
        return float(out[0]) if scalar else out
    shifted = lam + arr
    ratio = lam / shifted
    total = np.zeros(arr.shape)
    power = np.ones(arr.shape)
    for _ in range(scheme.iterations):
        total = total + power
        power = power * ratio
    out = total / shifted
    return float(out[0]) if scalar else out


def residual_value(scheme: RegScheme, t):
    """Evaluate r_lam(t) = 1 - t * g_lam(t) in closed form.

    For the iterated scheme this is (lam / (lam + t))**k computed as a
    power of a quantity in (0, 1], never via the subtraction, so it keeps
    full relative accuracy where the residual is tiny.
    """
    arr, scalar = _as_spectrum(t)
    lam = scheme.lam
    if scheme.kind == "spectral_cutoff":
        out = np.where(arr >= lam, 0.0, 1.0)
        return float(out[0]) if scalar else out
    out = (lam / (lam + arr)) ** scheme.iterations
    return float(out[0]) if scalar else out


def filter_zero_value(scheme: RegScheme) -> float:
    """g_lam(0): iterations / lam for the shifted-inversion family, 0 for cutoff."""
    if scheme.kind == "spectral_cutoff":
        return 0.0
    return scheme.iterations / scheme.lam


def filter_quotient_value(scheme: RegScheme, t):
    """Evaluate the difference quotient q_lam(t) = (g_lam(t) - g_lam(0)) / t.

    Needed by the spectral fitting path for the expansion coefficients.
    The naive quotient cancels catastrophically for t << lam, so the
    iterated scheme uses the equivalent sum

        q_lam(t) = -(1 / (lam * (lam + t))) * sum_{r=0}^{k-1} (k - r) * rho**r,

    rho = lam / (lam + t), whose terms all share one sign.  At t = 0
    this continues to the limit -k (k + 1) / (2 lam**2).
    """
    arr, scalar = _as_spectrum(t)
    lam = scheme.lam
    if scheme.kind == "spectral_cutoff":
        out = np.zeros(arr.shape)
        keep = arr >= lam
        out[keep] = 1.0 / np.square(arr[keep])
        return float(out[0]) if scalar else out
    shifted = lam + arr
    ratio = lam / shifted
    k = scheme.iterations
    total = np.zeros(arr.shape)
    power = np.ones(arr.shape)
    for r in range(k):
        total = total + (k - r) * power
        power = power * ratio
    out = -total / (lam * shifted)
    return float(out[0]) if scalar else out


@dataclass(frozen=True)
class InequalityCheck:
    """Outcome of one filter inequality scanned over a spectral grid.

    ``margin`` is the minimum over the grid of (bound - value); a
    negative margin means the inequality failed somewhere, and
    ``worst_t`` records where the margin is attained.
    """

    name: str
    margin: float
    worst_t: float
    satisfied: bool


@dataclass(frozen=True)
class SchemeCheckReport:
    scheme: RegScheme
    t_max: float
    grid_size: int
    qualification: float
    checks: tuple[InequalityCheck, ...]

    @property
    def all_satisfied(self) -> bool:
        return all(c.satisfied for c in self.checks)

    def to_dict(self) -> dict:
        return {
            "scheme": self.scheme.to_dict(),
            "t_max": self.t_max,
            "grid_size": self.grid_size,
            "qualification": None if math.isinf(self.qualification) else self.qualification,
            "all_satisfied": self.all_satisfied,
            "checks": [
                {"name": c.name, "margin": c.margin, "worst_t": c.worst_t,
                 "satisfied": c.satisfied}
                for c in self.checks
            ],
        }


def check_scheme_constants(scheme: RegScheme, t_max: float, grid_size: int = 2000,
                           qualification: float | None = None) -> SchemeCheckReport:
    """Scan the four filter inequalities over a log grid on (0, t_max].

    ``qualification`` overrides the order s used in the qualification
    inequality, so a deliberately wrong claim (say s = 2 for a single
    shifted inversion) is reported as violated.  When the scheme's own
    qualification is unbounded and no finite override is given, the
    qualification check is recorded as trivially satisfied with infinite
    margin.

    The grid spans [min(lam, t_max) * 1e-9, t_max] logarithmically: the
    lower end sits far below the regularization strength because that is
    where the inverse-order bound is approached.
    """
    if not (t_max > 0.0):
        raise InputError(f"t_max must be positive, got {t_max!r}")
    if grid_size < 2:
        raise InputError(f"grid_size must be at least 2, got {grid_size!r}")
    s = scheme.qualification if qualification is None else float(qualification)
    if s < 0.0:
        raise InputError(f"qualification order must be non-negative, got {s!r}")

    lam = scheme.lam
    lo = min(lam, t_max) * 1e-9
    grid = np.geomspace(lo, t_max, grid_size)
    g = filter_value(scheme, grid)
    r = residual_value(scheme, grid)

    def scan(name: str, values: np.ndarray, bound: float) -> InequalityCheck:
        gaps = bound - values
        worst = int(np.argmin(gaps))
        margin = float(gaps[worst])
        return InequalityCheck(name=name, margin=margin, worst_t=float(grid[worst]),
                               satisfied=margin >= -1e-12 * max(1.0, abs(bound)))

    checks = [
        scan("residual_sup", np.abs(r), scheme.residual_bound),
        scan("half_order", np.sqrt(grid) * np.abs(g),
             scheme.half_order_bound / math.sqrt(lam)),
        scan("inverse_order", np.abs(g), scheme.inverse_order_bound / lam),
    ]
    if math.isinf(s):
        checks.append(InequalityCheck(name="qualification", margin=math.inf,
                                      worst_t=float(grid[0]), satisfied=True))
    else:
        gaps = lam**s - grid**s * np.abs(r)
        worst = int(np.argmin(gaps))
        checks.append(InequalityCheck(
            name="qualification", margin=float(gaps[worst]), worst_t=float(grid[worst]),
            satisfied=float(gaps[worst]) >= -1e-12 * max(1.0, lam**s)))
    return SchemeCheckReport(scheme=scheme, t_max=float(t_max), grid_size=int(grid_size),
                             qualification=s, checks=tuple(checks))
