from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import ratioreg as rr
from ratioreg.regularization import (filter_quotient_value, filter_zero_value,
                                     iterated_lavrentiev, spectral_cutoff)

ALL_K = (1, 2, 3, 5, 10)
LAMBDAS = (0.9, 0.5, 0.2, 0.1, 0.05)


def test_scheme_validation():
    with pytest.raises(rr.InputError):
        rr.RegScheme(kind="tikhonov", lam=0.1)
    with pytest.raises(rr.InputError):
        rr.RegScheme(kind="lavrentiev", lam=0.0)
    with pytest.raises(rr.InputError):
        rr.RegScheme(kind="lavrentiev", lam=-1.0)
    with pytest.raises(rr.InputError):
        rr.RegScheme(kind="iterated_lavrentiev", lam=0.1, iterations=0)
    with pytest.raises(rr.InputError):
        rr.RegScheme(kind="lavrentiev", lam=0.1, iterations=3)


def test_scheme_constants():
    for k in ALL_K:
        scheme = iterated_lavrentiev(0.3, k)
        assert scheme.residual_bound == 1.0
        assert scheme.half_order_bound == math.sqrt(k)
        assert scheme.inverse_order_bound == k
        assert scheme.qualification == k
    cutoff = spectral_cutoff(0.3)
    assert (cutoff.residual_bound, cutoff.half_order_bound,
            cutoff.inverse_order_bound) == (1.0, 1.0, 1.0)
    assert math.isinf(cutoff.qualification)


def test_scheme_round_trip():
    scheme = iterated_lavrentiev(0.25, 4)
    data = scheme.to_dict()
    assert data == {"kind": "iterated_lavrentiev", "k": 4, "lambda": 0.25}
    assert rr.RegScheme.from_dict(data) == scheme


def test_filter_value_single_step_examples():
    assert rr.filter_value(iterated_lavrentiev(0.5, 1), 0.5) == 1.0
    assert rr.filter_value(iterated_lavrentiev(1.0, 2), 1.0) == 0.75


def test_filter_value_at_zero_is_analytic_limit():
    for k in ALL_K:
        for lam in LAMBDAS:
            scheme = iterated_lavrentiev(lam, k)
            assert rr.filter_value(scheme, 0.0) == k / lam
            near = rr.filter_value(scheme, 1e-12)
            assert near == pytest.approx(k / lam, rel=1e-6)


def test_residual_examples():
    assert rr.residual_value(iterated_lavrentiev(0.1, 1), 0.9) == pytest.approx(0.1, rel=1e-14)
    scheme = iterated_lavrentiev(0.3, 4)
    t = 0.7
    # numpy's pow and CPython's pow may disagree in the last ulp
    assert rr.residual_value(scheme, t) == pytest.approx((0.3 / (0.3 + t)) ** 4,
                                                         rel=1e-15)


def test_cutoff_filter_and_residual():
    scheme = spectral_cutoff(0.5)
    assert rr.filter_value(scheme, 0.4) == 0.0
    assert rr.filter_value(scheme, 0.5) == 2.0
    assert rr.filter_value(scheme, 2.0) == 0.5
    assert rr.filter_value(scheme, 0.0) == 0.0
    assert rr.residual_value(scheme, 0.4) == 1.0
    assert rr.residual_value(scheme, 0.5) == 0.0
    assert filter_zero_value(scheme) == 0.0
    assert filter_quotient_value(scheme, 2.0) == 0.25
    assert filter_quotient_value(scheme, 0.1) == 0.0


def test_negative_spectrum_rejected():
    with pytest.raises(rr.InputError):
        rr.filter_value(iterated_lavrentiev(0.1, 1), -0.5)


@pytest.mark.parametrize("k", ALL_K)
@pytest.mark.parametrize("lam", LAMBDAS)
def test_filter_residual_identity(k, lam):
    """t * g(t) + r(t) = 1 across ten decades of t."""
    scheme = iterated_lavrentiev(lam, k)
    t = np.geomspace(1e-10, 10.0, 2000)
    identity = t * rr.filter_value(scheme, t) + rr.residual_value(scheme, t)
    assert np.abs(identity - 1.0).max() <= 1e-12


@pytest.mark.parametrize("k", ALL_K)
def test_residual_nesting(k):
    """Iterating k times multiplies the one-step residual k-fold."""
    t = np.geomspace(1e-8, 2.0, 500)
    one_step = rr.residual_value(iterated_lavrentiev(0.2, 1), t)
    k_step = rr.residual_value(iterated_lavrentiev(0.2, k), t)
    assert np.abs(k_step / one_step**k - 1.0).max() <= 1e-12


@settings(max_examples=60, deadline=None)
@given(
    lam_small=st.floats(1e-4, 10.0),
    factor=st.floats(1.0 + 1e-6, 100.0),
    t=st.floats(1e-10, 10.0),
    k=st.integers(1, 12),
)
def test_filter_monotone_in_lambda(lam_small, factor, t, k):
    low = rr.filter_value(iterated_lavrentiev(lam_small, k), t)
    high = rr.filter_value(iterated_lavrentiev(lam_small * factor, k), t)
    assert high <= low * (1.0 + 1e-12)


@settings(max_examples=60, deadline=None)
@given(lam=st.floats(1e-4, 10.0), t=st.floats(0.0, 10.0), k=st.integers(1, 12))
def test_residual_in_unit_interval(lam, t, k):
    r = rr.residual_value(iterated_lavrentiev(lam, k), t)
    assert 0.0 < r <= 1.0


def test_quotient_matches_naive_at_moderate_t():
    for k in ALL_K:
        scheme = iterated_lavrentiev(0.2, k)
        t = np.array([1e-3, 0.05, 0.3, 1.0, 2.0])
        naive = (rr.filter_value(scheme, t) - filter_zero_value(scheme)) / t
        stable = filter_quotient_value(scheme, t)
        assert np.abs((stable - naive) / naive).max() <= 1e-12


def test_quotient_limit_at_zero():
    for k in ALL_K:
        for lam in (0.9, 0.2):
            scheme = iterated_lavrentiev(lam, k)
            expected = -k * (k + 1) / (2.0 * lam**2)
            assert filter_quotient_value(scheme, 0.0) == pytest.approx(expected, rel=1e-14)


def test_constants_check_iterated_holds():
    report = rr.check_scheme_constants(iterated_lavrentiev(0.2, 3), t_max=2.0)
    assert report.all_satisfied
    assert {c.name for c in report.checks} == {
        "residual_sup", "half_order", "inverse_order", "qualification"}
    assert all(c.margin >= 0.0 for c in report.checks)


def test_constants_check_cutoff_holds():
    report = rr.check_scheme_constants(spectral_cutoff(0.3), t_max=2.0)
    assert report.all_satisfied
    qual = [c for c in report.checks if c.name == "qualification"][0]
    assert math.isinf(qual.margin)


def test_constants_check_flags_wrong_qualification():
    """A single shifted inversion cannot carry a qualification-2 claim."""
    report = rr.check_scheme_constants(rr.lavrentiev(0.05), t_max=2.0,
                                       qualification=2.0)
    qual = [c for c in report.checks if c.name == "qualification"][0]
    assert not qual.satisfied
    assert not report.all_satisfied
    others = [c for c in report.checks if c.name != "qualification"]
    assert all(c.satisfied for c in others)


def test_constants_check_cutoff_finite_override():
    # cutoff satisfies any finite qualification as well
    report = rr.check_scheme_constants(spectral_cutoff(0.3), t_max=2.0,
                                       qualification=4.0)
    assert report.all_satisfied


def test_constants_check_validation():
    with pytest.raises(rr.InputError):
        rr.check_scheme_constants(rr.lavrentiev(0.1), t_max=0.0)
    with pytest.raises(rr.InputError):
        rr.check_scheme_constants(rr.lavrentiev(0.1), t_max=1.0, grid_size=1)
    with pytest.raises(rr.InputError):
        rr.check_scheme_constants(rr.lavrentiev(0.1), t_max=1.0, qualification=-1.0)


def test_check_report_serializable():
    report = rr.check_scheme_constants(iterated_lavrentiev(0.2, 3), t_max=2.0)
    data = report.to_dict()
    assert data["all_satisfied"] is True
    assert data["scheme"]["k"] == 3
    assert len(data["checks"]) == 4
