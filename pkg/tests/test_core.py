import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hslab.core import (bump, extremal, graded_points, make_params, phi0, sign_changes, sphere_area,
                        tangent_basis, with_kinks)
from hslab.errors import DomainError


def test_params_531():
    P = make_params(5, 2, 1)
    assert P.pstar == pytest.approx(8 / 3, rel=1e-15)
    assert (P.K, P.q, P.m) == (8.0, 2.0, 1.0)
    assert P.gamma == 2.0
    assert not P.low_branch


def test_params_sobolev_amplitude():
    P = make_params(4, 2, 0)
    assert P.Cnpb == pytest.approx(math.sqrt(8), rel=1e-14)
    assert P.cnp == pytest.approx(P.Cnpb * 2, rel=1e-15)
    assert P.classical


@pytest.mark.parametrize("args, bound", [
    ((4, 4, 1), "p < N"),
    ((4, 1.0, 0.5), "p > 1"),
    ((4, 2, -0.1), "beta >= 0"),
    ((4, 2, 2), "beta < p"),
    ((1, 1.5, 0.1), "N >= 2"),
    ((3.5, 2, 1), "N >= 2"),
])
def test_params_domain_errors(args, bound):
    with pytest.raises(DomainError) as exc:
        make_params(*args)
    assert exc.value.bound == bound


def test_sphere_area():
    assert sphere_area(2) == pytest.approx(2 * math.pi, rel=1e-14)
    assert sphere_area(3) == pytest.approx(4 * math.pi, rel=1e-14)
    assert sphere_area(4) == pytest.approx(2 * math.pi ** 2, rel=1e-14)


def test_extremal_values():
    P = make_params(4, 2, 0)
    U = extremal(P)
    assert U.value(0.0) == pytest.approx(math.sqrt(8), rel=1e-14)
    assert U.dvalue(1.0) == pytest.approx(-math.sqrt(8) / 2, rel=1e-14)


def test_extremal_scaling_example():
    P = make_params(5, 2, 1)
    a = (P.N - P.p) / P.p
    lhs = extremal(P, 2.0).value(1.0)
    rhs = 2.0 ** a * extremal(P).value(2.0)
    assert lhs == pytest.approx(rhs, rel=1e-14)


def test_extremal_rejects_lambda():
    P = make_params(5, 2, 1)
    for lam in (0.0, -1.0):
        with pytest.raises(DomainError):
            extremal(P, lam)
        with pytest.raises(DomainError):
            tangent_basis(P, lam)


def test_derivative_sentinel_at_origin():
    P = make_params(5, 2.5, 1.5)          # beta > 1: U'(r) ~ r^((1-beta)/(p-1))
    assert extremal(P).dvalue(0.0) == -np.inf
    assert np.isfinite(extremal(make_params(5, 2, 0.5)).dvalue(0.0))


def test_tangent_zero_531():
    P = make_params(5, 2, 1)
    _, Z = tangent_basis(P)
    zeros = sign_changes(Z.value)
    assert len(zeros) == 1
    assert zeros[0] == pytest.approx((P.p - 1) ** ((P.p - 1) / (P.p - P.beta)), rel=1e-12)


def test_tangent_at_origin():
    P = make_params(4, 2, 0)
    U, Z = tangent_basis(P)
    assert Z.value(0.0) == pytest.approx((P.N - P.p) / P.p * U.value(0.0), rel=1e-15)


def test_tangent_proportional_to_phi0():
    P = make_params(3, 1.5, 0.5)
    _, Z = tangent_basis(P)
    r = np.geomspace(1e-3, 1e3, 200)
    ratio = Z.value(r) / phi0(P, r)
    ok = np.abs(phi0(P, r)) > 1e-3 * np.abs(phi0(P, r)).max()
    assert np.ptp(ratio[ok]) <= 1e-10 * np.abs(ratio[ok]).max()


def test_tangent_central_difference():
    P = make_params(3, 1.5, 0.5)
    h = 1e-4
    _, Z = tangent_basis(P)
    r = np.geomspace(1e-2, 1e2, 101)
    fd = (extremal(P, 1 + h).value(r) - extremal(P, 1 - h).value(r)) / (2 * h)
    scale = np.abs(Z.value(r)).max()
    assert np.max(np.abs(fd - Z.value(r))) <= 1e-7 * scale


triples = st.sampled_from([(3, 1.5, 0.45), (4, 2, 0.6), (5, 2.5, 1.75), (5, 2, 1), (3, 1.3, 0.1)])


@settings(max_examples=100, deadline=None)
@given(triples, st.floats(-3, 3), st.floats(-3, 3))
def test_scaling_identity(tr, loglam, logr):
    P = make_params(*tr)
    lam, r = math.exp(loglam), math.exp(logr)
    a = (P.N - P.p) / P.p
    assert extremal(P, lam).value(r) == pytest.approx(lam ** a * extremal(P).value(lam * r), rel=1e-12)


@settings(max_examples=50, deadline=None)
@given(triples, st.floats(-2, 2), st.floats(-3, 3))
def test_positive_decreasing_and_derivative(tr, loglam, logr):
    P = make_params(*tr)
    U = extremal(P, math.exp(loglam))
    r = math.exp(logr)
    h = 1e-5 * r
    assert U.value(r) > 0
    assert U.dvalue(r) < 0
    fd = (U.value(r + h) - U.value(r - h)) / (2 * h)
    assert fd == pytest.approx(U.dvalue(r), rel=1e-6)


@settings(max_examples=50, deadline=None)
@given(triples, st.floats(-3, 3))
def test_tangent_derivative_matches_fd(tr, logr):
    P = make_params(*tr)
    _, Z = tangent_basis(P)
    r = math.exp(logr)
    h = 1e-5 * r
    fd = (Z.value(r + h) - Z.value(r - h)) / (2 * h)
    assert fd == pytest.approx(Z.dvalue(r), rel=1e-6, abs=1e-9 * abs(Z.value(r)) / r)


def test_bump_support_and_derivative():
    b = bump(3.0, 1.0, 2.0)
    assert b.value(np.array([1.9, 4.1])).tolist() == [0.0, 0.0]
    assert b.value(3.0) == pytest.approx(2 * math.exp(-1))
    r = np.linspace(2.1, 3.9, 37)
    fd = (b.value(r + 1e-6) - b.value(r - 1e-6)) / 2e-6
    assert np.allclose(fd, b.dvalue(r), rtol=1e-6, atol=1e-9)
    assert b.support_hint == 4.0


def test_profile_algebra():
    P = make_params(5, 2, 1)
    U = extremal(P)
    v = 2.0 * U - bump(1, 0.5)
    r = np.array([0.7, 1.0, 2.0])
    assert np.allclose(v.value(r), 2 * U.value(r) - bump(1, 0.5).value(r))
    assert set(v.breaks) >= {0.5, 1.0, 1.5}


def test_graded_points():
    pts = graded_points([1.0], levels=3)
    assert 1.0 in pts
    assert min(pts) == pytest.approx(0.75)
    assert max(pts) == pytest.approx(1.25)
    assert len(pts) == 9


def test_with_kinks_even_power_noop():
    P = make_params(5, 2, 1)
    _, Z = tangent_basis(P)
    assert with_kinks(Z, "value", 2.0) is Z
    graded = with_kinks(Z, "value", 8 / 3)
    assert len(graded.breaks) > len(Z.breaks)
    assert 1.0 in graded.breaks


def test_normalisation_overflow_is_domain_error():
    with pytest.raises(DomainError) as exc:
        make_params(3, 1.125, 1.122802734375)
    assert exc.value.bound == "representable normalisation"
