import math

import numpy as np
import pytest
from scipy.special import beta as beta_fn, gamma as gamma_fn

from hslab.core import bump, extremal, make_params, sphere_area, tangent_basis, with_kinks
from hslab.errors import SingularityError
from hslab.experiments import bump_field
from hslab.functionals import grad_pnorm, weighted_starnorm
from hslab.quadrature import (AxisymField, _panel_nodes, axisym_integral, axisym_rule, ball_rule,
                              integrate_ball, radial_as_axisym, radial_integral, radial_rule)


def test_exponential_moment():
    P = make_params(3, 1.5, 0.5)
    assert radial_integral(lambda r: np.exp(-r), 0.0, P) == pytest.approx(8 * math.pi, rel=1e-12)


def test_euler_lagrange_example():
    P = make_params(5, 2, 1)
    U = extremal(P)
    lhs = radial_integral(lambda r: U.value(r) ** P.pstar, P.beta, P, breaks=U.breaks)
    rhs = grad_pnorm(U, P)
    assert lhs == pytest.approx(rhs, rel=1e-8)


def test_singularity_detection():
    P = make_params(4, 2, 1)
    # f = U^2 with weight p: integrable since N - p > 0
    radial_integral(lambda r: extremal(P).value(r) ** 2, P.p, P, origin_exponent=0.0,
                    tail_exponent=2 * (P.N - P.p) / (P.p - 1))
    with pytest.raises(SingularityError):
        radial_integral(lambda r: r ** -P.N, 0.0, P, origin_exponent=-P.N)
    with pytest.raises(SingularityError):
        radial_integral(lambda r: 1.0 / (1 + r) ** 2, 0.0, P, tail_exponent=2.0)


def test_non_finite_integrand():
    P = make_params(4, 2, 1)
    with pytest.raises(SingularityError):
        radial_integral(lambda r: np.where(r < 0.5, np.inf, 1.0) * np.exp(-r), 0.0, P)


def test_single_panel_exactness():
    x, w = _panel_nodes(np.array([0.3, 1.7]), 16)
    for k in (0, 5, 17, 31):
        exact = (1.7 ** (k + 1) - 0.3 ** (k + 1)) / (k + 1)
        assert np.dot(x ** k, w) == pytest.approx(exact, rel=1e-13)


def test_rule_weights_positive_nodes_inside():
    rule = radial_rule(breaks=(0.3, 4.0))
    r, w = rule.nodes_weights()
    assert np.all(w > 0)
    assert np.all(np.diff(r) > 0)
    for (a, b), _, _ in rule.panels:
        assert a < b


def _battery():
    """20 integrands of int_0^inf g(r) r^(N-1-w) dr with closed forms (radial part only)."""
    out = []
    for N, w, a in [(3, 0.0, 0.0), (4, 0.5, 1.0), (5, 1.0, 2.0), (3, 1.2, 0.5), (6, 0.0, 3.0)]:
        s = N - w + a                     # r^(s-1) total power
        out.append((N, w, lambda r, a=a: r ** a * np.exp(-r), gamma_fn(s)))
        out.append((N, w, lambda r, a=a: r ** a * np.exp(-r * r), 0.5 * gamma_fn(s / 2)))
        b = s / 2 + 1.5
        out.append((N, w, lambda r, a=a, b=b: r ** a / (1 + r * r) ** b, 0.5 * beta_fn(s / 2, b - s / 2)))
        c = s + 2.2
        out.append((N, w, lambda r, a=a, c=c: r ** a / (1 + r) ** c, beta_fn(s, c - s)))
    return out


@pytest.mark.parametrize("case", range(20))
def test_error_estimate_is_conservative(case):
    N, w, g, exact = _battery()[case]
    P = make_params(N, 1.5, 0.1)
    exact *= sphere_area(N)
    val, err = radial_integral(g, w, P, tol=1e-10, return_error=True)
    assert abs(val - exact) <= max(err, 1e-14 * abs(exact))
    assert abs(val - exact) <= 1e-10 * abs(exact)


def test_axisym_matches_radial():
    P = make_params(5, 2, 1)
    U = extremal(P)
    f = radial_as_axisym(U)
    a = axisym_integral(AxisymField(lambda r, t: f.value(r, t) ** P.pstar, f.grad, breaks_r=U.breaks),
                        P.beta, P)
    b = radial_integral(lambda r: U.value(r) ** P.pstar, P.beta, P, breaks=U.breaks)
    assert a == pytest.approx(b, rel=1e-10)


@pytest.mark.parametrize("L", [3.0, 12.0])
def test_translated_bump(L):
    P = make_params(3, 1.5, 0.5)

    def val(r, t):
        q = r * r + L * L - 2 * r * L * np.cos(t)
        d = np.where(q < 1, 1 - q, 1.0)
        return np.where(q < 1, np.exp(-1 / d), 0.0)

    f = AxisymField(val, lambda r, t: (0 * r, 0 * t), breaks_r=(L - 1, L, L + 1),
                    breaks_theta=(float(np.arcsin(1 / L)),))
    ref = radial_integral(bump(0, 1), 0.0, P, 1e-12)
    assert axisym_integral(f, 0.0, P, 1e-9) == pytest.approx(ref, rel=1e-8)
    # the ball rule centred on the bump gives the same value
    ball, _, _ = integrate_ball(val, ball_rule(L, 1.0), P, 0.0, 1e-10)
    assert ball == pytest.approx(ref, rel=1e-8)


def test_far_bump_gradient_energy():
    P = make_params(5, 2.5, 1)
    G = grad_pnorm(extremal(P), P)
    u = bump_field(P, 40.0, 0.0).as_axisym()
    g = axisym_integral(lambda r, t: u.grad_sq(r, t) ** (P.p / 2), 0.0, P, 1e-8,
                        rule=axisym_rule(u, 1e-8))
    assert abs(g / G - 1) < 1e-3


def test_literal_prefactor_does_not_reduce_to_U():
    # multiplying the whole field by (|x|/|x - x0|)^(beta/pstar) changes U itself
    P = make_params(5, 2.5, 1)
    G = grad_pnorm(extremal(P), P)
    u = bump_field(P, 40.0, 0.0, prefactor="literal")
    g = axisym_integral(lambda r, t: u.grad_sq(r, t) ** (P.p / 2), 0.0, P, 1e-8,
                        rule=axisym_rule(u, 1e-8))
    assert abs(g / G - 1) > 0.5


def test_kink_grading_restores_accuracy():
    # |Z|^pstar has a kink at the zero of Z; the graded rule converges to tight tolerance
    P = make_params(3, 1.5, 0.5)
    _, Z = tangent_basis(P)
    Zg = with_kinks(Z, "value", P.pstar)
    a = radial_integral(lambda r: np.abs(Zg.value(r)) ** P.pstar, P.beta, P, 1e-12, breaks=Zg.breaks)
    b = weighted_starnorm(Z, P, 1e-10)
    assert a == pytest.approx(b, rel=1e-10)
