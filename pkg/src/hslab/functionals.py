"""Energy functionals of the Hardy-Sobolev inequality.

    int |grad u|^p  >=  S * (int |x|^-beta |u|^pstar)^(p/pstar)

Fields may be a RadialProfile (1-D quadrature), an AxisymField (tensor
quadrature in (r, theta)) or a PerturbedRadial (radial part plus an
increment over a ball).
"""

from dataclasses import dataclass

import numpy as np

from .core import RadialProfile, extremal, with_kinks
from .quadrature import (AxisymField, PerturbedRadial, axisym_integral, axisym_rule, ball_rule,
                         integrate_ball, radial_integral)
from .spectral import mode_lambda

_SHARP = {}
SHARP_TOL = 1e-12


def _radial_parts(u, params, which):
    P = params
    if which == "grad":
        return (lambda r: np.abs(u.dvalue(r)) ** P.p), 0.0
    return (lambda r: np.abs(u.value(r)) ** P.pstar), P.beta


def _field_parts(u, params, which):
    P = params
    if which == "grad":
        return (lambda r, t: u.grad_sq(r, t) ** (0.5 * P.p)), 0.0
    return (lambda r, t: np.abs(u.value(r, t)) ** P.pstar), P.beta


def _split_integral(u, params, which, tol):
    """(radial part, ball increment, error) for a PerturbedRadial."""
    f, w = _radial_parts(u.base, params, which)
    g, _ = _field_parts(u, params, which)
    base, err0 = radial_integral(f, w, params, tol, breaks=u.base.breaks, return_error=True)

    def incr(r, t):
        return g(r, t) - f(r)

    rule = ball_rule(u.center, u.radius)
    inc, err1, _ = integrate_ball(incr, rule, params, w, tol * 1e-3, scale=abs(base))
    return base, inc, err0 + err1


def _integral(u, params, which, tol):
    """Returns (value, error)."""
    if isinstance(u, RadialProfile):
        u = (with_kinks(u, "dvalue", params.p) if which == "grad"
             else with_kinks(u, "value", params.pstar))
        f, w = _radial_parts(u, params, which)
        return radial_integral(f, w, params, tol, breaks=u.breaks, return_error=True)
    if isinstance(u, AxisymField):
        g, w = _field_parts(u, params, which)
        return axisym_integral(g, w, params, tol, return_error=True, rule=axisym_rule(u, tol))
    if isinstance(u, PerturbedRadial):
        base, inc, err = _split_integral(u, params, which, tol)
        return base + inc, err
    raise TypeError(f"unsupported field type {type(u).__name__}")


def grad_pnorm(u, params, tol=1e-10, return_error=False):
    """int_{R^N} |grad u|^p."""
    val, err = _integral(u, params, "grad", tol)
    return (val, err) if return_error else val


def weighted_starnorm(u, params, tol=1e-10, return_error=False):
    """int_{R^N} |x|^-beta |u|^pstar."""
    val, err = _integral(u, params, "star", tol)
    return (val, err) if return_error else val


def sharp_constant(params):
    """S = (int |grad U|^p)^((pstar-p)/pstar), cached per (N, p, beta)."""
    key = params.key()
    if key not in _SHARP:
        G = grad_pnorm(extremal(params), params, SHARP_TOL)
        _SHARP[key] = (G ** ((params.pstar - params.p) / params.pstar), G)
    return _SHARP[key][0]


def extremal_energy(params):
    """int |grad U|^p for U = U_1 (the cached value behind sharp_constant)."""
    sharp_constant(params)
    return _SHARP[params.key()][1]


@dataclass(frozen=True)
class DeficitReport:
    grad_p: float
    star_norm: float
    star_pow: float
    deficit: float
    quad_tol: float
    sharp: float
    outside_proved_regime: bool = False

    def as_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def deficit(u, params, tol=1e-10):
    """grad_p - S * star_norm^(p/pstar), with a quadrature error estimate.

    For a PerturbedRadial the base and the increment are combined with
    log1p/expm1 so the deficit keeps its relative accuracy when tiny.
    """
    P = params
    S = sharp_constant(P)
    e = P.p / P.pstar
    if isinstance(u, PerturbedRadial):
        gb, gi, ge = _split_integral(u, P, "grad", tol)
        sb, si, se = _split_integral(u, P, "star", tol)
        base_def = gb - S * sb ** e
        scale = S * sb ** e
        d = base_def + gi - scale * np.expm1(e * np.log1p(si / sb)) if sb > 0 else gb + gi
        grad_p, star = gb + gi, sb + si
    else:
        grad_p, ge = grad_pnorm(u, P, tol, return_error=True)
        star, se = weighted_starnorm(u, P, tol, return_error=True)
        d = grad_p - S * star ** e
    star_pow = star ** e
    err = ge + S * e * star ** (e - 1.0) * se if star > 0 else ge
    qt = err / grad_p if grad_p > 0 else 0.0
    return DeficitReport(float(grad_p), float(star), float(star_pow), float(d), float(max(qt, tol)),
                         float(S), P.classical)


def quadratic_form(v, k, params, tol=1e-10):
    """Second variation at U_1 restricted to mode k: returns (A, B).

    A = (p-1) int |U'|^(p-2) v'^2 + lambda_k int |U'|^(p-2) v^2 / r^2
    B = int |x|^-beta U^(pstar-2) v^2
    """
    P = params
    U = extremal(P)
    lam = mode_lambda(P, k)
    brk = tuple(sorted(set(U.breaks) | set(getattr(v, "breaks", ()))))

    def a_grad(r):
        return (P.p - 1.0) * np.abs(U.dvalue(r)) ** (P.p - 2.0) * v.dvalue(r) ** 2

    def a_zero(r):
        return np.abs(U.dvalue(r)) ** (P.p - 2.0) * v.value(r) ** 2

    def b_int(r):
        return U.value(r) ** (P.pstar - 2.0) * v.value(r) ** 2

    A = radial_integral(a_grad, 0.0, P, tol, breaks=brk)
    if lam:
        A += lam * radial_integral(a_zero, 2.0, P, tol, breaks=brk)
    B = radial_integral(b_int, P.beta, P, tol, breaks=brk)
    return float(A), float(B)
