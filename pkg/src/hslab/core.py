"""Parameters, derived constants and the closed-form extremal family.

Everything here is exact arithmetic on closed forms; no quadrature.
"""

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Tuple

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError


def sphere_area(n):
    """Surface measure of the unit sphere S^{n-1} in R^n (n >= 1)."""
    if n < 1:
        raise DomainError("sphere dimension must be >= 1", bound="n >= 1")
    return math.exp(math.log(2.0) + 0.5 * n * math.log(math.pi) - math.lgamma(0.5 * n))


@dataclass(frozen=True)
class Params:
    """A validated triple (N, p, beta) with every derived constant.

    ``m`` is the exponent (p-beta)/(p-1) of r in the extremal profile,
    ``K`` and ``q`` describe the change of variable r = s**q that turns
    the linearised radial problem into a dimension-K problem.
    """

    N: int
    p: float
    beta: float
    pstar: float
    m: float
    K: float
    q: float
    Cnpb: float
    cnp: float
    sphere_area: float

    @property
    def gamma(self):
        """Stability exponent max{p, 2}."""
        return max(self.p, 2.0)

    @property
    def classical(self):
        """True at beta = 0, which lies outside the proved regime 0 < beta < p."""
        return self.beta == 0.0

    @property
    def low_branch(self):
        """p <= 2N/(N+2-beta), equivalently pstar <= 2."""
        return self.p <= 2.0 * self.N / (self.N + 2.0 - self.beta)

    def key(self):
        return (self.N, self.p, self.beta)

    def as_dict(self):
        return {
            "N": self.N, "p": self.p, "beta": self.beta, "pstar": self.pstar,
            "m": self.m, "K": self.K, "q": self.q, "Cnpb": self.Cnpb,
            "cnp": self.cnp, "sphere_area": self.sphere_area,
        }


def make_params(N, p, beta):
    """Validate (N, p, beta) and compute the derived constants."""
    if int(N) != N or N < 2:
        raise DomainError(f"N must be an integer >= 2, got {N}", bound="N >= 2")
    N = int(N)
    p = float(p)
    beta = float(beta)
    if not p > 1.0:
        raise DomainError(f"need p > 1, got p = {p}", bound="p > 1")
    if not p < N:
        raise DomainError(f"need p < N, got p = {p} >= N = {N}", bound="p < N")
    if beta < 0.0:
        raise DomainError(f"need beta >= 0, got beta = {beta}", bound="beta >= 0")
    if not beta < p:
        raise DomainError(f"need beta < p, got beta = {beta} >= p = {p}", bound="beta < p")

    pstar = p * (N - beta) / (N - p)
    m = (p - beta) / (p - 1.0)
    K = p * (N - beta) / (p - beta)
    q = p / (p - beta)
    # beta close to p drives the normalisation past double range
    log_C = (N - p) / (p * (p - beta)) * (math.log(N - beta) + (p - 1.0) * math.log((N - p) / (p - 1.0)))
    if log_C > 700.0:
        raise DomainError(f"normalisation constant exp({log_C:.4g}) overflows; beta = {beta} is too close to p",
                          bound="representable normalisation")
    Cnpb = math.exp(log_C)
    cnp = Cnpb * (N - p) / (p - 1.0)
    return Params(N, p, beta, pstar, m, K, q, Cnpb, cnp, sphere_area(N))


@dataclass(frozen=True)
class RadialProfile:
    """A radial function u(|x|) with its radial derivative.

    ``breaks`` lists radii where the profile has reduced smoothness or a
    sharp feature; quadrature inserts them as panel boundaries.
    """

    value: Callable
    dvalue: Callable
    support_hint: Optional[float] = None
    breaks: Tuple[float, ...] = field(default=())

    def __call__(self, r):
        return self.value(r)

    def scaled(self, c):
        c = float(c)
        return RadialProfile(lambda r: c * self.value(r), lambda r: c * self.dvalue(r),
                             self.support_hint, self.breaks)

    def __add__(self, other):
        hint = None
        if self.support_hint is not None and other.support_hint is not None:
            hint = max(self.support_hint, other.support_hint)
        return RadialProfile(lambda r: self.value(r) + other.value(r),
                             lambda r: self.dvalue(r) + other.dvalue(r),
                             hint, tuple(sorted(set(self.breaks) | set(other.breaks))))

    def __sub__(self, other):
        return self + other.scaled(-1.0)

    def __rmul__(self, c):
        return self.scaled(c)


def sign_changes(f, hi=1e4, lo=1e-6, n=20001):
    """Interior zeros of f on [lo, hi], located on a geometric scan and polished by brentq."""
    r = np.geomspace(lo, hi, n)
    v = f(r)
    sg = np.sign(v)
    idx = np.nonzero(sg[:-1] * sg[1:] < 0.0)[0]
    roots = [brentq(f, r[i], r[i + 1], xtol=1e-14 * r[i]) for i in idx]
    # a zero can land exactly on a scan node
    hit = np.nonzero((sg[1:-1] == 0.0) & (sg[:-2] * sg[2:] < 0.0))[0] + 1
    roots += [float(r[i]) for i in hit]
    return tuple(sorted(roots))


KINK_LEVELS = 4


def graded_points(points, levels=KINK_LEVELS, neighbours=()):
    """Edges x0 +- delta 2^-j (j = 0..levels) around each point.

    Panels that merely end at a kink |x - x0|^a only converge like h^(a+1)
    under uniform refinement; geometric grading restores fast convergence.
    delta is a quarter of the gap to the nearest other point or neighbour.
    """
    pts = np.sort(np.asarray(points, dtype=float))
    if pts.size == 0:
        return ()
    others = np.unique(np.concatenate([pts, np.asarray(neighbours, dtype=float), [0.0]]))
    out = []
    for x0 in pts:
        gaps = np.abs(others - x0)
        gaps = gaps[gaps > 0.0]
        delta = 0.25 * (gaps.min() if gaps.size else x0)
        steps = delta * 2.0 ** -np.arange(levels + 1)
        out.extend(x0 - steps)
        out.extend(x0 + steps)
        out.append(x0)
    return tuple(x for x in out if x > 0.0)


def with_kinks(u, which="dvalue", power=None):
    """Copy of u whose breaks are graded toward the zeros of u.value or u.dvalue.

    |u|^s and |u'|^s are only finitely smooth there, so quadrature panels
    must be graded toward these points to keep fast convergence.  Nothing
    is done when ``power`` is an even integer.
    """
    if power is not None and float(power) % 2.0 == 0.0:
        return u
    hi = u.support_hint if u.support_hint is not None else 1e4
    extra = sign_changes(getattr(u, which), hi)
    if not extra:
        return u
    brk = set(u.breaks) | set(graded_points(extra, neighbours=u.breaks))
    return RadialProfile(u.value, u.dvalue, u.support_hint, tuple(sorted(brk)))


def _check_lambda(lam):
    if not lam > 0:
        raise DomainError(f"lambda must be positive, got {lam}", bound="lambda > 0")
    return float(lam)


def _extremal_parts(params, lam):
    P = params
    a0 = (P.N - P.p) / P.p
    a = (P.N - P.p) / (P.p - P.beta)
    b = (P.N - P.beta) / (P.p - P.beta)
    amp = P.Cnpb * lam ** a0
    damp = -P.cnp * lam ** (a0 + P.m)

    def value(r):
        r = np.asarray(r, dtype=float)
        return amp * (1.0 + (lam * r) ** P.m) ** (-a)

    def dvalue(r):
        r = np.asarray(r, dtype=float)
        with np.errstate(divide="ignore"):
            out = damp * r ** (P.m - 1.0) * (1.0 + (lam * r) ** P.m) ** (-b)
        # r = 0 with beta > 1: the derivative is a signed infinity
        return np.where(np.isinf(out), -np.inf, out)

    def ddvalue(r):
        r = np.asarray(r, dtype=float)
        lr = (lam * r) ** P.m
        with np.errstate(divide="ignore", invalid="ignore"):
            return damp * ((P.m - 1.0) * r ** (P.m - 2.0) * (1.0 + lr) ** (-b)
                           - b * P.m * lr * r ** (P.m - 2.0) * (1.0 + lr) ** (-b - 1.0))

    return value, dvalue, ddvalue, a0


def extremal(params, lam=1.0):
    """The extremal U_lambda as a RadialProfile."""
    lam = _check_lambda(lam)
    value, dvalue, _, _ = _extremal_parts(params, lam)
    return RadialProfile(value, dvalue, breaks=(1.0 / lam,))


def tangent_basis(params, lam=1.0):
    """Return (U_lambda, Z_lambda) where Z_lambda = dU_lambda/dlambda.

    At lambda = 1, Z is ((N-p)/p) U + r U', a positive multiple of
    ((p-1) - r**m) / (1 + r**m)**((N-beta)/(p-beta)).
    """
    lam = _check_lambda(lam)
    value, dvalue, ddvalue, a0 = _extremal_parts(params, lam)

    def zvalue(r):
        r = np.asarray(r, dtype=float)
        with np.errstate(invalid="ignore"):
            rd = np.where(r == 0.0, 0.0, r * dvalue(r))
        return (a0 * value(r) + rd) / lam

    def zdvalue(r):
        r = np.asarray(r, dtype=float)
        with np.errstate(invalid="ignore"):
            rdd = np.where(r == 0.0, 0.0, r * ddvalue(r))
        return ((a0 + 1.0) * dvalue(r) + rdd) / lam

    U = RadialProfile(value, dvalue, breaks=(1.0 / lam,))
    Z = RadialProfile(zvalue, zdvalue, breaks=(1.0 / lam,))
    return U, Z


def phi0(params, r):
    """Kernel profile ((p-1) - r**m) / (1 + r**m)**((N-beta)/(p-beta))."""
    P = params
    r = np.asarray(r, dtype=float)
    rm = r ** P.m
    return ((P.p - 1.0) - rm) / (1.0 + rm) ** ((P.N - P.beta) / (P.p - P.beta))


def bump(center=0.0, width=1.0, amplitude=1.0):
    """Smooth compactly supported radial bump exp(-1/(1-s^2)), s = (r-center)/width."""
    center = float(center)
    width = float(width)

    def value(r):
        s = (np.asarray(r, dtype=float) - center) / width
        inside = np.abs(s) < 1.0
        d = np.where(inside, 1.0 - s * s, 1.0)
        return amplitude * np.where(inside, np.exp(-1.0 / d), 0.0)

    def dvalue(r):
        s = (np.asarray(r, dtype=float) - center) / width
        inside = np.abs(s) < 1.0
        d = np.where(inside, 1.0 - s * s, 1.0)
        return amplitude * np.where(inside, np.exp(-1.0 / d) * (-2.0 * s / d ** 2) / width, 0.0)

    lo = max(center - width, 0.0)
    brk = tuple(x for x in (lo, center, center + width) if x > 0.0)
    return RadialProfile(value, dvalue, support_hint=center + width, breaks=brk)
