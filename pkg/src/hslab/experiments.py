"""Sharpness constructions for the stability exponent and a sampled stability floor.

Two families show that the exponent gamma = max(p, 2) cannot be lowered:

* p < 2: an anisotropic stretch of the extremal along one axis,
  u_n(x) = (|x|/|A_n x|)^(beta/pstar) U(A_n x), A_n = diag(1, ..., 1, 1 + 1/n);
* p >= 2: a small bump placed far from the bubble, U + eps * phi(x + x_n).

Both are axisymmetric about e_N; the bump sits at |x_n| e_N.
"""

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import linregress

from .core import RadialProfile, bump, extremal
from .errors import HslabError, RegimeError
from .functionals import deficit, grad_pnorm
from .manifold import DistanceOptions, distance
from .quadrature import AxisymField, PerturbedRadial, ball_rule, integrate_ball

R2_MIN = 0.99


# ----------------------------------------------------------------------------
# fields


def diagonal_field(params, n):
    """u_n(x) = (|x|/|A_n x|)^(beta/pstar) U(A_n x) in polar form about e_N.

    With s(theta) = sqrt(sin^2 + a^2 cos^2), a = 1 + 1/n, one has
    |A_n x| = r s(theta) and u_n = s^(-beta/pstar) U(r s).
    """
    P = params
    a = 1.0 + 1.0 / n
    e = P.beta / P.pstar
    U = extremal(P)

    def s_of(t):
        return np.sqrt(np.sin(t) ** 2 + a * a * np.cos(t) ** 2)

    def value(r, t):
        s = s_of(t)
        return s ** (-e) * U.value(r * s)

    def grad(r, t):
        s = s_of(t)
        ds = (1.0 - a * a) * np.sin(t) * np.cos(t) / s
        rs = r * s
        du = U.dvalue(rs)
        g_r = s ** (1.0 - e) * du
        g_t = ds * s ** (-e) * (du - e * U.value(rs) / rs)
        return g_r, g_t

    return AxisymField(value, grad, "e_N", breaks_r=(1.0,))


def _phi_parts(L):
    """Distance to L e_N and the bump exp(-1/(1-rho^2)) with d(phi)/d(rho) / rho."""

    def rho2(r, t):
        return r * r + L * L - 2.0 * r * L * np.cos(t)

    def phi(q):
        inside = q < 1.0
        d = np.where(inside, 1.0 - q, 1.0)
        return np.where(inside, np.exp(-1.0 / d), 0.0)

    def dphi_over_rho(q):
        inside = q < 1.0
        d = np.where(inside, 1.0 - q, 1.0)
        return np.where(inside, -2.0 * np.exp(-1.0 / d) / d ** 2, 0.0)

    return rho2, phi, dphi_over_rho


def bump_field(params, x0_norm, eps, prefactor="none"):
    """U + eps * phi(. - x0_norm e_N), phi(y) = exp(-1/(1-|y|^2)) on the unit ball.

    ``prefactor="literal"`` multiplies the whole sum by (|x|/|x - x0_norm e_N|)^(beta/pstar).
    That variant does not reduce to U as eps -> 0: near the bubble the
    factor is about (|x|/x0_norm)^(beta/pstar), not 1.  It is kept only so
    the difference can be demonstrated; the default leaves U untouched.
    """
    P = params
    L = float(x0_norm)
    eps = float(eps)
    U = extremal(P)
    rho2, phi, dpr = _phi_parts(L)

    def value(r, t):
        return U.value(r) + eps * phi(rho2(r, t))

    def grad(r, t):
        k = eps * dpr(rho2(r, t))
        return U.dvalue(r) + k * (r - L * np.cos(t)), k * L * np.sin(t)

    if prefactor == "none":
        return PerturbedRadial(U, L, 1.0, value, grad)
    if prefactor != "literal":
        raise ValueError(f"prefactor must be 'none' or 'literal', got {prefactor!r}")
    e = P.beta / P.pstar

    def lvalue(r, t):
        return (r / np.sqrt(rho2(r, t))) ** e * value(r, t)

    def lgrad(r, t):
        q = rho2(r, t)
        w = (r / np.sqrt(q)) ** e
        v = value(r, t)
        gr, gt = grad(r, t)
        # grad log w = e (x/|x|^2 - (x - L e_N)/|x - L e_N|^2)
        lr = e * (1.0 / r - (r - L * np.cos(t)) / q)
        lt = -e * L * np.sin(t) / q
        return w * (gr + lr * v), w * (gt + lt * v)

    return AxisymField(lvalue, lgrad, "e_N", breaks_r=(1.0, L - 1.0, L, L + 1.0),
                       breaks_theta=(float(np.arcsin(1.0 / L)),))


def audit_gradient(fld, n_points=50, seed=0, h=1e-6, rtol=1e-5, r_range=(0.05, 5.0),
                   theta_range=(0.05, np.pi - 0.05)):
    """Compare the analytic gradient with central differences at random points.

    Returns the largest relative discrepancy (relative to |grad|); raises
    HslabError when it exceeds ``rtol``.
    """
    rng = np.random.default_rng(seed)
    r = np.exp(rng.uniform(np.log(r_range[0]), np.log(r_range[1]), n_points))
    t = rng.uniform(theta_range[0], theta_range[1], n_points)
    gr, gt = fld.grad(r, t)
    hr = h * r
    fr = (fld.value(r + hr, t) - fld.value(r - hr, t)) / (2.0 * hr)
    ft = (fld.value(r, t + h) - fld.value(r, t - h)) / (2.0 * h) / r
    scale = np.hypot(gr, gt)
    scale = np.maximum(scale, 1e-8 * np.abs(fld.value(r, t)) / r + 1e-300)
    worst = float(np.max(np.hypot(gr - fr, gt - ft) / scale))
    if worst > rtol:
        raise HslabError(f"gradient audit failed: relative discrepancy {worst:.3e} > {rtol}")
    return worst


# ----------------------------------------------------------------------------
# tables and fits


def _g17(x):
    return format(float(x), ".17g")


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    stderr: float
    intercept: float
    r2: float
    npoints: int

    @property
    def accepted(self):
        return self.npoints >= 4 and self.r2 >= R2_MIN

    def as_dict(self):
        return {"slope": _g17(self.slope), "stderr": _g17(self.stderr),
                "intercept": _g17(self.intercept), "r2": _g17(self.r2), "npoints": self.npoints,
                "accepted": self.accepted}


def fit_loglog(x, y):
    """Least-squares slope of log y against log x."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(x <= 0) or np.any(y <= 0):
        raise ValueError("log-log fit needs positive data")
    res = linregress(np.log(x), np.log(y))
    return SlopeFit(float(res.slope), float(res.stderr), float(res.intercept),
                    float(res.rvalue ** 2), len(x))


@dataclass(frozen=True)
class ScalingTable:
    """Rows (control, deficit, distance, deficit / distance^gamma) and slope fits.

    Slopes are taken against ``fit_variable`` (1/n or eps) so that both
    families report positive exponents.
    """

    name: str
    gamma: float
    control_name: str
    rows: tuple
    fits: dict
    params: dict
    fit_variable: str
    meta: dict = field(default_factory=dict)

    @property
    def control(self):
        return np.array([r[0] for r in self.rows])

    @property
    def deficits(self):
        return np.array([r[1] for r in self.rows])

    @property
    def distances(self):
        return np.array([r[2] for r in self.rows])

    @property
    def quotients(self):
        return np.array([r[3] for r in self.rows])

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["control", "deficit", "distance", "quotient"])
        for row in self.rows:
            w.writerow([_g17(v) for v in row])
        return buf.getvalue()

    def to_json(self):
        body = {"name": self.name, "gamma": _g17(self.gamma), "control_name": self.control_name,
                "fit_variable": self.fit_variable,
                "params": {k: _g17(v) for k, v in self.params.items()},
                "rows": [[_g17(v) for v in row] for row in self.rows],
                "fits": {k: v.as_dict() for k, v in self.fits.items()},
                "meta": self.meta}
        return json.dumps(body, indent=2, sort_keys=True)


def _table(name, params, control_name, controls, xfit, fit_variable, fields, dist_opts, meta):
    gamma = params.gamma
    rows = []
    for c, u in zip(controls, fields):
        rep = deficit(u, params)
        dist = distance(u, params, dist_opts)
        q = rep.deficit / dist.d ** gamma if dist.d > 0 else float("nan")
        rows.append((float(c), rep.deficit, dist.d, q))
    defs = np.array([r[1] for r in rows])
    dists = np.array([r[2] for r in rows])
    fits = {}
    if len(rows) >= 2 and np.all(defs > 0) and np.all(dists > 0):
        fits = {"deficit": fit_loglog(xfit, defs), "distance": fit_loglog(xfit, dists)}
    return ScalingTable(name, gamma, control_name, tuple(rows), fits, params.as_dict(),
                        fit_variable, meta)


def sharpness_diag(params, n_list=(8, 16, 32, 64), dist_opts=None, audit=True):
    """Deficit and distance of the anisotropic family along n_list."""
    P = params
    if not 1.0 < P.p < 2.0:
        raise RegimeError(f"the diagonal family needs 1 < p < 2, got p = {P.p}")
    n_list = [int(n) for n in n_list]
    if any(n < 4 for n in n_list) or sorted(n_list) != n_list:
        raise ValueError("n_list must be ascending with every n >= 4")
    fields = [diagonal_field(P, n) for n in n_list]
    audits = [audit_gradient(f, seed=i) for i, f in enumerate(fields)] if audit else []
    meta = {"gradient_audit_max": _g17(max(audits)) if audits else None}
    return _table("diagonal", P, "n", n_list, 1.0 / np.array(n_list, dtype=float), "1/n",
                  fields, dist_opts, meta)


def sharpness_bump(params, x0_norm=40.0, eps_list=(0.1, 0.05, 0.025, 0.0125), dist_opts=None,
                   audit=True):
    """Deficit and distance of U + eps phi(. - x0) along eps_list."""
    P = params
    if P.p < 2.0:
        raise RegimeError(f"the bump family needs p >= 2, got p = {P.p}")
    if x0_norm < 10:
        raise ValueError("x0_norm must be at least 10")
    eps_list = [float(e) for e in eps_list]
    U0 = float(extremal(P).value(x0_norm))
    fields = [bump_field(P, x0_norm, e) for e in eps_list]
    audits = []
    if audit:
        lo, hi = x0_norm - 0.99, x0_norm + 0.99
        audits = [audit_gradient(f, seed=i, r_range=(lo, hi), theta_range=(1e-3, 0.9 / x0_norm))
                  for i, f in enumerate(fields)]
    meta = {"U_at_x0": _g17(U0), "eps_over_U_at_x0_min": _g17(min(eps_list) / U0),
            "gradient_audit_max": _g17(max(audits)) if audits else None}
    return _table("bump", P, "eps", eps_list, np.array(eps_list), "eps", fields, dist_opts, meta)


def bump_remainders(params, x0_norm, tol=1e-10):
    """Interaction terms of U + phi(. - x0): (r1, r2, U(x0)).

    r1 = int |grad(U + phi)|^p - int |grad U|^p - int |grad phi|^p and
    r2 is the same split of int |x|^-beta |.|^pstar.  Both vanish as the
    bump moves off to infinity, at a rate controlled by U(x0).
    """
    P = params
    u = bump_field(P, x0_norm, 1.0)
    rho2, phi, dpr = _phi_parts(float(x0_norm))
    U = extremal(P)
    rule = ball_rule(u.center, u.radius)

    def g_inc(r, t):
        return u.grad_sq(r, t) ** (0.5 * P.p) - np.abs(U.dvalue(r)) ** P.p

    def g_phi(r, t):
        q = rho2(r, t)
        return (np.abs(dpr(q)) * np.sqrt(q)) ** P.p

    def s_inc(r, t):
        return np.abs(u.value(r, t)) ** P.pstar - U.value(r) ** P.pstar

    def s_phi(r, t):
        return phi(rho2(r, t)) ** P.pstar

    vals = [integrate_ball(h, rule, P, w, tol)[0]
            for h, w in ((g_inc, 0.0), (g_phi, 0.0), (s_inc, P.beta), (s_phi, P.beta))]
    return vals[0] - vals[1], vals[2] - vals[3], float(U.value(x0_norm))


# ----------------------------------------------------------------------------
# empirical stability constant


BUMP_RADII = (0.3, 1.0, 3.0)
BUMP_WIDTHS = (0.2, 1.0)


def _bump_basis():
    return [bump(r0, w) for r0 in BUMP_RADII for w in BUMP_WIDTHS]


def _combination(coefs, basis, c, lam, params, delta):
    U = extremal(params, lam)
    brk = set(U.breaks)
    for b in basis:
        brk |= set(b.breaks)
    coefs = np.asarray(coefs, dtype=float)

    def value(r):
        return c * U.value(r) + delta * sum(a * b.value(r) for a, b in zip(coefs, basis))

    def dvalue(r):
        return c * U.dvalue(r) + delta * sum(a * b.dvalue(r) for a, b in zip(coefs, basis))

    return RadialProfile(value, dvalue, breaks=tuple(sorted(brk)))


@dataclass(frozen=True)
class StabilityResult:
    empirical_B: float
    worst: dict
    samples: tuple
    rejected: int
    gamma: float

    def as_dict(self):
        return {"empirical_B": _g17(self.empirical_B), "gamma": _g17(self.gamma),
                "rejected": self.rejected,
                "worst": {k: (_g17(v) if isinstance(v, float) else v) for k, v in self.worst.items()},
                "samples": [{k: (_g17(v) if isinstance(v, float) else v) for k, v in s.items()}
                            for s in self.samples]}

    def __iter__(self):
        return iter((self.empirical_B, self.worst))


def draw_perturbation(rng):
    """One draw from the perturbation family; the draw order is fixed per sample."""
    c = float(rng.uniform(0.5, 2.0)) * (1.0 if rng.uniform() < 0.8 else -1.0)
    loglam = float(rng.uniform(-1.0, 1.0))
    coefs = rng.standard_normal(len(BUMP_RADII) * len(BUMP_WIDTHS))
    rel = float(np.exp(rng.uniform(np.log(0.01), np.log(0.3))))
    return c, loglam, coefs, rel


def stability_sample(params, n_samples=200, seed=42, perturbation_family="radial_bumps",
                     window=(0.01, 0.3), dist_opts=None, max_draws_factor=20):
    """min over samples of deficit / d^gamma for u = c U_lambda + delta * bumps.

    Each sample uses its own generator seeded from (seed, index), so the
    first k samples of a larger run equal a run with n_samples = k.
    Samples whose relative distance falls outside ``window`` are redrawn.
    """
    if perturbation_family != "radial_bumps":
        raise ValueError(f"unknown perturbation family {perturbation_family!r}")
    P = params
    gamma = P.gamma
    basis = _bump_basis()
    samples = []
    rejected = 0
    for i in range(int(n_samples)):
        rng = np.random.default_rng([int(seed), i])
        for _ in range(max_draws_factor):
            c, loglam, coefs, rel = draw_perturbation(rng)
            lam = float(np.exp(loglam))
            Ul = extremal(P, lam)
            unit = _combination(coefs, basis, 0.0, lam, P, 1.0)
            gu = grad_pnorm(Ul, P) ** (1.0 / P.p) * abs(c)
            gb = grad_pnorm(unit, P) ** (1.0 / P.p)
            delta = rel * gu / gb
            u = _combination(coefs, basis, c, lam, P, delta)
            dist = distance(u, P, dist_opts)
            ratio = dist.d / dist.grad_norm
            if window[0] <= ratio <= window[1]:
                break
            rejected += 1
        else:
            raise HslabError(f"sample {i}: no draw landed in the distance window")
        rep = deficit(u, P)
        samples.append({"index": i, "c": c, "lambda": lam, "delta": float(delta),
                        "rel_distance": float(ratio), "deficit": rep.deficit, "d": dist.d,
                        "quotient": rep.deficit / dist.d ** gamma})
    worst = min(samples, key=lambda s: (s["quotient"], s["index"]))
    return StabilityResult(float(worst["quotient"]), dict(worst), tuple(samples), rejected, gamma)
