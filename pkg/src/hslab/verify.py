"""Falsification-style checks of the auxiliary inequalities.

Every check samples its inputs (or a family of test functions), computes
the smallest constant that makes the inequality hold on the sample, and
reports margins and violations at that constant.  Nothing here proves an
inequality; a positive, seed-stable constant with no violations is the
expected outcome.

Magnitudes are drawn log-uniformly over [1e-6, 1e6] and angles uniformly,
since the case analyses behind these inequalities live at extreme ratios.
"""

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import linregress

from .core import RadialProfile, bump, extremal, make_params, tangent_basis, with_kinks
from .errors import RegimeError
from .quadrature import radial_integral
from .spectral import restricted_poincare

SLACK = 1e-10
QUANTILES = (0.0, 0.01, 0.05, 0.5, 0.95, 0.99, 1.0)
LOG_RANGE = (-6.0, 6.0)
FE_SLACK = 1e-3
TAIL_TARGET = (-2.0, 0.3)
FAMILY_TOL = 1e-8


def jsonable(x):
    """Nested structure with floats as 17-significant-digit strings."""
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.17g}"
    if isinstance(x, dict):
        return {str(k): jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple, np.ndarray)):
        return [jsonable(v) for v in x]
    return x


@dataclass
class IneqReport:
    """Outcome of one check.

    ``margin_distribution`` maps quantile levels to the relative margin
    (RHS - LHS) / scale evaluated at ``estimated_constant``.  ``failures``
    lists any structural problem (non-positive constant, a failed fit,
    a violated side condition).
    """

    name: str
    samples_tested: int
    violations: int
    estimated_constant: float
    margin_distribution: dict
    params: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)

    @property
    def passed(self):
        return self.violations == 0 and not self.failures

    def as_dict(self):
        return {
            "name": self.name,
            "passed": self.passed,
            "samples_tested": self.samples_tested,
            "violations": self.violations,
            "estimated_constant": self.estimated_constant,
            "margin_distribution": self.margin_distribution,
            "params": self.params,
            "details": self.details,
            "failures": list(self.failures),
        }

    def to_json(self):
        return json.dumps(jsonable(self.as_dict()), indent=2, sort_keys=True)


def _quantiles(margins):
    m = np.asarray(margins, dtype=float)
    m = m[np.isfinite(m)]
    if m.size == 0:
        return {}
    return {f"{q:g}": float(np.quantile(m, q)) for q in QUANTILES}


def _loguniform(rng, n, lo=LOG_RANGE[0], hi=LOG_RANGE[1]):
    return 10.0 ** rng.uniform(lo, hi, n)


# ----------------------------------------------------------------------------
# vector inequality for |x + y|^p
def a1_terms(p, kappa, t, theta):
    """(surplus, M, scale, side) at x = (1, 0), y = t (cos theta, sin theta).

    ``surplus`` is |x+y|^p minus every right-hand term except the C1 term,
    so the inequality reads surplus >= C1 * M.  ``side`` is the quantity
    |x|^(p-2)|y|^2 + (p-2)|omega|^(p-2)(|x| - |x+y|)^2 for 1 < p < 2.
    """
    t = np.asarray(t, dtype=float)
    c = np.cos(theta)
    s = t * (2.0 * c + t)                       # |x+y|^2 - 1
    xy = np.sqrt(1.0 + s)
    gap = -s / (1.0 + xy)                       # |x| - |x+y|
    lhs_minus_one = np.expm1(0.5 * p * np.log1p(s))
    if p < 2.0:
        w = np.where(xy > 1.0, xy / ((2.0 - p) * xy + (p - 1.0)), 1.0)
    else:
        with np.errstate(divide="ignore", invalid="ignore"):
            w = np.where(xy <= 1.0, xy * xy ** (p - 2.0), 1.0)
    side = t * t + (p - 2.0) * w * gap ** 2
    quad = 0.5 * (1.0 - kappa) * p * side
    surplus = lhs_minus_one - p * t * c - quad
    M = np.minimum(t ** p, t * t) if p < 2.0 else t ** p
    scale = np.maximum.reduce([np.ones_like(t), xy ** p, np.abs(p * t * c), np.abs(quad), M])
    return surplus, M, scale, side


def check_vector_ineq_A1(p, kappa, n_samples=100_000, seed=0):
    """Sampled check of the |x+y|^p lower bound with its C1 remainder."""
    p = float(p)
    if not (p > 1.0 and 0.0 < kappa < 1.0):
        raise ValueError("need p > 1 and 0 < kappa < 1")
    rng = np.random.default_rng(seed)
    t = _loguniform(rng, n_samples)
    theta = rng.uniform(0.0, 2.0 * np.pi, n_samples)
    surplus, M, scale, side = a1_terms(p, kappa, t, theta)
    C1 = float(np.min(surplus / M))
    margins = (surplus - C1 * M) / scale
    viol = int(np.sum(margins < -SLACK))
    failures = []
    if not C1 > 0.0:
        failures.append(f"estimated C1 = {C1:.6g} is not positive")
    details = {"branch": "p<2" if p < 2.0 else "p>=2", "kappa": kappa, "seed": seed,
               "argmin_t": float(t[np.argmin(surplus / M)])}
    if p < 2.0:
        side_viol = int(np.sum(side < -SLACK * np.maximum(t * t, 1.0)))
        details["side_condition_min"] = float(np.min(side / np.maximum(t * t, 1.0)))
        details["side_condition_violations"] = side_viol
        viol += side_viol
    return IneqReport(f"vector_A1[p={p:g}]", n_samples, viol, C1, _quantiles(margins),
                      {"p": p}, details, failures)


# ----------------------------------------------------------------------------
# scalar inequality for |a + b|^q, q = pstar
def a2_terms(q, kappa, a, b):
    """Pieces of the |a+b|^q upper bound.

    Returns (lhs, rest, coef) with rest = |a|^q + q|a|^(q-2) a b and coef
    the weight (q(q-1)/2 + kappa).  For a = 1 the power is evaluated with
    expm1/log1p to keep small |b| accurate.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    coef = 0.5 * q * (q - 1.0) + kappa
    with np.errstate(divide="ignore", invalid="ignore"):
        lin = np.where(a == 0.0, 0.0, q * np.abs(a) ** (q - 2.0) * a * b)
        rel = np.where(a == 0.0, 0.0, b / np.where(a == 0.0, 1.0, a))
        lhs_minus = np.where(a == 0.0, np.abs(b) ** q,
                             np.abs(a) ** q * np.expm1(q * np.log(np.abs(1.0 + rel))))
    return lhs_minus - lin, coef


def check_scalar_ineq_A2(params, kappa, n_samples=100_000, seed=0):
    """Sampled check of the |a+b|^pstar upper bound; reports the minimal workable C2.

    In the pstar <= 2 branch the remainder is taken as
    coef * (|a| + C2|b|)^pstar |b|^2 / (|a|^2 + |b|^2), which is the
    homogeneous form of the bound.
    """
    if not kappa > 0.0:
        raise ValueError("need kappa > 0")
    P = params
    q = P.pstar
    low = P.low_branch
    rng = np.random.default_rng(seed)
    n0 = max(n_samples // 100, 1)
    t = _loguniform(rng, n_samples - n0)
    sign = rng.choice([-1.0, 1.0], n_samples - n0)
    a = np.concatenate([np.ones(n_samples - n0), np.zeros(n0)])
    b = np.concatenate([sign * t, rng.choice([-1.0, 1.0], n0) * _loguniform(rng, n0)])
    excess, coef = a2_terms(q, kappa, a, b)          # |a+b|^q - |a|^q - q|a|^(q-2)ab
    bb = np.abs(b)
    if low:
        X = excess * (a * a + bb * bb) / (coef * bb * bb)
        with np.errstate(invalid="ignore"):
            root = np.where(X > 0.0, np.abs(X) ** (1.0 / q), 0.0)
        need = (root - np.abs(a)) / bb
        C2 = float(max(np.max(need), 0.0))
        rhs_rem = coef * (np.abs(a) + C2 * bb) ** q * bb * bb / (a * a + bb * bb)
    else:
        quad = coef * np.abs(a) ** (q - 2.0) * bb * bb
        need = (excess - quad) / bb ** q
        C2 = float(max(np.max(need), 0.0))
        rhs_rem = quad + C2 * bb ** q
    scale = np.maximum.reduce([np.abs(a) ** q, bb ** q, np.abs(rhs_rem), np.ones_like(bb) * 1e-300])
    margins = (rhs_rem - excess) / scale
    viol = int(np.sum(margins < -SLACK))
    failures = [] if np.isfinite(C2) else ["no finite C2"]
    details = {"branch": "pstar<=2" if low else "pstar>2", "pstar": q, "kappa": kappa, "seed": seed,
               "argmax_b": float(b[np.argmax(need)])}
    return IneqReport(f"scalar_A2[{P.N},{P.p:g},{P.beta:g}]", n_samples, viol, C2,
                      _quantiles(margins), P.as_dict(), details, failures)


# ----------------------------------------------------------------------------
# smooth radial test functions
def _f(x):
    with np.errstate(divide="ignore", over="ignore"):
        return np.where(x > 0.0, np.exp(-1.0 / np.where(x > 0.0, x, 1.0)), 0.0)


def _df(x):
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        xs = np.where(x > 0.0, x, 1.0)
        return np.where(x > 0.0, np.exp(-1.0 / xs) / xs ** 2, 0.0)


def cutoff(R):
    """Smooth chi(r/R): 1 for r <= R/2, 0 for r >= R.  Returns (value, dvalue)."""
    R = float(R)

    def value(r):
        s = np.asarray(r, dtype=float) / R
        A, B = _f(1.0 - s), _f(s - 0.5)
        return A / (A + B)

    def dvalue(r):
        s = np.asarray(r, dtype=float) / R
        A, B = _f(1.0 - s), _f(s - 0.5)
        dA, dB = -_df(1.0 - s), _df(s - 0.5)
        return (dA * B - A * dB) / (A + B) ** 2 / R

    return value, dvalue


def truncated(u, R):
    """u * chi(r/R) as a RadialProfile."""
    cv, cd = cutoff(R)
    return RadialProfile(lambda r: u.value(r) * cv(r),
                         lambda r: u.dvalue(r) * cv(r) + u.value(r) * cd(r),
                         support_hint=R, breaks=tuple(u.breaks) + (0.5 * R, R))


def truncated_power(gamma, r0, R):
    """(r0^2 + r^2)^(-gamma/2) cut off smoothly at R."""
    base = RadialProfile(lambda r: (r0 * r0 + np.asarray(r, dtype=float) ** 2) ** (-0.5 * gamma),
                         lambda r: -gamma * np.asarray(r, dtype=float)
                         * (r0 * r0 + np.asarray(r, dtype=float) ** 2) ** (-0.5 * gamma - 1.0),
                         breaks=(r0,))
    return truncated(base, R)


def _train(rng, k):
    out = None
    for _ in range(k):
        c = 10.0 ** rng.uniform(-1.3, 1.7)
        w = c * rng.uniform(0.2, 0.9)
        b = bump(c, w, rng.choice([-1.0, 1.0]) * rng.uniform(0.5, 1.5))
        out = b if out is None else out + b
    return out


def with_critical_breaks(u):
    return with_kinks(with_kinks(u, "dvalue"), "value")


def radial_family(rng, size, params=None, include=()):
    """Compactly supported radial profiles: origin bumps, bump trains, truncated powers."""
    fam = [(name, u) for name, u in include]
    j = 0
    while len(fam) < size:
        kind = j % 4
        if kind == 0:
            w = 10.0 ** rng.uniform(-1.0, 1.5)
            fam.append((f"origin_bump_{j}", bump(0.0, w)))
        elif kind == 1:
            fam.append((f"train_{j}", _train(rng, 1 + int(rng.integers(0, 3)))))
        elif kind == 2:
            g = rng.uniform(0.1, 3.0)
            r0 = 10.0 ** rng.uniform(-2.0, 0.0)
            R = 10.0 ** rng.uniform(0.5, 2.0)
            fam.append((f"power_{j}", truncated_power(g, r0, R)))
        else:
            c = 10.0 ** rng.uniform(-1.0, 1.5)
            fam.append((f"bump_{j}", bump(c, c * rng.uniform(0.3, 0.95))))
        j += 1
    return [(name, with_critical_breaks(u)) for name, u in fam[:size]]


def _rint(f, w, params, u, extra=()):
    return radial_integral(f, w, params, FAMILY_TOL, breaks=tuple(u.breaks) + tuple(extra))


# ----------------------------------------------------------------------------
# Hardy-Poincare inequality with the explicit constant
def hardy_constant(params, xi):
    P = params
    if xi == 1.0:
        return ((P.N - P.beta) / P.p) ** P.p
    return (P.N - P.beta) * ((xi - 1.0) * (P.p - P.beta) / (P.p - 1.0)) ** (P.p - 1.0)


def hardy_ratio(w, params, xi):
    """(RHS, LHS) of the weighted Hardy-Poincare inequality for a radial w."""
    P = params

    def V(r):
        return (1.0 + np.asarray(r, dtype=float) ** P.m) ** (P.p - 1.0)

    lhs = _rint(lambda r: np.abs(w.value(r)) ** P.p * V(r) ** (xi - 1.0), P.beta, P, w)
    rhs = _rint(lambda r: np.abs(w.dvalue(r)) ** P.p * V(r) ** xi, 0.0, P, w)
    return rhs, lhs


def check_hardy_poincare(params, xi, family_size=24, seed=0):
    """Family ratio RHS/LHS against the explicit constant (relative slack 1e-6)."""
    if not xi >= 1.0:
        raise ValueError("need xi >= 1")
    P = params
    Cbar = hardy_constant(P, xi)
    rng = np.random.default_rng(seed)
    fam = radial_family(rng, family_size, P, include=[("U_cut50", truncated(extremal(P), 50.0))])
    names, ratios = [], []
    for name, w in fam:
        rhs, lhs = hardy_ratio(w, P, xi)
        names.append(name)
        ratios.append(rhs / lhs)
    ratios = np.array(ratios)
    margins = ratios / Cbar - 1.0
    viol = int(np.sum(margins < -1e-6))
    est = float(np.min(ratios))
    failures = [] if np.all(np.isfinite(ratios)) else ["non-finite ratio"]
    details = {"xi": xi, "Cbar": Cbar, "seed": seed, "argmin": names[int(np.argmin(ratios))],
               "U_cut50_ratio": float(ratios[0])}
    return IneqReport(f"hardy_poincare[{P.N},{P.p:g},{P.beta:g};xi={xi:g}]", len(fam), viol, est,
                      _quantiles(margins), P.as_dict(), details, failures)


# ----------------------------------------------------------------------------
# pointwise inequality used in the low-exponent compactness argument
POLISH_STARTS = 5
B2_STRATA = ("r<=1,b_low", "r<=1,b_mid", "r<=1,b_high", "r>1,b_low", "r>1,b_mid", "r>1,b_high")


def b2_logterms(params, eps0, eps, r, a, b):
    """Logs of (LHS, E, D1, D2) for the pointwise inequality.

    LHS <= E + C * D1 is the sharp form and LHS <= E + C * D2 the weak one.
    """
    P = params
    zeta_p = eps0 / 3.0
    lr = np.log(r)
    lX = np.log1p(r ** P.m)
    s = (P.N - P.p) / (P.p - P.beta)
    lpre = (-s * (P.pstar - 2.0) + P.p - 1.0) * lX
    la, lb, le = np.log(a), np.log(b), np.log(eps)
    t1 = 2 * la + np.log(zeta_p) + P.p * (1.0 - P.beta) / (P.p - 1.0) * lr - P.p * lX
    t2 = 2 * la + P.p * (le + lb) + s * P.p * lX
    t3 = (2.0 - P.p) * la + P.p * lb
    lhs = lpre + np.logaddexp(np.logaddexp(t1, t2), t3)
    E = np.log(eps0) - P.beta * lr - s * (P.pstar - 2.0) * lX + 2 * la
    lW = -(P.N - P.beta) / (P.p - P.beta) * lX + (1.0 - P.beta) / (P.p - 1.0) * lr
    D2 = (P.p - 2.0) * np.logaddexp(lW, le + lb) + 2 * lb
    D1 = D2 - P.m * np.log1p(r)
    return lhs, E, D1, D2


def _b2_sample(params, eps0, rng, n, stratum):
    P = params
    zeta = (eps0 / 3.0) ** (1.0 / P.p)
    small = stratum.startswith("r<=1")
    r = 10.0 ** (rng.uniform(LOG_RANGE[0], 0.0, n) if small else rng.uniform(0.0, LOG_RANGE[1], n))
    eps = 10.0 ** rng.uniform(LOG_RANGE[0], 0.0, n)
    amax = zeta * (1.0 + r ** P.m) ** (-(P.N - P.p) / (P.p - P.beta)) / eps
    a = amax * 10.0 ** rng.uniform(-12.0, 0.0, n)
    c = (eps0 / 3.0) ** (1.0 / P.p)
    if small:
        t1 = c * a * r ** (-P.beta / P.p)
        t2 = r ** ((1.0 - P.beta) / (P.p - 1.0)) / eps
    else:
        t1 = c * a / r
        t2 = r ** ((1.0 - P.N) / (P.p - 1.0)) / eps
    span = LOG_RANGE[1] - LOG_RANGE[0]
    if stratum.endswith("low"):
        b = t1 * 10.0 ** rng.uniform(-span, 0.0, n)
    elif stratum.endswith("high"):
        b = t2 * 10.0 ** rng.uniform(0.0, span, n)
    else:
        lo, hi = np.minimum(t1, t2), np.maximum(t1, t2)
        b = lo * (hi / lo) ** rng.uniform(0.0, 1.0, n)
    return eps, r, a, b


def _b2_need(params, eps0, z, form):
    """Needed C at z = (log eps, log r, log(a / a_max), log b); the domain is folded in."""
    P = params
    le = -abs(z[0])
    lr = float(np.clip(z[1], LOG_RANGE[0] * np.log(10.0), LOG_RANGE[1] * np.log(10.0)))
    eps, r = np.exp(le), np.exp(lr)
    amax = (eps0 / 3.0) ** (1.0 / P.p) * (1.0 + r ** P.m) ** (-(P.N - P.p) / (P.p - P.beta)) / eps
    a = amax * np.exp(-abs(z[2]))
    b = np.exp(z[3])
    lhs, E, D1, D2 = b2_logterms(P, eps0, eps, r, a, b)
    D = D1 if form == "sharp" else D2
    return float(np.exp(lhs - D) - np.exp(E - D))


def _b2_polish(params, eps0, starts, form):
    """Local maximisation of the needed constant from the best samples."""
    from scipy.optimize import minimize

    best = -np.inf
    for z0 in starts:
        res = minimize(lambda z: -_b2_need(params, eps0, z, form), z0, method="Nelder-Mead",
                       options={"xatol": 1e-10, "fatol": 1e-13, "maxiter": 4000})
        best = max(best, -res.fun)
    return float(best)


def check_pointwise_B2(params, eps0=0.1, n_samples=100_000, seed=0):
    """Sampled check of the pointwise bound with zeta^p = eps0 / 3.

    Samples are stratified over r <= 1 / r > 1 and the three b-ranges of
    the case analysis; the smallest workable C is reported per stratum for
    both the sharp (with (1+r)^-m) and the weak form.  The overall constant
    is then polished by a local maximisation started at the best samples.
    """
    P = params
    if not P.low_branch:
        raise RegimeError(f"needs p <= 2N/(N+2-beta) = {2 * P.N / (P.N + 2 - P.beta):.6g}, got p = {P.p}")
    rng = np.random.default_rng(seed)
    per = n_samples // len(B2_STRATA)
    sizes = [per + (1 if i < n_samples - per * len(B2_STRATA) else 0) for i in range(len(B2_STRATA))]
    cols = {"sharp": [], "weak": []}
    strata = {}
    parts, samples, amaxes = [], [], []
    for st, n in zip(B2_STRATA, sizes):
        eps, r, a, b = _b2_sample(P, eps0, rng, n, st)
        samples.append((eps, r, a, b))
        amaxes.append((eps0 / 3.0) ** (1.0 / P.p) * (1.0 + r ** P.m) ** (-(P.N - P.p) / (P.p - P.beta)) / eps)
        lhs, E, D1, D2 = b2_logterms(P, eps0, eps, r, a, b)
        need1 = np.exp(lhs - D1) - np.exp(E - D1)
        need2 = np.exp(lhs - D2) - np.exp(E - D2)
        strata[st] = {"C_sharp": float(max(need1.max(), 0.0)), "C_weak": float(max(need2.max(), 0.0)),
                      "n": n}
        parts.append((lhs, E, D1, D2))
        cols["sharp"].append(need1)
        cols["weak"].append(need2)
    C1s = max(s["C_sharp"] for s in strata.values())
    C2s = max(s["C_weak"] for s in strata.values())
    lhs, E, D1, D2 = (np.concatenate(x) for x in zip(*parts))
    zs = np.column_stack([np.log(np.concatenate(x)) for x in zip(*samples)])
    zs[:, 2] -= np.log(np.concatenate(amaxes))
    C1 = max(C1s, _b2_polish(P, eps0, zs[np.argsort(np.concatenate(cols["sharp"]))[-POLISH_STARTS:]], "sharp"))
    C2 = max(C2s, _b2_polish(P, eps0, zs[np.argsort(np.concatenate(cols["weak"]))[-POLISH_STARTS:]], "weak"))
    rhs1 = np.logaddexp(E, np.log(C1) + D1) if C1 > 0 else E
    rhs2 = np.logaddexp(E, np.log(C2) + D2) if C2 > 0 else E
    # relative margins (RHS - LHS) / max(RHS, LHS), computed from logs
    m1 = -np.expm1(lhs - rhs1) * np.minimum(1.0, np.exp(rhs1 - lhs))
    m2 = -np.expm1(lhs - rhs2) * np.minimum(1.0, np.exp(rhs2 - lhs))
    viol = int(np.sum(m1 < -SLACK) + np.sum(m2 < -SLACK))
    failures = []
    if not (np.isfinite(C1) and np.isfinite(C2)):
        failures.append("non-finite constant")
    if C2 > C1 * (1.0 + 1e-12):
        failures.append("weak form needs a larger constant than the sharp form")
    dominant = max(strata, key=lambda k: strata[k]["C_sharp"])
    details = {"eps0": eps0, "zeta_p": eps0 / 3.0, "C_weak": C2, "C_sharp_sampled": C1s,
               "C_weak_sampled": C2s, "strata": strata,
               "dominant_stratum": dominant, "seed": seed}
    return IneqReport(f"pointwise_B2[{P.N},{P.p:g},{P.beta:g}]", int(sum(sizes)), viol, C1,
                      _quantiles(m1), P.as_dict(), details, failures)


# ----------------------------------------------------------------------------
# Poincare inequalities weighted by the extremal
def poincare_parts(phi, params, rho_list=()):
    """(E, M, ball masses, tail masses) for a radial phi.

    E = int |grad U|^(p-2) |grad phi|^2, M = int |x|^-beta U^(pstar-2) phi^2;
    the masses restrict M to B_rho and to the complement of B_(1/rho).
    """
    P = params
    U = extremal(P)

    def e_int(r):
        return np.abs(U.dvalue(r)) ** (P.p - 2.0) * phi.dvalue(r) ** 2

    def m_int(r):
        return U.value(r) ** (P.pstar - 2.0) * phi.value(r) ** 2

    brk = tuple(U.breaks)
    E = _rint(e_int, 0.0, P, phi, brk)
    M = _rint(m_int, P.beta, P, phi, brk)
    ball, tail = [], []
    for rho in rho_list:
        ball.append(_rint(lambda r, rho=rho: m_int(r) * (r < rho), P.beta, P, phi, brk + (rho,)))
        R = 1.0 / rho
        tail.append(_rint(lambda r, R=R: m_int(r) * (r > R), P.beta, P, phi, brk + (R,)))
    return E, M, np.array(ball), np.array(tail)


def check_weighted_poincare(params, rho_list=(0.2, 0.1, 0.05, 0.025), family_size=24, seed=0):
    """Global, small-ball and tail Poincare estimates over a radial family.

    Independently of the family, the supremum over all radial phi of
    mass/energy is computed from the discretised pencil for the whole
    space, for B_rho and for the complement of B_(1/rho).  Each family
    ratio must stay below that supremum (relative slack 1e-3), the
    small-ball exponent is the slope of log sup-ratio against log rho and
    the tail exponent its slope against log|log rho|.
    """
    P = params
    rho = np.asarray(rho_list, dtype=float)
    if np.any((rho <= 0.0) | (rho >= 1.0)):
        raise ValueError("each rho must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    U, Z = tangent_basis(P)
    fam = radial_family(rng, family_size, P, include=[("U", U), ("Z", Z)])

    K_all = restricted_poincare(P, 0.0)
    K_ball = np.array([restricted_poincare(P, 0.0, x) for x in rho])
    K_tail = np.array([restricted_poincare(P, 1.0 / x) for x in rho])
    theta = float(linregress(np.log(rho), np.log(K_ball)).slope)
    tail_fit = linregress(np.log(np.abs(np.log(rho))), np.log(K_tail))
    tail_exp = float(tail_fit.slope)

    names, glob, margins = [], [], []
    thetas = {}
    for name, phi in fam:
        E, M, ball, tail = poincare_parts(phi, P, rho)
        names.append(name)
        glob.append(E / M)
        margins.append(1.0 - (M / E) / K_all)
        margins.extend(1.0 - (ball / E) / K_ball)
        margins.extend(1.0 - (tail / E) / K_tail)
        if np.all(ball > 0.0):
            thetas[name] = float(linregress(np.log(rho), np.log(ball / E)).slope)
    glob = np.array(glob)
    margins = np.array(margins)
    viol = int(np.sum(margins < -FE_SLACK))
    C = float(np.min(glob))
    failures = []
    if not C > 0.0:
        failures.append("global constant is not positive")
    if not theta > 0.0:
        failures.append(f"small-ball exponent {theta:.4g} is not positive")
    if any(v <= 0.0 for v in thetas.values()):
        failures.append("a family member has a non-positive small-ball slope")
    lo, hi = TAIL_TARGET[0] - TAIL_TARGET[1], TAIL_TARGET[0] + TAIL_TARGET[1]
    tail_ok = lo <= tail_exp <= hi
    if not tail_ok:
        failures.append(f"tail exponent {tail_exp:.4g} outside [{lo:g}, {hi:g}]")
    details = {
        "rho": rho.tolist(), "C_global_family": C, "C_global_pencil": 1.0 / K_all,
        "argmin": names[int(np.argmin(glob))], "Z_ratio": float(glob[1]),
        "sup_ball": K_ball.tolist(), "sup_tail": K_tail.tolist(), "theta_fit": theta,
        "theta_family": thetas, "tail_exponent": tail_exp, "tail_r2": float(tail_fit.rvalue ** 2),
        "tail_power_in_rho": float(linregress(np.log(rho), np.log(K_tail)).slope),
        "tail_ok": tail_ok, "seed": seed,
    }
    return IneqReport(f"weighted_poincare[{P.N},{P.p:g},{P.beta:g}]", len(fam), viol, C,
                      _quantiles(margins), P.as_dict(), details, failures)


# ----------------------------------------------------------------------------
# Orlicz-type Poincare inequality
def orlicz_energy(v, params, eps, t):
    """Q = int (|grad U| + eps |grad(t v)|)^(p-2) |grad(t v)|^2."""
    P = params
    U = extremal(P)

    def q_int(r):
        dv = t * np.abs(v.dvalue(r))
        return (np.abs(U.dvalue(r)) + eps * dv) ** (P.p - 2.0) * dv ** 2

    return _rint(q_int, 0.0, P, v, tuple(U.breaks))


def orlicz_parts(v, params, eps, t):
    """(Q, L, min(U + eps t v)/U) for the scaled profile t v.

    L = int |x|^-beta (U + eps t v)^(pstar-2) (t v)^2 is left as nan when
    U + eps t v is not positive, where the weight is singular.
    """
    P = params
    U = extremal(P)
    Q = orlicz_energy(v, P, eps, t)
    r = np.geomspace(1e-4, 1e4, 4001)
    floor = float(np.min(1.0 + eps * t * v.value(r) / U.value(r)))
    if floor <= 0.0:
        return Q, float("nan"), floor

    def l_int(r):
        base = U.value(r) + eps * t * v.value(r)
        return np.abs(base) ** (P.pstar - 2.0) * (t * v.value(r)) ** 2

    return Q, _rint(l_int, P.beta, P, v, tuple(U.breaks)), floor


def _unit_scale(v, params, eps):
    """t > 0 with Q(t v) = 1 (Q is increasing in t)."""
    from scipy.optimize import brentq

    def g(s):
        return np.log(orlicz_energy(v, params, eps, np.exp(s)))

    lo, hi = -5.0, 5.0
    while g(lo) > 0.0:
        lo -= 5.0
    while g(hi) < 0.0:
        hi += 5.0
    return float(np.exp(brentq(g, lo, hi, xtol=1e-12)))


def check_orlicz_poincare(params, eps_list=(1e-3, 3e-3, 1e-2), family_size=12, seed=0):
    """Orlicz-type Poincare bound for radial v scaled to unit energy.

    Profiles for which U + eps v changes sign are excluded (and counted),
    since the weight (U + eps v)^(pstar-2) is singular there when pstar < 2.
    The constant is the largest ratio per eps; it must agree to 10% over eps.
    """
    P = params
    if not P.low_branch:
        raise RegimeError(f"needs p <= 2N/(N+2-beta) = {2 * P.N / (P.N + 2 - P.beta):.6g}, got p = {P.p}")
    rng = np.random.default_rng(seed)
    fam = radial_family(rng, family_size, P, include=[("U", extremal(P))])
    per_eps, margins, excluded = [], [], 0
    ratios = {}
    for eps in eps_list:
        best = 0.0
        for name, v in fam:
            t = _unit_scale(v, P, eps)
            Q, L, floor = orlicz_parts(v, P, eps, t)
            if floor <= 0.0:
                excluded += 1
                continue
            ratios[f"{name}@{eps:g}"] = L / Q
            best = max(best, L / Q)
        per_eps.append(best)
    C = float(max(per_eps))
    for eps, best in zip(eps_list, per_eps):
        for key, val in ratios.items():
            if key.endswith(f"@{eps:g}"):
                margins.append(1.0 - val / C)
    zero_q, zero_l, _ = orlicz_parts(RadialProfile(lambda r: 0.0 * r, lambda r: 0.0 * r), P, eps_list[0], 1.0)
    viol = int(np.sum(np.array(margins) < -SLACK)) + int(zero_l > 0.0)
    spread = (max(per_eps) - min(per_eps)) / min(per_eps)
    failures = []
    if not spread <= 0.1:
        failures.append(f"constant varies by {spread:.3g} over eps")
    details = {"eps_list": list(eps_list), "C_per_eps": per_eps, "spread": spread,
               "excluded": excluded, "U_ratio": ratios.get(f"U@{eps_list[0]:g}"), "seed": seed}
    return IneqReport(f"orlicz_poincare[{P.N},{P.p:g},{P.beta:g}]",
                      len(fam) * len(eps_list), viol, C, _quantiles(margins), P.as_dict(), details,
                      failures)


# ----------------------------------------------------------------------------
# the full suite
SUITE = (
    ("A1", check_vector_ineq_A1, {"p": 1.5, "kappa": 0.1}),
    ("A1", check_vector_ineq_A1, {"p": 2.0, "kappa": 0.1}),
    ("A1", check_vector_ineq_A1, {"p": 3.0, "kappa": 0.1}),
    ("A2", check_scalar_ineq_A2, {"params": (5, 2, 1), "kappa": 0.05}),
    ("A2", check_scalar_ineq_A2, {"params": (4, 1.2, 0.3), "kappa": 0.05}),
    ("B1", check_hardy_poincare, {"params": (5, 2, 1), "xi": 1.0}),
    ("B1", check_hardy_poincare, {"params": (5, 2, 1), "xi": 1.5}),
    ("B1", check_hardy_poincare, {"params": (5, 2, 1), "xi": 2.0}),
    ("B1", check_hardy_poincare, {"params": (5, 2, 1), "xi": 3.0}),
    ("B1", check_hardy_poincare, {"params": (4, 1.5, 0.5), "xi": 1.5}),
    ("B1", check_hardy_poincare, {"params": (4, 1.5, 0.5), "xi": 3.0}),
    ("B2", check_pointwise_B2, {"params": (4, 1.3, 0.5), "eps0": 0.1}),
    ("P", check_weighted_poincare, {"params": (5, 2, 1)}),
    ("O", check_orlicz_poincare, {"params": (4, 1.3, 0.5)}),
)
SAMPLED = {check_vector_ineq_A1, check_scalar_ineq_A2, check_pointwise_B2}
GROUPS = {"A": ("A1", "A2"), "B": ("B1", "B2"), "poincare": ("P",), "orlicz": ("O",),
          "all": ("A1", "A2", "B1", "B2", "P", "O")}


def _run_one(item, seed, n_samples):
    _, fn, kw = item
    kw = dict(kw)
    if "params" in kw:
        kw["params"] = make_params(*kw["params"])
    if fn in SAMPLED:
        return fn(n_samples=n_samples, seed=seed, **kw)
    return fn(seed=seed, **kw)


def run_suite(suite="all", seed=0, n_samples=100_000, jobs=1):
    """Run a named group of checks; reports come back in suite order."""
    if suite not in GROUPS:
        raise ValueError(f"unknown suite {suite!r}; choose from {sorted(GROUPS)}")
    items = [it for it in SUITE if it[0] in GROUPS[suite]]
    if jobs and jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(_run_one, items, [seed] * len(items), [n_samples] * len(items)))
    return [_run_one(it, seed, n_samples) for it in items]
