"""Distance to the extremal manifold {c U_lambda} and the orthogonal decomposition.

The objective F(c, lambda) = int |grad u - c grad U_lambda|^p is evaluated on
a quadrature rule frozen before the search, so it is a smooth function of
the parameters.  A coarse grid over (c, log lambda) seeds a Nelder-Mead
refinement (scipy) in the scaled variables (c / cbar, log lambda).
"""

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import minimize

from .core import RadialProfile, _extremal_parts, extremal, tangent_basis, with_kinks
from .errors import DegenerateDecomposition, NonConvergence
from .functionals import extremal_energy, grad_pnorm, weighted_starnorm
from .quadrature import (AxisymField, PerturbedRadial, axisym_integral, axisym_rule, ball_rule, integrate_ball,
                         integrate_halfline, integrate_tensor, radial_integral, radial_rule)

NORM_TOL = 1e-6


@dataclass(frozen=True)
class DistanceOptions:
    log_lambda_range: tuple = (-4.0, 4.0)
    n_lambda: int = 33
    n_c: int = 41
    xatol: float = 1e-8
    maxiter: int = 4000
    near_tol: float = 0.01
    widen: bool = True
    polish: bool = True
    quad_tol: float = 1e-10


@dataclass(frozen=True)
class DistanceResult:
    d: float
    c_star: float
    lambda_star: float
    trace: tuple
    converged: bool
    objective: float = 0.0
    grad_norm: float = 0.0
    near_minima: tuple = ()
    widened: bool = False
    nfev: int = 0

    def as_dict(self):
        return {"d": self.d, "c_star": self.c_star, "lambda_star": self.lambda_star,
                "objective": self.objective, "grad_norm": self.grad_norm,
                "converged": self.converged, "widened": self.widened, "nfev": self.nfev,
                "near_minima": [list(m) for m in self.near_minima],
                "trace": [list(t) for t in self.trace]}


class _Objective:
    """Frozen-rule evaluation of F(c, lambda) for each supported field type.

    Every branch reduces to: radial nodes r with weights W, radial and
    angular gradient components of u at the nodes, and the extremal's
    derivative U_lambda'(r) computed on the radial nodes only.
    """

    def __init__(self, u, params, tol):
        self.P = params
        self.p = params.p
        P = params
        self.coarse = None
        if isinstance(u, RadialProfile):
            u = with_kinks(u, "dvalue", P.p)
            f = lambda r: np.abs(u.dvalue(r)) ** P.p * r ** (P.N - 1)
            base = radial_rule(u.breaks, tol=tol)
            _, _, rule = integrate_halfline(f, base, tol)
            if rule.n_inner + rule.n_outer > base.n_inner + base.n_outer:
                r0, w0 = base.nodes_weights()
                self.coarse = (r0, P.sphere_area * w0 * r0 ** (P.N - 1), u.dvalue(r0))
            r, w = rule.nodes_weights()
            self.r = r
            self.W = P.sphere_area * w * r ** (P.N - 1)
            self.gr = u.dvalue(r)
            self.gt2 = None
            self.ball = None
        elif isinstance(u, AxisymField):
            h = lambda r, t: u.grad_sq(r, t) ** (0.5 * P.p)
            _, _, rule = integrate_tensor(h, axisym_rule(u, tol), P, 0.0, tol)
            r, t, W = rule.points(P, 0.0)
            self.r = r[:, 0]
            self.W = W
            gr, gt = u.grad(r, t)
            self.gr = np.broadcast_to(gr, W.shape)
            self.gt2 = np.broadcast_to(gt * gt, W.shape)
            self.ball = None
        elif isinstance(u, PerturbedRadial):
            b = u.base
            f = lambda r: np.abs(b.dvalue(r)) ** P.p * r ** (P.N - 1)
            _, _, rule = integrate_halfline(f, radial_rule(b.breaks, tol=tol), tol)
            r, w = rule.nodes_weights()
            self.r = r
            self.W = P.sphere_area * w * r ** (P.N - 1)
            self.gr = b.dvalue(r)
            self.gt2 = None
            inc = lambda rr, tt: u.grad_sq(rr, tt) ** (0.5 * P.p) - np.abs(b.dvalue(rr)) ** P.p
            _, _, brule = integrate_ball(inc, ball_rule(u.center, u.radius), P, 0.0, tol * 1e-3,
                                         scale=1.0)
            br, bt, bw = brule.points(P, 0.0)
            gr, gt = u.grad(br, bt)
            self.ball = (br, bw, gr, gt * gt, b.dvalue(br))
        else:
            raise TypeError(f"unsupported field type {type(u).__name__}")

    def dU(self, lam, r):
        _, dv, _, _ = _extremal_parts(self.P, lam)
        return dv(r)

    def __call__(self, c, lam, coarse=False):
        """F for an array of c values at one lambda.

        ``coarse`` uses the unrefined radial rule (radial fields only); it is
        accurate enough to locate the basin in the grid stage.
        """
        c = np.atleast_1d(np.asarray(c, dtype=float))
        p = self.p
        if self.gt2 is None and self.ball is None:
            r, W, gr = self.coarse if (coarse and self.coarse is not None) else (self.r, self.W, self.gr)
            du = self.dU(lam, r)
            return np.abs(gr[None, :] - c[:, None] * du[None, :]) ** p @ W
        du = self.dU(lam, self.r)
        out = np.empty(len(c))
        for i, ci in enumerate(c):
            if self.gt2 is None:
                val = np.dot(self.W, np.abs(self.gr - ci * du) ** p)
            else:
                diff = self.gr - ci * du[:, None]
                val = np.sum(self.W * (diff * diff + self.gt2) ** (0.5 * p))
            if self.ball is not None:
                br, bw, gr, gt2, bd = self.ball
                dub = self.dU(lam, br)
                full = ((gr - ci * dub) ** 2 + gt2) ** (0.5 * p)
                val += np.sum(bw * (full - np.abs(bd - ci * dub) ** p))
            out[i] = val
        return out


def _grid_stage(F, cbar, lo, hi, opts):
    logs = np.linspace(lo, hi, opts.n_lambda)
    cs = np.linspace(-2.0, 2.0, opts.n_c) * cbar
    table = np.array([F(cs, np.exp(l), coarse=True) for l in logs])
    best = table.min()
    # ties: smallest lambda, then smallest |c|
    cand = [(logs[i], abs(cs[j]), i, j) for i, j in zip(*np.nonzero(table <= best * (1 + 1e-12)))]
    _, _, i0, j0 = min(cand)
    near = []
    for i in range(len(logs)):
        for j in range(len(cs)):
            v = table[i, j]
            if v > best * (1.0 + opts.near_tol):
                continue
            nb = table[max(i - 1, 0):i + 2, max(j - 1, 0):j + 2]
            if v <= nb.min():
                near.append((float(cs[j]), float(np.exp(logs[i])), float(v)))
    return logs, cs, table, i0, j0, tuple(near)


def _refine(F, cbar, logs, cs, i0, j0, opts, trace):
    dl = logs[1] - logs[0]
    dc = (cs[1] - cs[0]) / cbar
    x0 = np.array([cs[j0] / cbar, logs[i0]])
    simplex = np.array([x0, x0 + [0.5 * dc, 0.0], x0 + [0.0, 0.5 * dl]])
    cache = {}

    def obj(x):
        key = (float(x[0]), float(x[1]))
        if key not in cache:
            cache[key] = float(F(x[0] * cbar, np.exp(x[1]))[0])
        return cache[key]

    def record(xk):
        trace.append((float(xk[0] * cbar), float(np.exp(xk[1])), obj(xk)))

    fatol = 1e-15 * max(obj(x0), F(0.0, 1.0)[0])
    res = minimize(obj, x0, method="Nelder-Mead", callback=record,
                   options={"xatol": opts.xatol, "fatol": fatol, "maxiter": opts.maxiter,
                            "maxfev": 4 * opts.maxiter, "initial_simplex": simplex})
    if res.success and opts.polish:
        # restart from a small simplex: guards against a collapsed simplex and
        # tightens the minimiser below the first-pass tolerance
        x1 = res.x
        step = 100.0 * opts.xatol
        simplex = np.array([x1, x1 + [step, 0.0], x1 + [0.0, step]])
        res2 = minimize(obj, x1, method="Nelder-Mead", callback=record,
                        options={"xatol": opts.xatol * 1e-3, "fatol": 0.0, "maxiter": 400, "maxfev": 4 * opts.maxiter,
                                 "initial_simplex": simplex})
        if res2.fun <= res.fun:
            res2.success = True
            res = res2
    return res, len(cache)


def distance(u, params, opts=None):
    """min over (c, lambda) of ||grad u - c grad U_lambda||_p."""
    opts = opts or DistanceOptions()
    P = params
    F = _Objective(u, P, opts.quad_tol)
    G = extremal_energy(P)
    Fu = float(F(0.0, 1.0)[0])
    cbar = (Fu / G) ** (1.0 / P.p) if Fu > 0 else 1.0

    lo, hi = opts.log_lambda_range
    widened = False
    while True:
        logs, cs, table, i0, j0, near = _grid_stage(F, cbar, lo, hi, opts)
        trace = [(float(cs[j0]), float(np.exp(logs[i0])), float(table[i0, j0]))]
        res, nfev = _refine(F, cbar, logs, cs, i0, j0, opts, trace)
        edge = min(res.x[1] - lo, hi - res.x[1]) < (logs[1] - logs[0])
        if edge and opts.widen and not widened:
            lo, hi = lo - 4.0, hi + 4.0
            widened = True
            continue
        break

    fbest = float(res.fun)
    c_star = float(res.x[0] * cbar)
    lam_star = float(np.exp(res.x[1]))
    if trace[0][2] < fbest:
        c_star, lam_star, fbest = trace[0]
    result = DistanceResult(float(max(fbest, 0.0) ** (1.0 / P.p)), c_star, lam_star, tuple(trace),
                            bool(res.success), fbest, float(Fu ** (1.0 / P.p)), near, widened,
                            int(nfev + table.size))
    if not res.success:
        raise NonConvergence(f"Nelder-Mead stopped: {res.message}", best=result)
    return result


# ----------------------------------------------------------------------------
# decomposition u = c U_lambda + d w


def _combine(u, params, c, lam, scale):
    """(u - c U_lambda) / scale as a field of the same kind."""
    Ul = extremal(params, lam)
    k = 1.0 / scale
    if isinstance(u, RadialProfile):
        return RadialProfile(lambda r: k * (u.value(r) - c * Ul.value(r)),
                             lambda r: k * (u.dvalue(r) - c * Ul.dvalue(r)),
                             u.support_hint, tuple(sorted(set(u.breaks) | set(Ul.breaks))))
    if isinstance(u, AxisymField):
        def grad(r, t):
            gr, gt = u.grad(r, t)
            return k * (gr - c * Ul.dvalue(r)), k * gt
        return replace(u, value=lambda r, t: k * (u.value(r, t) - c * Ul.value(r)), grad=grad,
                       breaks_r=tuple(sorted(set(u.breaks_r) | set(Ul.breaks))))
    if isinstance(u, PerturbedRadial):
        base = _combine(u.base, params, c, lam, scale)

        def grad(r, t):
            gr, gt = u.grad(r, t)
            return k * (gr - c * Ul.dvalue(r)), k * gt
        return replace(u, base=base, value=lambda r, t: k * (u.value(r, t) - c * Ul.value(r)),
                       grad=grad)
    raise TypeError(f"unsupported field type {type(u).__name__}")


def _weighted_pairing(w, profile_fn, params, tol):
    """int |x|^-beta g(|x|) w for a radial g; w of any supported kind."""
    P = params
    if isinstance(w, RadialProfile):
        return radial_integral(lambda r: profile_fn(r) * w.value(r), P.beta, P, tol,
                               breaks=w.breaks)
    if isinstance(w, AxisymField):
        return axisym_integral(lambda r, t: profile_fn(r) * w.value(r, t), P.beta, P, tol,
                               rule=axisym_rule(w, tol))
    base = radial_integral(lambda r: profile_fn(r) * w.base.value(r), P.beta, P, tol,
                           breaks=w.base.breaks)
    inc, _, _ = integrate_ball(lambda r, t: profile_fn(r) * (w.value(r, t) - w.base.value(r)),
                               ball_rule(w.center, w.radius), P, P.beta, tol * 1e-3,
                               scale=abs(base) + 1e-300)
    return base + inc


@dataclass(frozen=True)
class Decomposition:
    c_star: float
    lambda_star: float
    d: float
    w: object = field(repr=False)
    grad_norm_w: float = 1.0
    residual_U: float = 0.0
    residual_Z: float = 0.0
    rel_residual_U: float = 0.0
    rel_residual_Z: float = 0.0

    def __iter__(self):
        return iter((self.c_star, self.lambda_star, self.d, self.w))


def decompose(u, params, result=None, tol=1e-10):
    """u = c* U_lambda* + d w with ||grad w||_p = 1.

    The two residuals are the weighted pairings of w with U^(pstar-1) and
    U^(pstar-2) Z (first-order conditions of the minimisation; exact at
    p = 2).  Relative residuals divide by the Hoelder bound of each pairing.
    """
    P = params
    res = result or distance(u, P)
    gnorm = grad_pnorm(u, P, tol) ** (1.0 / P.p)
    if res.d <= 1e-10 * gnorm:
        raise DegenerateDecomposition(f"d = {res.d:.3e} is at the manifold (||grad u|| = {gnorm:.3e})")
    c, lam = res.c_star, res.lambda_star
    diff = _combine(u, P, c, lam, 1.0)
    d = grad_pnorm(diff, P, tol) ** (1.0 / P.p)
    w = _combine(u, P, c, lam, d)
    gw = grad_pnorm(w, P, tol) ** (1.0 / P.p)

    U, Z = tangent_basis(P, lam)
    r1 = _weighted_pairing(w, lambda r: U.value(r) ** (P.pstar - 1.0), P, tol)
    r2 = _weighted_pairing(w, lambda r: U.value(r) ** (P.pstar - 2.0) * Z.value(r), P, tol)
    nU = radial_integral(lambda r: U.value(r) ** P.pstar, P.beta, P, tol, breaks=U.breaks)
    # |Z|^pstar and |w|^pstar have kinks at sign changes; these are only
    # normalisers, so a looser tolerance is enough
    nZ = radial_integral(lambda r: np.abs(Z.value(r)) ** P.pstar, P.beta, P, NORM_TOL,
                         breaks=Z.breaks)
    nw = weighted_starnorm(w, P, NORM_TOL)
    q = 1.0 / P.pstar
    b1 = nU ** ((P.pstar - 1.0) * q) * nw ** q
    b2 = nU ** ((P.pstar - 2.0) * q) * nZ ** q * nw ** q
    return Decomposition(c, lam, float(d), w, float(gw), float(r1), float(r2), float(abs(r1) / b1),
                         float(abs(r2) / b2))


def rescaled(u, params, mu):
    """u_mu(x) = mu^((N-p)/p) u(mu x), the scaling that maps U_lambda to U_(lambda mu)."""
    a = (params.N - params.p) / params.p
    mu = float(mu)
    if isinstance(u, RadialProfile):
        return RadialProfile(lambda r: mu ** a * u.value(mu * r),
                             lambda r: mu ** (a + 1.0) * u.dvalue(mu * r), None,
                             tuple(b / mu for b in u.breaks))
    if isinstance(u, AxisymField):
        def grad(r, t):
            gr, gt = u.grad(mu * r, t)
            return mu ** (a + 1.0) * gr, mu ** (a + 1.0) * gt
        return replace(u, value=lambda r, t: mu ** a * u.value(mu * r, t), grad=grad,
                       breaks_r=tuple(b / mu for b in u.breaks_r))
    raise TypeError(f"unsupported field type {type(u).__name__}")
