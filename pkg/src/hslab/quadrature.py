"""Composite Gauss-Legendre quadrature for radial and axisymmetric integrals on R^N.

The radial half-line is split at r = 1.  On [0, 1] the panels are
geometrically graded toward the origin (ratio 1/2), which resolves the
algebraic endpoint behaviour r**a of every profile in this package.  The
tail [1, inf) is mapped to (0, 1] by r = 1/t and graded the same way toward
t = 0.  Accuracy is controlled by splitting every panel in two until the
result stops moving.
"""

from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Callable, Optional, Tuple

import numpy as np

from .core import RadialProfile, sphere_area
from .errors import ConvergenceError, SingularityError

DEFAULT_NODES = 16
DEFAULT_LEVELS = 60
MAX_LEVELS = 960
MAX_ROUNDS = 6
NOISE_FLOOR = 1e-7
ROUNDING = 1e-14      # summation noise relative to sum |terms|


@lru_cache(maxsize=None)
def gauss_legendre(n):
    x, w = np.polynomial.legendre.leggauss(n)
    return x, w


def _graded_edges(levels, breaks):
    """Panel edges on [0, 1]: 0, 2**-levels, ..., 1/2, 1, plus breaks in (0, 1)."""
    edges = [0.0] + [2.0 ** (-j) for j in range(levels, -1, -1)]
    extra = [b for b in breaks if 0.0 < b < 1.0]
    return np.unique(np.array(edges + extra, dtype=float))


def _split(edges):
    mid = 0.5 * (edges[:-1] + edges[1:])
    return np.sort(np.concatenate([edges, mid]))


def _panel_nodes(edges, n):
    x, w = gauss_legendre(n)
    a = edges[:-1, None]
    b = edges[1:, None]
    half = 0.5 * (b - a)
    return (a + half * (x[None, :] + 1.0)).ravel(), (half * w[None, :]).ravel()


@dataclass(frozen=True)
class QuadratureRule:
    """Panels for int_0^inf g(r) dr.

    ``inner_edges`` are panel edges in r on [0, split]; ``outer_edges`` are
    panel edges in t on [0, 1/split] with r = 1/t.
    """

    inner_edges: np.ndarray
    outer_edges: np.ndarray
    n: int = DEFAULT_NODES
    tail_map: str = "r = 1/t on [1, inf)"
    target_rel_tol: float = 1e-10

    @property
    def panels(self):
        x, w = gauss_legendre(self.n)
        out = [((a, b), x, w) for a, b in zip(self.inner_edges[:-1], self.inner_edges[1:])]
        out += [((1.0 / b, (1.0 / a) if a > 0 else np.inf), x, w)
                for a, b in zip(self.outer_edges[:-1], self.outer_edges[1:])]
        return out

    @property
    def n_inner(self):
        return len(self.inner_edges) - 1

    @property
    def n_outer(self):
        return len(self.outer_edges) - 1

    def nodes_weights(self):
        """Nodes in r (ascending) and weights for int_0^inf dr."""
        ri, wi = _panel_nodes(self.inner_edges, self.n)
        t, wt = _panel_nodes(self.outer_edges, self.n)
        ro = 1.0 / t
        wo = wt / t ** 2
        return np.concatenate([ri, ro[::-1]]), np.concatenate([wi, wo[::-1]])

    def refined(self):
        return replace(self, inner_edges=_split(self.inner_edges),
                       outer_edges=_split(self.outer_edges))

    def extended(self, factor=2):
        """Grade deeper toward 0 and infinity."""
        li = _levels(self.inner_edges) * factor
        lo = _levels(self.outer_edges) * factor
        extra_i = self.inner_edges[self.inner_edges > 2.0 ** -_levels(self.inner_edges)]
        extra_o = self.outer_edges[self.outer_edges > 2.0 ** -_levels(self.outer_edges)]
        return replace(self, inner_edges=_graded_edges(li, tuple(extra_i)),
                       outer_edges=_graded_edges(lo, tuple(extra_o)))


def _levels(edges):
    return int(round(-np.log2(edges[1])))


def radial_rule(breaks=(), levels=DEFAULT_LEVELS, n=DEFAULT_NODES, tol=1e-10):
    """Build the base rule; ``breaks`` are radii inserted as panel edges."""
    breaks = tuple(float(b) for b in breaks if b is not None and np.isfinite(b) and b > 0)
    inner = _graded_edges(levels, [b for b in breaks if b < 1.0])
    outer = _graded_edges(levels, [1.0 / b for b in breaks if b > 1.0])
    return QuadratureRule(inner, outer, n, target_rel_tol=tol)


def _endpoint_share(vals, n, rule):
    """Absolute contributions of the three deepest panels at each end."""
    per_panel = np.abs(vals).reshape(-1, n).sum(axis=1)
    ni = rule.n_inner
    inner = per_panel[:ni]
    outer = per_panel[ni:][::-1]
    return inner[:3].sum(), outer[:3].sum()


def _as_callable(f):
    if isinstance(f, RadialProfile):
        return f.value, f.breaks
    return f, ()


def integrate_halfline(g, rule, tol=1e-10, max_rounds=MAX_ROUNDS):
    """int_0^inf g(r) dr with panel doubling; returns (value, error, rule used)."""
    prev = None
    for _ in range(MAX_LEVELS):
        r, w = rule.nodes_weights()
        with np.errstate(over="ignore", invalid="ignore"):
            vals = g(r) * w
        if not np.all(np.isfinite(vals)):
            bad = r[~np.isfinite(vals)]
            raise SingularityError(f"integrand not finite at r = {bad[:3]}")
        total = vals.sum()
        scale = np.abs(vals).sum()
        head, tail = _endpoint_share(vals, rule.n, rule)
        if max(head, tail) <= 1e-3 * tol * max(scale, 1e-300):
            break
        if _levels(rule.inner_edges) * 2 > MAX_LEVELS:
            raise ConvergenceError("endpoint contributions do not decay; integral may diverge")
        rule = rule.extended()
    value = total
    for _ in range(max_rounds):
        finer = rule.refined()
        r, w = finer.nodes_weights()
        with np.errstate(over="ignore", invalid="ignore"):
            vals = g(r) * w
        new = vals.sum()
        scale = np.abs(vals).sum()
        err = abs(new - value)
        if err <= tol * max(abs(new), 1e-300) or err <= ROUNDING * scale:
            return new, err, rule
        if prev is not None and err >= 0.5 * prev and err <= NOISE_FLOOR * abs(new):
            # changes stopped shrinking: rounding in the integrand dominates
            return new, max(err, prev), rule
        value, rule = new, finer
        prev = err
    raise ConvergenceError(f"no convergence to rel tol {tol}: last change {prev:.3e}")


def check_exponents(params, weight_exponent, origin_exponent=None, tail_exponent=None):
    """Raise SingularityError when declared power behaviour makes the integral diverge.

    ``origin_exponent`` e means f ~ r**e at 0; ``tail_exponent`` d means
    f ~ r**(-d) at infinity.
    """
    base = params.N - 1 - weight_exponent
    if origin_exponent is not None and origin_exponent + base <= -1.0:
        raise SingularityError(
            f"integrand ~ r^{origin_exponent + base:.4g} at the origin is not integrable")
    if tail_exponent is not None and tail_exponent - base <= 1.0:
        raise SingularityError(
            f"integrand ~ r^{base - tail_exponent:.4g} at infinity is not integrable")


def radial_integral(f, weight_exponent, params, tol=1e-10, *, breaks=(), origin_exponent=None,
                    tail_exponent=None, rule=None, return_error=False):
    """sphere_area * int_0^inf f(r) r^(N-1-weight_exponent) dr."""
    check_exponents(params, weight_exponent, origin_exponent, tail_exponent)
    func, own_breaks = _as_callable(f)
    expo = params.N - 1 - weight_exponent
    if rule is None:
        rule = radial_rule(tuple(breaks) + tuple(own_breaks), tol=tol)

    def g(r):
        return func(r) * r ** expo

    value, err, _ = integrate_halfline(g, rule, tol)
    value *= params.sphere_area
    err *= params.sphere_area
    return (value, err) if return_error else value


def fixed_radial(f, weight_exponent, params, rule):
    """Same integral on a fixed rule, no refinement (smooth in parameters)."""
    r, w = rule.nodes_weights()
    return params.sphere_area * np.dot(f(r) * r ** (params.N - 1 - weight_exponent), w)


# ----------------------------------------------------------------------------
# axisymmetric fields


@dataclass(frozen=True)
class AxisymField:
    """A function on R^N symmetric about one axis, in polar form (r, theta).

    ``grad`` returns the pair (d/dr f, (1/r) d/dtheta f); theta is the angle
    to ``axis_direction``.  Breaks are hints for the tensor rule.
    """

    value: Callable
    grad: Callable
    axis_direction: str = "e_N"
    breaks_r: Tuple[float, ...] = field(default=())
    breaks_theta: Tuple[float, ...] = field(default=())

    def grad_sq(self, r, theta):
        gr, gt = self.grad(r, theta)
        return gr * gr + gt * gt


def radial_as_axisym(u):
    """View a RadialProfile as an AxisymField."""
    return AxisymField(lambda r, t: u.value(r) + 0.0 * t,
                       lambda r, t: (u.dvalue(r) + 0.0 * t, 0.0 * t),
                       breaks_r=u.breaks)


@dataclass(frozen=True)
class AngularRule:
    edges: np.ndarray
    n: int = DEFAULT_NODES

    def nodes_weights(self):
        return _panel_nodes(self.edges, self.n)

    def refined(self):
        return replace(self, edges=_split(self.edges))


def angular_rule(breaks=(), panels=4, n=DEFAULT_NODES):
    edges = list(np.linspace(0.0, np.pi, panels + 1))
    edges += [b for b in breaks if 0.0 < b < np.pi]
    return AngularRule(np.unique(np.array(edges)), n)


@dataclass(frozen=True)
class TensorRule:
    """Product rule on (r, theta) including r^(N-1-w) sin^(N-2)(theta) measure."""

    radial: QuadratureRule
    angular: AngularRule

    def points(self, params, weight_exponent=0.0):
        r, wr = self.radial.nodes_weights()
        t, wt = self.angular.nodes_weights()
        wr = wr * r ** (params.N - 1 - weight_exponent)
        wt = wt * np.sin(t) ** (params.N - 2)
        scale = sphere_area(params.N - 1)
        return r[:, None], t[None, :], scale * wr[:, None] * wt[None, :]

    def refined(self):
        return TensorRule(self.radial.refined(), self.angular.refined())


def axisym_rule(fld, tol=1e-10, levels=DEFAULT_LEVELS, angular_panels=4):
    return TensorRule(radial_rule(fld.breaks_r, levels=levels, tol=tol),
                      angular_rule(fld.breaks_theta, panels=angular_panels))


def integrate_tensor(h, rule, params, weight_exponent, tol, max_rounds=MAX_ROUNDS):
    """Integrate h(r, theta) with doubling in both directions; returns (value, error, rule)."""
    r, t, w = rule.points(params, weight_exponent)
    with np.errstate(over="ignore", invalid="ignore"):
        vals = h(r, t) * w
    if not np.all(np.isfinite(vals)):
        raise SingularityError("axisymmetric integrand not finite on the rule")
    value = vals.sum()
    last = None
    for _ in range(max_rounds):
        finer = rule.refined()
        r, t, w = finer.points(params, weight_exponent)
        with np.errstate(over="ignore", invalid="ignore"):
            vals = h(r, t) * w
        new = vals.sum()
        err = abs(new - value)
        if err <= tol * max(abs(new), 1e-300) or err <= ROUNDING * np.abs(vals).sum():
            return new, err, rule
        value, rule, last = new, finer, err
    raise ConvergenceError(f"axisymmetric integral did not reach rel tol {tol}: last change {last:.3e}")


def axisym_integral(f, weight_exponent, params, tol=1e-10, *, rule=None, return_error=False,
                    origin_exponent=None, tail_exponent=None):
    """|S^(N-2)| * int_0^inf int_0^pi f(r, theta) r^(N-1-w) sin^(N-2)(theta) dtheta dr.

    ``f`` is an AxisymField (its value is integrated) or a callable (r, theta).
    """
    check_exponents(params, weight_exponent, origin_exponent, tail_exponent)
    if isinstance(f, AxisymField):
        h = f.value
        if rule is None:
            rule = axisym_rule(f, tol)
    else:
        h = f
        if rule is None:
            rule = TensorRule(radial_rule(tol=tol), angular_rule())
    value, err, _ = integrate_tensor(h, rule, params, weight_exponent, tol)
    return (value, err) if return_error else value


def fixed_tensor(h, params, weight_exponent, rule):
    r, t, w = rule.points(params, weight_exponent)
    return float(np.sum(h(r, t) * w))


# ----------------------------------------------------------------------------
# radial fields with a perturbation confined to a ball on the axis


@dataclass(frozen=True)
class PerturbedRadial:
    """u = base + (something supported in the ball |x - center e_N| < radius).

    ``value`` and ``grad`` describe the full field and are only evaluated
    inside the ball; outside it u coincides with the radial ``base``.  Any
    integral of F(u) is then the radial integral of F(base) plus a local
    increment, which keeps small perturbations accurate in relative terms.
    """

    base: RadialProfile
    center: float
    radius: float
    value: Callable
    grad: Callable
    axis_direction: str = "e_N"

    def grad_sq(self, r, theta):
        gr, gt = self.grad(r, theta)
        return gr * gr + gt * gt

    def as_axisym(self):
        """Global view (for cross-checks only; slower and less accurate)."""
        L, R = self.center, self.radius
        inner = (max(L - R, 0.0), L, L + R)

        def inside(r, t):
            return r * r + L * L - 2.0 * r * L * np.cos(t) < R * R

        def value(r, t):
            r, t = np.broadcast_arrays(r, t)
            out = self.base.value(r)
            m = inside(r, t)
            out = np.where(m, self.value(np.where(m, r, L), np.where(m, t, 0.0)), out)
            return out

        def grad(r, t):
            r, t = np.broadcast_arrays(r, t)
            m = inside(r, t)
            gr, gt = self.grad(np.where(m, r, L), np.where(m, t, 0.0))
            return np.where(m, gr, self.base.dvalue(r)), np.where(m, gt, 0.0)

        return AxisymField(value, grad, breaks_r=tuple(x for x in inner if x > 0) + self.base.breaks,
                           breaks_theta=(float(np.arcsin(min(R / L, 1.0))),) if L > R else ())


@dataclass(frozen=True)
class BallRule:
    """Product rule in polar coordinates (rho, psi) about a point on the axis.

    Points are returned as (r, theta) of the global axisymmetric frame with
    weights including |S^(N-2)| rho^(N-1) sin^(N-2)(psi) and |x|^(-w).
    """

    center: float
    radius: float
    rho_edges: np.ndarray
    psi_edges: np.ndarray
    n: int = DEFAULT_NODES

    def points(self, params, weight_exponent=0.0):
        rho, wr = _panel_nodes(self.rho_edges, self.n)
        psi, wp = _panel_nodes(self.psi_edges, self.n)
        rho = rho[:, None]
        psi = psi[None, :]
        xa = self.center + rho * np.cos(psi)
        xp = rho * np.sin(psi)
        r = np.hypot(xa, xp)
        theta = np.arctan2(xp, xa)
        w = (sphere_area(params.N - 1) * (wr * rho[:, 0] ** (params.N - 1))[:, None]
             * (wp * np.sin(psi[0]) ** (params.N - 2))[None, :])
        return r, theta, w * r ** (-weight_exponent)

    def refined(self):
        return replace(self, rho_edges=_split(self.rho_edges), psi_edges=_split(self.psi_edges))


def ball_rule(center, radius, rho_panels=4, psi_panels=4, n=DEFAULT_NODES):
    return BallRule(float(center), float(radius), np.linspace(0.0, radius, rho_panels + 1),
                    np.linspace(0.0, np.pi, psi_panels + 1), n)


def integrate_ball(h, rule, params, weight_exponent, tol, max_rounds=MAX_ROUNDS, scale=None):
    """Integrate h(r, theta) over the ball; returns (value, error, rule used).

    ``scale`` sets the absolute yardstick for convergence (default |value|).
    """
    r, t, w = rule.points(params, weight_exponent)
    value = float(np.sum(h(r, t) * w))
    last = None
    for _ in range(max_rounds):
        finer = rule.refined()
        r, t, w = finer.points(params, weight_exponent)
        vals = h(r, t) * w
        new = float(vals.sum())
        err = abs(new - value)
        yard = abs(new) if scale is None else max(abs(new), scale)
        if err <= tol * max(yard, 1e-300) or err <= ROUNDING * np.abs(vals).sum():
            return new, err, rule
        value, rule, last = new, finer, err
    raise ConvergenceError(f"ball integral did not reach rel tol {tol}: last change {last:.3e}")
