"""Linearised eigenproblem at the extremal, one spherical-harmonic mode at a time.

For mode k the quadratic form

    A(v) = (p-1) int |U'|^(p-2) v'^2 r^(N-1) + lambda_k int |U'|^(p-2) v^2 r^(N-3)

is compared with B(v) = int r^(N-1-beta) U^(pstar-2) v^2.  Both are
discretised with piecewise-linear elements on a geometric mesh; B is
lumped so that the generalised problem becomes a symmetric tridiagonal
standard problem after diagonal scaling.

The coefficient |U'|^(p-2) r^(N-1) grows like r^((N-1)/(p-1)) at infinity,
which makes a plain Dirichlet cut at r_max converge slowly when p is close
to N.  The default outer condition is therefore Robin: the solution is
matched to the decaying power r^(-s) of the far-field equation.  A Dirichlet
cut is still available for domain-monotonicity studies.
"""

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import sympy as sp
from scipy.linalg import solve_banded
from scipy.sparse import diags
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh

from .core import _extremal_parts
from .errors import EigenFailure, GridError

GAUSS_POINTS = 4


@dataclass(frozen=True)
class GridSpec:
    """Geometric mesh on [r_min, r_max] with n nodes."""

    r_min: float = 1e-6
    r_max: float = 1e8
    n: int = 2000
    outer_bc: str = "robin"
    placement: str = "geometric"

    def validate(self):
        if self.placement != "geometric":
            raise GridError(f"only geometric placement is supported, got {self.placement!r}")
        if int(self.n) != self.n or self.n < 100:
            raise GridError(f"need n >= 100 nodes, got {self.n}")
        if not (np.isfinite(self.r_min) and np.isfinite(self.r_max)):
            raise GridError("truncation radii must be finite")
        if not 0.0 < self.r_min < self.r_max:
            raise GridError(f"need 0 < r_min < r_max, got ({self.r_min}, {self.r_max})")
        if self.outer_bc not in ("robin", "dirichlet"):
            raise GridError(f"outer_bc must be 'robin' or 'dirichlet', got {self.outer_bc!r}")
        return self

    def nodes(self):
        return np.geomspace(self.r_min, self.r_max, int(self.n))

    def doubled(self):
        """Nested refinement: every element split in two (2n - 1 nodes)."""
        return GridSpec(self.r_min, self.r_max, 2 * int(self.n) - 1, self.outer_bc, self.placement)


def mode_lambda(params, k):
    """Eigenvalue k(N-2+k) of the Laplace-Beltrami operator on the sphere."""
    if int(k) != k or k < 0:
        raise GridError(f"mode index must be a non-negative integer, got {k}")
    return k * (params.N - 2 + k)


def far_field_exponent(params, k, R):
    """Decay rate s of the outer solution r^(-s) at radius R.

    Uses the local logarithmic slope of the coefficient |U'|^(p-2) r^(N-1),
    which tends to (N-1)/(p-1) as R grows.
    """
    _, dv, ddv, _ = _extremal_parts(params, 1.0)
    alpha = (params.p - 2.0) * R * ddv(R) / dv(R) + params.N - 1.0
    lam = mode_lambda(params, k)
    disc = (alpha - 1.0) ** 2 + 4.0 * lam / (params.p - 1.0)
    return 0.5 * ((alpha - 1.0) + np.sqrt(disc))


@dataclass(frozen=True)
class ModeMatrices:
    """Assembled pencil on the free nodes.

    ``diag``/``offdiag`` hold the tridiagonal stiffness A, ``mass`` the lumped
    diagonal of B, ``nodes`` the free radii and ``all_nodes`` the full mesh.
    """

    k: int
    lambda_k: float
    diag: np.ndarray
    offdiag: np.ndarray
    mass: np.ndarray
    nodes: np.ndarray
    all_nodes: np.ndarray
    free: np.ndarray

    @property
    def A(self):
        return diags([self.offdiag, self.diag, self.offdiag], [-1, 0, 1], format="csr")

    @property
    def B(self):
        return diags(self.mass, 0, format="csr")

    def apply_A(self, v):
        out = self.diag * v
        out[:-1] += self.offdiag * v[1:]
        out[1:] += self.offdiag * v[:-1]
        return out


def assemble_mode(params, k, grid_spec=None, window=None):
    """Assemble the P1 stiffness matrix and lumped weight matrix for mode k.

    ``window`` = (lo, hi) restricts the weight of B to lo <= r <= hi.
    """
    spec = (grid_spec or GridSpec()).validate()
    lam = mode_lambda(params, k)
    value, dvalue, _, _ = _extremal_parts(params, 1.0)
    P = params
    r = spec.nodes()
    a, b = r[:-1], r[1:]
    h = b - a

    x, w = np.polynomial.legendre.leggauss(GAUSS_POINTS)
    g = a[:, None] + 0.5 * h[:, None] * (x[None, :] + 1.0)
    wg = 0.5 * h[:, None] * w[None, :]
    coef = np.abs(dvalue(g)) ** (P.p - 2.0) * g ** (P.N - 1.0)
    weight = g ** (P.N - 1.0 - P.beta) * value(g) ** (P.pstar - 2.0)
    l0 = (b[:, None] - g) / h[:, None]
    l1 = (g - a[:, None]) / h[:, None]

    stiff = (P.p - 1.0) * (coef * wg).sum(axis=1) / h ** 2
    c2 = lam * coef / g ** 2 * wg
    m00 = (c2 * l0 * l0).sum(axis=1)
    m01 = (c2 * l0 * l1).sum(axis=1)
    m11 = (c2 * l1 * l1).sum(axis=1)

    n = len(r)
    d = np.zeros(n)
    e = -stiff + m01
    d[:-1] += stiff + m00
    d[1:] += stiff + m11
    if window is not None:
        lo_r, hi_r = window
        weight = weight * ((g >= lo_r) & (g <= hi_r))
    mass = np.zeros(n)
    mass[:-1] += (weight * l0 * wg).sum(axis=1)
    mass[1:] += (weight * l1 * wg).sum(axis=1)

    free = np.ones(n, dtype=bool)
    if spec.outer_bc == "robin":
        R = r[-1]
        aR = abs(dvalue(R)) ** (P.p - 2.0) * R ** (P.N - 1.0)
        d[-1] += (P.p - 1.0) * aR * far_field_exponent(P, k, R) / R
    else:
        free[-1] = False
    if k > 0:
        free[0] = False
    lo = int(np.argmax(free))
    hi = n - int(np.argmax(free[::-1]))
    return ModeMatrices(k, float(lam), d[lo:hi].copy(), e[lo:hi - 1].copy(), mass[lo:hi].copy(),
                        r[lo:hi].copy(), r, free)


def _inverse_iteration(d, e, count, tol=1e-13, maxit=5000):
    """Lowest ``count`` eigenpairs of a symmetric tridiagonal matrix.

    Shift-and-invert with explicit deflation against converged vectors.
    Each shift stays well below the wanted eigenvalue so the banded solve
    never becomes nearly singular in the deflated directions.
    """
    n = len(d)
    vals, vecs, its = [], [], []
    sigma = 0.0
    for i in range(count):
        ab = np.zeros((3, n))
        ab[0, 1:] = e
        ab[1] = d - sigma
        ab[2, :-1] = e
        x = 1.0 + np.linspace(0.0, 1.0, n) ** 2
        for v in vecs:
            x -= v * (v @ x)
        x /= np.linalg.norm(x)
        mu = None
        for it in range(1, maxit + 1):
            y = solve_banded((1, 1), ab, x)
            for v in vecs:
                y -= v * (v @ y)
            nrm = np.linalg.norm(y)
            if not np.isfinite(nrm) or nrm == 0.0:
                raise EigenFailure(f"inverse iteration broke down for eigenvalue {i + 1}")
            y /= nrm
            Cy = d * y
            Cy[:-1] += e * y[1:]
            Cy[1:] += e * y[:-1]
            new = float(y @ Cy)
            x = y
            if mu is not None and abs(new - mu) <= tol * abs(new):
                mu = new
                break
            mu = new
        else:
            raise EigenFailure(f"eigenvalue {i + 1} stagnated after {maxit} iterations (last {mu:.12g})")
        vals.append(mu)
        vecs.append(x)
        its.append(it)
        sigma = 0.9 * mu
    return np.array(vals), vecs, its


def _solve(params, k, count, spec):
    mats = assemble_mode(params, k, spec)
    sb = 1.0 / np.sqrt(mats.mass)
    vals, vecs, its = _inverse_iteration(mats.diag * sb * sb, mats.offdiag * sb[:-1] * sb[1:], count)
    out = []
    for x in vecs:
        v = np.zeros(len(mats.all_nodes))
        v[mats.free] = x * sb
        j = int(np.argmax(np.abs(v) > 1e-8 * np.abs(v).max()))
        if v[j] < 0:
            v = -v
        out.append(v)
    return vals, np.array(out), mats, its


@dataclass(frozen=True)
class SpectralResult:
    """Lowest eigenvalues of one mode.

    ``eigenvalues`` are Richardson-extrapolated from the base grid and one
    nested doubling; ``coarse`` and ``fine`` are the raw values and
    ``refinement`` their difference.  Eigenvectors live on the base grid,
    are B-normalised and sign-fixed to start positive.
    """

    k: int
    lambda_k: float
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    grid: dict
    refinement: np.ndarray
    coarse: np.ndarray
    fine: np.ndarray
    mass: np.ndarray = field(repr=False)
    iterations: tuple = ()

    def as_dict(self):
        return {
            "k": self.k, "lambda_k": self.lambda_k,
            "eigenvalues": list(map(float, self.eigenvalues)),
            "coarse": list(map(float, self.coarse)), "fine": list(map(float, self.fine)),
            "refinement": list(map(float, self.refinement)), "grid": dict(self.grid),
        }


def eigen_mode(params, k, count=3, grid_spec=None, refine=True):
    """Smallest ``count`` eigenvalues of mode k with a one-step refinement study."""
    if not 1 <= count <= 10:
        raise GridError(f"count must be in 1..10, got {count}")
    spec = (grid_spec or GridSpec()).validate()
    coarse, vecs, mats, its = _solve(params, k, count, spec)
    if refine:
        fine, _, _, its2 = _solve(params, k, count, spec.doubled())
        best = (4.0 * fine - coarse) / 3.0
        its = tuple(its) + tuple(its2)
    else:
        fine = coarse.copy()
        best = coarse.copy()
    grid = {"n": int(spec.n), "r_min": spec.r_min, "r_max": spec.r_max, "variable": "r",
            "outer_bc": spec.outer_bc, "refined_n": int(spec.doubled().n) if refine else None}
    mass = np.zeros(len(mats.all_nodes))
    mass[mats.free] = mats.mass
    return SpectralResult(int(k), float(mats.lambda_k), best, vecs, grid, fine - coarse, coarse,
                          fine, mass, tuple(its))


def restricted_poincare(params, lo, hi=np.inf, grid_spec=None):
    """sup over radial phi of int_{lo<|x|<hi} w phi^2 / int |grad U|^(p-2) |grad phi|^2.

    Here w = |x|^-beta U^(pstar-2).  This is the top eigenvalue of the
    pencil (B restricted, A / (p-1)), found with Lanczos on the symmetric
    operator M^1/2 A^-1 M^1/2.
    """
    spec = (grid_spec or GridSpec(n=4000)).validate()
    mats = assemble_mode(params, 0, spec, window=(lo, hi))
    sm = np.sqrt(mats.mass)
    if not sm.any():
        return 0.0
    n = len(sm)
    ab = np.zeros((3, n))
    ab[0, 1:] = mats.offdiag
    ab[1] = mats.diag
    ab[2, :-1] = mats.offdiag
    op = LinearOperator((n, n), matvec=lambda x: sm * solve_banded((1, 1), ab, sm * np.ravel(x)),
                        dtype=float)
    try:
        top = eigsh(op, k=1, which="LA", tol=1e-12, v0=sm.copy(), return_eigenvectors=False)
    except ArpackNoConvergence as exc:
        raise EigenFailure("Lanczos did not converge for the restricted Poincare constant") from exc
    return float((params.p - 1.0) * top[0])


# ----------------------------------------------------------------------------
# the transformed problem and its explicit eigenpairs


def _transformed_residual(p, K, which, K_eta):
    s = sp.Symbol("s", positive=True)
    p = sp.nsimplify(p)
    K = sp.nsimplify(K)
    Ke = sp.nsimplify(K_eta)
    t = s ** (p / (p - 1))
    if which == "eta0":
        eta = ((p - 1) - t) / (1 + t) ** (Ke / p)
        mu = 0
    elif which == "eta1":
        eta = s ** (1 / (p - 1)) / (1 + t) ** (Ke / p)
        mu = Ke - 1
    else:
        raise ValueError(f"which must be 'eta0' or 'eta1', got {which!r}")
    # equation multiplied through by s^2 so that every term stays bounded
    lhs = (s ** 2 * sp.diff(eta, s, 2)
           + s * sp.diff(eta, s) * ((K - 1) / (p - 1) + (p - 2) * K / ((p - 1) * (1 + t)))
           - mu / (p - 1) * eta
           + K * (K * p - K + p) / (p - 1) ** 2 * t / (1 + t) ** 2 * eta)
    return sp.lambdify(s, lhs, "numpy"), sp.lambdify(s, eta, "numpy")


def analytic_residual(params, which, K_shift=0.0, s_grid=None):
    """Residual of an explicit eigenpair in the variable s with r = s**q.

    The eigenfunction is differentiated symbolically, so the residual is at
    rounding level for the true pair.  ``K_shift`` perturbs the K used in
    the candidate eigenfunction and eigenvalue (a sensitivity probe).
    """
    res, eta = _transformed_residual(params.p, params.K, which, params.K + K_shift)
    s = np.logspace(-3, 3, 2001) if s_grid is None else np.asarray(s_grid, dtype=float)
    return float(np.max(np.abs(res(s))) / np.max(np.abs(eta(s))))


class PpkGap(NamedTuple):
    lhs: float
    rhs_min: float
    ok: bool

    @property
    def note(self):
        if not self.ok and abs(self.lhs - self.rhs_min) <= 1e-12 * self.rhs_min:
            return "classical translation mode"
        return "" if self.ok else "condition fails"


def ppk_gap(params):
    """Compare ((p-beta)/p)^2 (K-1) with the k = 1 value N-1.

    The k >= 1 partial waves can only carry the eigenvalue pstar-1 if the
    two coincide for some k; strict inequality rules that out.
    """
    P = params
    lhs = ((P.p - P.beta) / P.p) ** 2 * (P.K - 1.0)
    rhs = float(P.N - 1)
    return PpkGap(float(lhs), rhs, bool(0.0 < lhs < rhs and rhs - lhs > 1e-12 * rhs))


@dataclass(frozen=True)
class GapReport:
    tau: float
    mu3_effective: float
    attained_by: str
    candidates: dict
    refinement: dict


def spectral_gap_details(params, grid_spec=None):
    """tau and the mode that attains the effective third eigenvalue."""
    r0 = eigen_mode(params, 0, 3, grid_spec)
    r1 = eigen_mode(params, 1, 1, grid_spec)
    r2 = eigen_mode(params, 2, 1, grid_spec)
    cand = {"k=0 third": float(r0.eigenvalues[2]), "k=1 first": float(r1.eigenvalues[0]),
            "k=2 first": float(r2.eigenvalues[0])}
    refinement = {"k=0 third": float(r0.refinement[2]), "k=1 first": float(r1.refinement[0]),
                  "k=2 first": float(r2.refinement[0])}
    which = min(cand, key=cand.get)
    mu3 = cand[which]
    return GapReport(0.5 * (mu3 - (params.pstar - 1.0)), mu3, which, cand, refinement)


def spectral_gap_tau(params, grid_spec=None):
    """tau = (mu3_effective - (pstar - 1)) / 2."""
    return spectral_gap_details(params, grid_spec).tau
