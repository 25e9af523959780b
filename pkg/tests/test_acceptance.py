"""Acceptance criteria, one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the lines as they
come; they are also repeated in the terminal summary.
"""

import itertools
import math
import time

import numpy as np
import pytest
from scipy.stats import linregress

from hslab import cli
from hslab.core import extremal, make_params
from hslab.experiments import sharpness_bump, sharpness_diag, stability_sample
from hslab.functionals import deficit, extremal_energy, grad_pnorm, weighted_starnorm
from hslab.spectral import analytic_residual, eigen_mode, ppk_gap, restricted_poincare
from hslab.verify import SAMPLED, SUITE, TAIL_TARGET, hardy_constant, run_suite

# N in {3, 4, 5} x p in {1.5, 2, 2.5} x beta in {0.3 p, 0.7 p}: all 18 combinations have p < N
GRID = [(N, p, round(f * p, 12)) for N, p, f in itertools.product((3, 4, 5), (1.5, 2.0, 2.5), (0.3, 0.7))]
SEEDS = (1, 2, 3)


def test_criterion_1_euler_lagrange(criterion):
    t0 = time.perf_counter()
    worst, where = 0.0, None
    for tr in GRID:
        P = make_params(*tr)
        U = extremal(P)
        g, s = grad_pnorm(U, P), weighted_starnorm(U, P)
        rel = abs(g - s) / s
        if rel >= worst:
            worst, where = rel, tr
    dt = time.perf_counter() - t0
    ok = worst <= 1e-8 and dt < 10.0
    criterion(1, ok, f"{len(GRID)} triples, max rel gap {worst:.2e} at {where} (tol 1e-8), {dt:.2f}s (< 10s)")
    assert ok


def test_criterion_2_zero_deficit(criterion):
    rng = np.random.default_rng(2024)
    worst, count = -np.inf, 0
    for tr in GRID:
        P = make_params(*tr)
        G = extremal_energy(P)
        for _ in range(50):
            c = float(rng.uniform(0.2, 3.0) * rng.choice([-1.0, 1.0]))
            lam = float(np.exp(rng.uniform(-3.0, 3.0)))
            d = deficit(c * extremal(P, lam), P).deficit
            worst = max(worst, d / G)
            count += 1
    ok = worst <= 1e-8
    criterion(2, ok, f"{count} fields c U_lambda, max deficit / ||grad U||_p^p = {worst:.2e} (tol 1e-8)")
    assert ok


def test_criterion_3_spectral(criterion):
    t0 = time.perf_counter()
    worst1 = worst2 = worst_raw = worst_res = 0.0
    min_margin = np.inf
    gap_ok = True
    for tr in GRID:
        P = make_params(*tr)
        r0 = eigen_mode(P, 0, 2)
        e1 = abs(r0.eigenvalues[0] / (P.p - 1) - 1)
        e2 = abs(r0.eigenvalues[1] / (P.pstar - 1) - 1)
        worst1, worst2 = max(worst1, e1), max(worst2, e2)
        raw = max(abs(r0.fine[0] / (P.p - 1) - 1), abs(r0.fine[1] / (P.pstar - 1) - 1))
        worst_raw = max(worst_raw, raw)
        for which in ("eta0", "eta1"):
            worst_res = max(worst_res, analytic_residual(P, which))
        min_margin = min(min_margin, eigen_mode(P, 1, 1).eigenvalues[0] - (P.pstar - 1))
        gap_ok &= ppk_gap(P).ok
    dt = time.perf_counter() - t0
    ok = (worst1 <= 1e-3 and worst2 <= 1e-3 and worst_res <= 1e-10 and min_margin > 0 and gap_ok
          and dt < 120.0)
    criterion(3, ok, f"rel err mu1 {worst1:.1e}, mu2 {worst2:.1e} (tol 1e-3; doubled grid alone {worst_raw:.1e}); "
                     f"eta residual {worst_res:.1e} (tol 1e-10); min k=1 margin {min_margin:.4f}; "
                     f"ppk ok on all: {gap_ok}; {dt:.1f}s (< 120s)")
    assert ok


def test_criterion_4_sharpness(criterion):
    t0 = time.perf_counter()
    diag = sharpness_diag(make_params(4, 1.5, 0.5), (8, 16, 32, 64))
    t_diag = time.perf_counter() - t0
    P = make_params(5, 2.5, 1)
    t0 = time.perf_counter()
    bump = sharpness_bump(P, 40.0, (0.1, 0.05, 0.025, 0.0125))
    t_bump = time.perf_counter() - t0
    checks = [
        ("diag deficit", diag.fits["deficit"], 2.0, 0.1),
        ("diag distance", diag.fits["distance"], 1.0, 0.1),
        ("bump deficit", bump.fits["deficit"], P.p, 0.05),
        ("bump distance", bump.fits["distance"], 1.0, 0.05),
    ]
    parts, ok = [], t_diag < 300 and t_bump < 300
    for name, fit, target, tol in checks:
        good = abs(fit.slope - target) <= tol and fit.r2 >= 0.99
        ok &= good
        parts.append(f"{name} slope {fit.slope:.4f} (target {target:g} +- {tol:g}, R2 {fit.r2:.5f})")
    criterion(4, ok, "; ".join(parts) + f"; {t_diag:.1f}s and {t_bump:.1f}s (< 300s each)")
    assert ok


def test_criterion_5_stability(criterion):
    t0 = time.perf_counter()
    floors = {}
    every = True
    for tr in GRID:
        P = make_params(*tr)
        res = stability_sample(P, 200, seed=42)
        floors[tr] = res.empirical_B
        every &= len(res.samples) == 200
        # compare stored quotients: re-multiplying by d^gamma can round one ulp past the deficit
        every &= all(s["quotient"] >= res.empirical_B > 0 for s in res.samples)
        every &= all(abs(s["quotient"] * s["d"] ** res.gamma - s["deficit"]) <= 1e-14 * abs(s["deficit"])
                     for s in res.samples)
    again = stability_sample(make_params(*GRID[-3]), 200, seed=42)
    exact = again.empirical_B == floors[GRID[-3]]
    dt = time.perf_counter() - t0
    lo = min(floors, key=floors.get)
    ok = all(b > 0 for b in floors.values()) and every and exact
    criterion(5, ok, f"{len(GRID)} triples x 200 samples, min empirical_B {floors[lo]:.4g} at {lo}; "
                     f"all samples above the floor: {every}; bit-exact rerun at {GRID[-3]}: {exact}; {dt:.0f}s")
    for tr, b in floors.items():
        print(f"    INFO empirical_B{tr} = {b:.17g}")
    assert ok


def test_criterion_6_inequality_suite(criterion):
    t0 = time.perf_counter()
    runs = {s: run_suite("all", seed=s, n_samples=100_000, jobs=1) for s in SEEDS}
    dt = time.perf_counter() - t0
    problems = []
    for s, reps in runs.items():
        for rep in reps:
            if not rep.passed:
                problems.append(f"seed {s} {rep.name}: {rep.violations} violations {rep.failures}")
    # Hardy-Poincare family ratio against the explicit constant
    hardy_ok = True
    for reps in runs.values():
        for (group, _, kw), rep in zip(SUITE, reps):
            if group == "B1":
                Cbar = hardy_constant(make_params(*kw["params"]), kw["xi"])
                hardy_ok &= rep.estimated_constant >= Cbar * (1 - 1e-6)
    tails = [rep.details["tail_exponent"] for reps in runs.values() for rep in reps
             if rep.name.startswith("weighted_poincare")]
    lo, hi = TAIL_TARGET[0] - TAIL_TARGET[1], TAIL_TARGET[0] + TAIL_TARGET[1]
    tail_ok = all(lo <= t <= hi for t in tails)
    # seed stability of the sampled constants
    spread = 0.0
    for i, (group, fn, kw) in enumerate(SUITE):
        if fn in SAMPLED:
            vals = [runs[s][i].estimated_constant for s in SEEDS]
            spread = max(spread, (max(vals) - min(vals)) / min(vals))
    ok = not problems and hardy_ok and tail_ok and spread <= 0.05 and dt < 300
    n_checks = sum(len(r) for r in runs.values())
    criterion(6, ok, f"{n_checks} reports over seeds {SEEDS} at 1e5 samples, "
                     f"{len(problems)} with violations; Hardy ratios >= Cbar (1 - 1e-6): {hardy_ok}; "
                     f"tail exponent {min(tails):.3f}..{max(tails):.3f} (target -2 +- 0.3); "
                     f"sampled-constant seed spread {spread:.2e} (<= 5%); {dt:.1f}s (< 300s)")
    for p in problems:
        print("    " + p)
    # the tail law at other triples is reported, not asserted
    rho = np.array([0.2, 0.1, 0.05, 0.025])
    for tr in [(4, 1.5, 0.5), (4, 1.3, 0.5), (3, 1.5, 0.45), (5, 2.5, 1.0)]:
        P = make_params(*tr)
        K = [restricted_poincare(P, 1 / x) for x in rho]
        slope = linregress(np.log(np.abs(np.log(rho))), np.log(K)).slope
        print(f"    INFO tail exponent at {tr}: {slope:.3f}")
    assert ok


def test_criterion_7_determinism(criterion, tmp_path):
    def data_files(root, cmd):
        return {f.name: f.read_bytes() for f in sorted((root / cmd).iterdir()) if f.name != "meta.json"}

    runs = {}
    for tag in ("a", "b"):
        out = tmp_path / tag
        codes = (cli.run(["verify", "--suite", "all", "--seed", "42", "--samples", "100000",
                          "--outdir", str(out), "--jobs", "1"]),
                 cli.run(["stability", "--samples", "20", "--seed", "42", "--outdir", str(out)]))
        runs[tag] = (codes, data_files(out, "verify"), data_files(out, "stability"))
    (ca, va, sa), (cb, vb, sb) = runs["a"], runs["b"]
    ok = ca == cb == (0, 0) and va == vb and sa == sb and len(va) == 2 and len(sa) == 2
    criterion(7, ok, f"exit codes {ca} / {cb}; verify files identical: {va == vb}; "
                     f"stability files identical: {sa == sb}")
    assert ok
