"""Command line front end.

    hslab <subcommand> [--config FILE] [--N 5 --p 2 --beta 1] [options]

Every run writes <outdir>/<subcommand>/<runid>.csv and .json and records the
resolved configuration, seed and a timestamp in <outdir>/<subcommand>/meta.json.
Data files carry no timestamps, so equal configurations give equal bytes.
Exit codes: 0 success, 1 check failure, 2 usage error.
"""

import argparse
import csv
import hashlib
import io
import json
import os
import platform
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .core import extremal, make_params
from .errors import DomainError, GridError, HslabError, RegimeError
from .experiments import bump_field, diagonal_field, sharpness_bump, sharpness_diag, stability_sample
from .functionals import deficit, extremal_energy, sharp_constant
from .manifold import distance
from .spectral import GridSpec, eigen_mode, ppk_gap, spectral_gap_details
from .verify import GROUPS, jsonable, run_suite

SUBCOMMANDS = ("spectrum", "deficit", "distance", "sharpness", "stability", "verify", "constants")
NOT_CONFIG = {"outdir", "runid", "jobs", "config", "command", "handler"}
DIAG_TARGET = (2.0, 0.1)
BUMP_TOL = 0.05


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # no prefix matching: "--c" must never be read as "--config"
    def __init__(self, *args, **kwargs):
        kwargs.setdefault("allow_abbrev", False)
        super().__init__(*args, **kwargs)

    def error(self, message):
        raise UsageError(message)


def _floats(text):
    try:
        return tuple(float(x) for x in str(text).replace(",", " ").split())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a list of numbers, got {text!r}")


def _ints(text):
    try:
        return tuple(int(x) for x in str(text).replace(",", " ").split())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a list of integers, got {text!r}")


def _default_seed():
    env = os.environ.get("HSLAB_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"HSLAB_SEED must be an integer, got {env!r}")


def build_parser():
    parser = _Parser(prog="hslab", description="Numerics for the weighted Hardy-Sobolev inequality.")
    parser.add_argument("--version", action="version", version=f"hslab {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def common(p, params=True):
        p.add_argument("--config", help="key = value file merged under the flags")
        p.add_argument("--outdir", default="hslab_out")
        p.add_argument("--runid", help="output file stem (default: hash of the resolved config)")
        p.add_argument("--seed", type=int, default=None, help="default: $HSLAB_SEED or 0")
        p.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
        if params:
            p.add_argument("--N", type=int, default=5)
            p.add_argument("--p", type=float, default=2.0)
            p.add_argument("--beta", type=float, default=1.0)

    def field_opts(p):
        p.add_argument("--field", choices=("extremal", "bump", "diagonal"), default="extremal")
        p.add_argument("--lambda", dest="lam", type=float, default=1.0)
        p.add_argument("--c", type=float, default=1.0, help="multiple of U_lambda")
        p.add_argument("--eps", type=float, default=0.05, help="bump amplitude")
        p.add_argument("--x0", type=float, default=40.0, help="bump centre distance")
        p.add_argument("--n", type=int, default=16, help="diagonal family index")

    p = sub.add_parser("spectrum", help="mode-k eigenvalues of the linearised problem")
    common(p)
    p.add_argument("--k", type=int, default=0)
    p.add_argument("--count", type=int, default=3)
    p.add_argument("--nodes", type=int, default=2000)
    p.add_argument("--r-min", type=float, default=1e-6)
    p.add_argument("--r-max", type=float, default=1e8)
    p.add_argument("--outer-bc", choices=("robin", "dirichlet"), default="robin")
    p.add_argument("--no-refine", action="store_true")

    p = sub.add_parser("deficit", help="deficit of a test field")
    common(p)
    field_opts(p)

    p = sub.add_parser("distance", help="distance of a test field to the extremal manifold")
    common(p)
    field_opts(p)

    p = sub.add_parser("sharpness", help="deficit and distance scaling along a family")
    common(p)
    p.add_argument("--family", choices=("diag", "bump"), default="bump")
    p.add_argument("--n-list", type=_ints, default=(8, 16, 32, 64))
    p.add_argument("--eps-list", type=_floats, default=(0.1, 0.05, 0.025, 0.0125))
    p.add_argument("--x0", type=float, default=40.0)

    p = sub.add_parser("stability", help="seeded sampling of deficit / d^gamma")
    common(p)
    p.add_argument("--samples", type=int, default=200)

    p = sub.add_parser("verify", help="inequality checks")
    common(p, params=False)
    p.add_argument("--suite", choices=sorted(GROUPS), default="all")
    p.add_argument("--samples", type=int, default=100_000)

    p = sub.add_parser("constants", help="derived constants of a parameter triple")
    common(p)
    return parser


def read_config(path):
    """Parse a key = value file; '#' starts a comment."""
    out = []
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"--config: cannot read {path}: {exc.strerror}")
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"--config {path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        out.append((key, value))
    return out


def _config_argv(pairs, sub_parser):
    known = {a.dest: a for a in sub_parser._actions}
    argv = []
    for key, value in pairs:
        dest = key.replace("-", "_")
        dest = "lam" if dest == "lambda" else dest
        act = known.get(dest)
        if act is None or dest in NOT_CONFIG - {"outdir", "jobs"}:
            raise UsageError(f"--config: unknown key {key!r}")
        flag = max(act.option_strings, key=len)
        if act.nargs == 0:
            if value.lower() in ("1", "true", "yes", "on"):
                argv.append(flag)
            elif value.lower() not in ("0", "false", "no", "off"):
                raise UsageError(f"--config: {key} expects a boolean, got {value!r}")
        else:
            argv += [flag, value]
    return argv


def parse(argv):
    parser = build_parser()
    argv = list(argv)
    if not argv or argv[0] not in SUBCOMMANDS:
        if argv and argv[0] in ("-h", "--help", "--version"):
            parser.parse_args(argv)
        raise UsageError(f"expected a subcommand from {', '.join(SUBCOMMANDS)}")
    pre = _Parser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv[1:])
    if known.config:
        sub_parser = parser._subparsers._group_actions[0].choices[argv[0]]
        argv = [argv[0]] + _config_argv(read_config(known.config), sub_parser) + argv[1:]
    args = parser.parse_args(argv)
    if args.seed is None:
        args.seed = _default_seed()
    if args.jobs < 1:
        raise UsageError(f"--jobs must be positive, got {args.jobs}")
    return args


def resolved_config(args):
    return {k: v for k, v in sorted(vars(args).items()) if k not in NOT_CONFIG}


def run_id(args):
    if args.runid:
        return args.runid
    blob = json.dumps(jsonable(resolved_config(args)), sort_keys=True).encode()
    return f"{args.command}-{hashlib.sha256(blob).hexdigest()[:12]}"


def _csv(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([jsonable(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def _kv_csv(d):
    flat = []

    def walk(prefix, x):
        if isinstance(x, dict):
            for k in sorted(x):
                walk(f"{prefix}.{k}" if prefix else str(k), x[k])
        elif isinstance(x, (list, tuple)):
            for i, v in enumerate(x):
                walk(f"{prefix}[{i}]", v)
        else:
            flat.append((prefix, x))

    walk("", d)
    return _csv(["key", "value"], flat)


def _dump(obj):
    return json.dumps(jsonable(obj), indent=2, sort_keys=True) + "\n"


def _params(args):
    return make_params(args.N, args.p, args.beta)


def _field(args, P):
    if args.field == "extremal":
        return args.c * extremal(P, args.lam)
    if args.field == "bump":
        return bump_field(P, args.x0, args.eps)
    return diagonal_field(P, args.n)


# ----------------------------------------------------------------------------
# subcommands: each returns (csv text, json-able body, ok)
def cmd_spectrum(args):
    P = _params(args)
    spec = GridSpec(args.r_min, args.r_max, args.nodes, args.outer_bc)
    res = eigen_mode(P, args.k, args.count, spec, refine=not args.no_refine)
    expected = [P.p - 1.0, P.pstar - 1.0] if args.k == 0 else []
    rows = []
    for i, mu in enumerate(res.eigenvalues):
        ref = expected[i] if i < len(expected) else float("nan")
        rows.append([i + 1, mu, res.coarse[i], res.fine[i], res.refinement[i], ref])
    body = {"params": P.as_dict(), **res.as_dict(), "expected": expected}
    return _csv(["index", "eigenvalue", "coarse", "fine", "refinement", "expected"], rows), body, True


def cmd_deficit(args):
    P = _params(args)
    rep = deficit(_field(args, P), P)
    body = {"params": P.as_dict(), "field": args.field, **rep.as_dict()}
    return _kv_csv(rep.as_dict()), body, True


def cmd_distance(args):
    P = _params(args)
    res = distance(_field(args, P), P)
    d = res.as_dict()
    d.pop("trace")
    body = {"params": P.as_dict(), "field": args.field, **d}
    return _kv_csv(d), body, bool(res.converged)


def cmd_sharpness(args):
    P = _params(args)
    if args.family == "diag":
        tab = sharpness_diag(P, args.n_list)
        targets = {"deficit": DIAG_TARGET, "distance": (1.0, 0.1)}
    else:
        tab = sharpness_bump(P, args.x0, args.eps_list)
        targets = {"deficit": (P.p, BUMP_TOL), "distance": (1.0, BUMP_TOL)}
    ok = all(tab.fits[k].accepted and abs(tab.fits[k].slope - t) <= tol for k, (t, tol) in targets.items())
    body = json.loads(tab.to_json())
    body["targets"] = {k: list(v) for k, v in targets.items()}
    body["ok"] = ok
    return tab.to_csv(), body, ok


def cmd_stability(args):
    P = _params(args)
    res = stability_sample(P, args.samples, args.seed)
    keys = ["index", "c", "lambda", "delta", "rel_distance", "deficit", "d", "quotient"]
    rows = [[s[k] for k in keys] for s in res.samples]
    body = {"params": P.as_dict(), "seed": args.seed, **res.as_dict()}
    return _csv(keys, rows), body, res.empirical_B > 0.0


def cmd_verify(args):
    reps = run_suite(args.suite, args.seed, args.samples, args.jobs)
    rows = [[r.name, r.passed, r.samples_tested, r.violations, r.estimated_constant] for r in reps]
    body = {"suite": args.suite, "seed": args.seed, "samples": args.samples,
            "reports": [r.as_dict() for r in reps]}
    return (_csv(["name", "passed", "samples_tested", "violations", "estimated_constant"], rows),
            body, all(r.passed for r in reps))


def cmd_constants(args):
    P = _params(args)
    gap = ppk_gap(P)
    tau = spectral_gap_details(P)
    body = {**P.as_dict(), "S": sharp_constant(P), "G": extremal_energy(P), "gamma": P.gamma,
            "low_branch": P.low_branch, "classical": P.classical,
            "ppk_lhs": gap.lhs, "ppk_rhs_min": gap.rhs_min, "ppk_ok": gap.ok,
            "tau": tau.tau, "mu3_effective": tau.mu3_effective, "mu3_attained_by": tau.attained_by}
    return _kv_csv(body), body, True


HANDLERS = {"spectrum": cmd_spectrum, "deficit": cmd_deficit, "distance": cmd_distance,
            "sharpness": cmd_sharpness, "stability": cmd_stability, "verify": cmd_verify,
            "constants": cmd_constants}


def write_outputs(args, csv_text, body, started, ok):
    rid = run_id(args)
    out = Path(args.outdir) / args.command
    out.mkdir(parents=True, exist_ok=True)
    (out / f"{rid}.csv").write_text(csv_text)
    (out / f"{rid}.json").write_text(_dump({"config": resolved_config(args), "result": body}))
    meta_path = out / "meta.json"
    meta = json.loads(meta_path.read_text()) if meta_path.exists() else {}
    meta[rid] = {
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "runtime_s": round(time.perf_counter() - started, 3),
        "config": jsonable(resolved_config(args)), "seed": args.seed, "jobs": args.jobs,
        "ok": ok, "hslab": __version__, "python": platform.python_version(),
        "numpy": np.__version__,
    }
    meta_path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return out / f"{rid}.json"


def run(argv=None):
    """Execute one subcommand and return the exit code."""
    argv = sys.argv[1:] if argv is None else argv
    try:
        args = parse(argv)
    except UsageError as exc:
        print(f"hslab: usage error: {exc}", file=sys.stderr)
        return 2
    except SystemExit as exc:          # --help / --version
        return int(exc.code or 0)
    started = time.perf_counter()
    try:
        csv_text, body, ok = HANDLERS[args.command](args)
    except (DomainError, RegimeError, GridError) as exc:
        print(f"hslab {args.command}: usage error: {exc}", file=sys.stderr)
        return 2
    except HslabError as exc:
        print(f"hslab {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    path = write_outputs(args, csv_text, body, started, ok)
    print(f"{args.command}: {'ok' if ok else 'FAILED'} -> {path}")
    return 0 if ok else 1


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
