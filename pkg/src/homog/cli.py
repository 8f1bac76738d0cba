"""Command-line entry point: ``homog {effective,metrics,counterexample,validate}``.

Exit codes: 0 success, 1 configuration or I/O error, 2 solver failure or
failed check, 3 counterexample parameters outside the sufficiency region.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import warnings

import numpy as np

from .cell import SolverConfig, effective_on_grid
from .counterexample import BumpProfile, verify_strict_inequality
from .errors import DeltaTooLarge, HomogError, InvalidWidth, SpecError, SufficiencyViolated
from .hamiltonian import load_spec
from .metrics import metrics_report, parse_region
from .validation import BUILTIN_P_RANGE, BUILTIN_REGION, builtin_spec, run_suites, SUITES

log = logging.getLogger("homog")

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_SUFFICIENCY = 0, 1, 2, 3
METHODS = ("minimax", "quadrature", "laxoleinik", "laxoleinik-godunov")


class ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # usage errors are configuration errors, not solver failures
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def parse_p_range(text: str):
    try:
        a, b, m = text.split(":")
        a, b, m = float(a), float(b), int(m)
    except ValueError:
        raise ConfigError(f"--p-range must look like a:b:n, got {text!r}") from None
    if m < 1 or (m > 1 and not b > a):
        raise ConfigError("--p-range needs b > a and n >= 1")
    return np.linspace(a, b, m)


def resolve_spec(args):
    name = args.spec
    if name in BUILTIN_P_RANGE:
        if name == "bump":
            return name, builtin_spec(name, args.delta, args.C, args.c)
        return name, builtin_spec(name)
    if not os.path.exists(name):
        raise ConfigError(f"no built-in spec or file named {name!r}")
    return "file", load_spec(name)


def default_p(args, key, n=1):
    if args.p_range:
        ax = parse_p_range(args.p_range)
    else:
        a, b, m = BUILTIN_P_RANGE.get(key, (-2.0, 2.0, 65 if n == 1 else 9))
        ax = np.linspace(a, b, m)
    # on T^2 the range is used on both axes
    return ax if n == 1 else (ax, ax)


def solver_config(args, n=1):
    # a dense 2D Hessian at N=64 is 4096^2, so 2D defaults to N=16
    N = args.N if args.N is not None else (64 if n == 1 else 16)
    return SolverConfig(N=N, stages=args.stages)


def write_out(outdir, name, text):
    os.makedirs(outdir, exist_ok=True)
    path = os.path.join(outdir, name)
    with open(path, "w") as fh:
        fh.write(text)
    return path


def dumps(obj):
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


# ---------------------------------------------------------------------------
# subcommands


def cmd_effective(args):
    key, spec = resolve_spec(args)
    ps = default_p(args, key, spec.n)
    methods = [m.strip() for m in args.method.split(",") if m.strip()]
    bad = [m for m in methods if m not in METHODS]
    if bad:
        raise ConfigError(f"unknown method(s): {', '.join(bad)}")
    cfg = solver_config(args, spec.n)
    results = {}
    for m in methods:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            results[m] = effective_on_grid(spec, ps, m, cfg, T=args.T, N_lo=args.N_lo)
    first = results[methods[0]]
    doc = {
        "spec": args.spec,
        "spec_digest": spec.digest(),
        "methods": methods,
        "results": {m: eh.to_json() for m, eh in results.items()},
        "convex_along_lines": {m: bool(eh.convex_ok) for m, eh in results.items()},
    }
    if len(methods) > 1:
        vals = np.stack([results[m].value for m in methods])
        doc["max_disagreement"] = float(np.max(vals.max(axis=0) - vals.min(axis=0)))
    if len(methods) == 1:
        csv_text = first.to_csv()
    else:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        header = ["p"]
        for m in methods:
            header += [f"value_{m}", f"lower_{m}", f"upper_{m}"]
        w.writerow(header)
        for i, p in enumerate(first.p):
            row = [repr(float(p))]
            for m in methods:
                eh = results[m]
                row += [repr(float(eh.value[i])), repr(float(eh.lower[i])), repr(float(eh.upper[i]))]
            w.writerow(row)
        csv_text = buf.getvalue()
    write_out(args.out, "effective.json", dumps(doc))
    write_out(args.out, "effective.csv", csv_text)
    print(f"wrote {len(ps)} samples x {len(methods)} method(s) to {args.out}")
    return EXIT_OK


def cmd_metrics(args):
    key, spec = resolve_spec(args)
    if args.region:
        try:
            region = parse_region(args.region)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    elif key in BUILTIN_REGION:
        region = BUILTIN_REGION[key]
    else:
        raise ConfigError("--region is required for spec files")
    ps = default_p(args, key, spec.n)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        rep = metrics_report(spec, region, ps, args.method.split(",")[0], solver_config(args, spec.n))
    write_out(args.out, "metrics.json", dumps(rep.to_json()))
    write_out(args.out, "metrics.csv", rep.to_csv())
    tol = rep.tolerances["identity"]
    ok = all(v <= tol for v in rep.identity_residuals.values()) and rep.gamma_inf <= rep.hofer_upper + tol
    print(f"gamma_inf={rep.gamma_inf:.6f} beta0={rep.beta0:.6f} hofer in [{rep.hofer_lower:.6f}, {rep.hofer_upper:.6f}]")
    for k, v in rep.identity_residuals.items():
        print(f"{k}={v:.3e} ({'ok' if v <= tol else 'FAIL'})")
    return EXIT_OK if ok else EXIT_SOLVER


def cmd_counterexample(args):
    profile = BumpProfile(args.delta, args.C, args.c, args.n)
    ps = default_p(args, None, args.n) if args.p_range else None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        cert = verify_strict_inequality(profile, ps, solver_config(args, args.n), truncated=args.truncated)
    write_out(args.out, "certificate.json", dumps(cert.to_json()))
    print(cert.summary())
    return EXIT_OK if cert.verdict else EXIT_SOLVER


def cmd_validate(args):
    only = [s.strip() for s in args.only.split(",")] if args.only else None
    if only:
        unknown = [s for s in only if s not in SUITES]
        if unknown:
            raise ConfigError(f"unknown suite(s): {', '.join(unknown)}; choose from {', '.join(SUITES)}")
    results = run_suites(only, seed=args.seed)
    doc = {"passed": all(r.passed for r in results), "suites": [r.to_json() for r in results]}
    write_out(args.out, "validation.json", dumps(doc))
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name}")
    return EXIT_OK if doc["passed"] else EXIT_SOLVER


# ---------------------------------------------------------------------------


def build_parser():
    ap = _Parser(prog="homog", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, spec=True):
        if spec:
            sp.add_argument("--spec", default="pendulum", help="integrable, pendulum, bump, or a JSON spec file")
            sp.add_argument("--p-range", help="fiber samples as a:b:n")
            sp.add_argument("--method", default="minimax", help=f"comma list from {', '.join(METHODS)}")
        sp.add_argument("--delta", type=float, default=0.25, help="bump plateau half-width parameter")
        sp.add_argument("--C", type=float, default=10.0, help="bump plateau height")
        sp.add_argument("--c", type=float, default=0.05, help="bump floor value")
        sp.add_argument("--N", type=int, help="corrector grid points per axis (default 64 in 1D, 16 in 2D)")
        sp.add_argument("--stages", type=int, default=6, help="annealing stages")
        sp.add_argument("--T", type=float, default=200.0, help="Lax-Oleinik horizon")
        sp.add_argument("--N-lo", dest="N_lo", type=int, default=512, help="Lax-Oleinik grid points")
        sp.add_argument("--seed", type=int, default=42)
        sp.add_argument("--out", default="out", help="output directory")

    sp = sub.add_parser("effective", help="sample the effective Hamiltonian")
    common(sp)
    sp.set_defaults(func=cmd_effective)

    sp = sub.add_parser("metrics", help="Hofer/Calabi/gamma report")
    common(sp)
    sp.add_argument("--region", help="sublevel:<r> or unit-ball")
    sp.set_defaults(func=cmd_metrics)

    sp = sub.add_parser("counterexample", help="certificate for the bump Hamiltonian")
    common(sp, spec=False)
    sp.add_argument("--n", type=int, default=1, help="torus dimension")
    sp.add_argument("--p-range", help="fiber samples as a:b:n")
    sp.add_argument("--truncated", action="store_true", help="truncate at level 0 first")
    sp.set_defaults(func=cmd_counterexample)

    sp = sub.add_parser("validate", help="run the property and oracle suites")
    sp.add_argument("--only", help=f"comma list from {', '.join(SUITES)}")
    sp.add_argument("--seed", type=int, default=42)
    sp.add_argument("--out", default="out", help="output directory")
    sp.set_defaults(func=cmd_validate)
    return ap


def _join_negative_ranges(argv):
    # "--p-range -3:3:129" would otherwise be read as an unknown option
    out, it = [], iter(argv)
    for tok in it:
        if tok == "--p-range":
            nxt = next(it, None)
            out.append(tok if nxt is None else f"{tok}={nxt}")
        else:
            out.append(tok)
    return out


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = build_parser().parse_args(_join_negative_ranges(argv))
    except SystemExit as exc:
        # --help exits 0, usage errors exit EXIT_CONFIG
        return exc.code if isinstance(exc.code, int) else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except SufficiencyViolated as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SUFFICIENCY
    except (ConfigError, SpecError, DeltaTooLarge, InvalidWidth, OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (HomogError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"solver error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
