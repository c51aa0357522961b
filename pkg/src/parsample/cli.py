"""Command-line entry point: ``parsample <subcommand> ...``.

Exit status is 0 when every invoked check passes, 1 when a check fails
(its verdict JSON goes to stdout) and 2 on usage errors.
"""

import argparse
import os
import sys

from . import suites
from .coordinate import parse_tree, sample_any_order, sequential_baseline
from .csvio import discrete_csv, gaussian_csv, pinning_csv, scaling_csv, write
from .diffusion import build_schedule, euler_baseline, ito_identity_check, sample_diffusion
from .discrete import NoisyDiscreteOracle, load_target
from .gaussian import NoisyGaussianOracle, load_atoms
from .stats import Verdict


class UsageError(Exception):
    pass


def _threads():
    raw = os.environ.get("PARSAMPLE_THREADS")
    if raw is None:
        return 1
    try:
        k = int(raw)
    except ValueError:
        raise UsageError(f"PARSAMPLE_THREADS must be a positive integer, got {raw!r}")
    if k < 1:
        raise UsageError("PARSAMPLE_THREADS must be >= 1")
    return k


def _emit(text, out):
    if out:
        write(out, text)
    else:
        sys.stdout.write(text)


def _verdict(v):
    print(v.to_json())
    return 0 if v.passed else 1


def _positive(kind):
    def parse(s):
        v = kind(s)
        if v <= 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {s}")
        return v
    return parse


def _tree_kind(s):
    try:
        parse_tree(s)
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e))
    return s


def _discrete_target(args):
    target = load_target(args.target)
    if args.noise_tv:
        target = NoisyDiscreteOracle(target, args.noise_tv)
    return target


def _gaussian_target(args):
    target = load_atoms(args.target)
    if args.noise_score:
        inner = target.inner if isinstance(target, NoisyGaussianOracle) else target
        target = NoisyGaussianOracle(inner, args.noise_score)
    return target


def _schedule(args, target):
    return build_schedule(target.R, args.delta, args.eps_tv, target.n)


def cmd_sample_discrete(args):
    res = sample_any_order(_discrete_target(args), args.tree, rho=args.rho,
                           seed=args.seed, samples=args.samples)
    _emit(discrete_csv(res), args.out)
    return 0


def cmd_baseline_discrete(args):
    res = sequential_baseline(_discrete_target(args), seed=args.seed, samples=args.samples)
    _emit(discrete_csv(res), args.out)
    return 0


def cmd_sample_gaussian(args):
    target = _gaussian_target(args)
    res = sample_diffusion(target, _schedule(args, target), rho=args.rho,
                           seed=args.seed, samples=args.samples)
    _emit(gaussian_csv(res), args.out)
    return 0


def cmd_baseline_gaussian(args):
    target = _gaussian_target(args)
    res = euler_baseline(target, _schedule(args, target), seed=args.seed, samples=args.samples)
    _emit(gaussian_csv(res), args.out)
    return 0


def cmd_scaling(args):
    try:
        ns = suites.parse_grid(args.n)
        suites.parse_family(args.family)
    except ValueError as e:
        raise UsageError(str(e))
    recs = suites.scaling_records(args.family, ns, args.trials, args.seed,
                                  method=args.method, tree=args.tree, rho=args.rho)
    _emit(scaling_csv(recs), args.out)
    return 0


def cmd_verify(args):
    check = suites.CHECKS[args.check]
    v = check(seed=args.seed, scale=args.scale)
    if args.out:
        write(args.out, v.to_json() + "\n")
    return _verdict(v)


def cmd_pinning(args):
    if args.m % args.k:
        raise UsageError(f"m={args.m} is not divisible by k={args.k}")
    rows = suites.pinning_rows(args.instances, args.m, args.q, args.seed, k=args.k,
                               method=args.method)
    _emit(pinning_csv(rows), args.out)
    worst = min(r[7] for r in rows)
    if worst < -1e-9:
        print(Verdict("pinning-check", worst, -1e-9, False,
                      {"failed": [r[0] for r in rows if not r[8]]}).to_json())
        return 1
    return 0


def cmd_ito(args):
    target = load_atoms(args.target) if args.target else suites.two_atoms()
    lhs, rhs, rel = ito_identity_check(target, args.t0, args.t1, paths=args.paths,
                                       dt_fine=args.dt, seed=args.seed)
    return _verdict(Verdict("ito-check", rel, args.tol, rel <= args.tol,
                            {"lhs": lhs, "rhs": rhs, "paths": args.paths}))


def build_parser():
    p = argparse.ArgumentParser(prog="parsample",
                                description="Recursive speculative sampling harness.")
    sub = p.add_subparsers(dest="command", required=True)

    def sampling(name, helptext, fn, gaussian):
        s = sub.add_parser(name, help=helptext)
        s.add_argument("--target", required=True, help="target JSON file")
        s.add_argument("--samples", type=_positive(int), required=True)
        s.add_argument("--seed", type=int, required=True)
        s.add_argument("--out", help="CSV path (default: stdout)")
        if gaussian:
            s.add_argument("--delta", type=_positive(float), required=True)
            s.add_argument("--eps-tv", type=_positive(float), required=True)
            s.add_argument("--noise-score", type=float, default=0.0)
        else:
            s.add_argument("--noise-tv", type=float, default=0.0)
        s.set_defaults(fn=fn)
        return s

    s = sampling("sample-discrete", "RS samples from a coordinate denoiser",
                 cmd_sample_discrete, False)
    s.add_argument("--tree", type=_tree_kind, default="binary")
    s.add_argument("--rho", type=_positive(float))
    s = sampling("sample-gaussian", "RS samples of the discretised diffusion",
                 cmd_sample_gaussian, True)
    s.add_argument("--rho", type=_positive(float))
    sampling("baseline-discrete", "sequential autoregressive samples",
             cmd_baseline_discrete, False)
    sampling("baseline-gaussian", "Euler-Maruyama samples", cmd_baseline_gaussian, True)

    s = sub.add_parser("scaling", help="rounds and queries over a grid of n")
    s.add_argument("--family", required=True, help="e.g. markov:p_stay=0.99")
    s.add_argument("--n", required=True, help="grid a..b:xk, a..b or a,b,c")
    s.add_argument("--trials", type=_positive(int), required=True)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--method", choices=["rs", "baseline"], default="rs")
    s.add_argument("--tree", type=_tree_kind, default="binary")
    s.add_argument("--rho", type=_positive(float))
    s.add_argument("--out")
    s.set_defaults(fn=cmd_scaling)

    s = sub.add_parser("verify", help="run a named acceptance check")
    s.add_argument("check", choices=sorted(suites.CHECKS))
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--scale", type=_positive(float), default=1.0,
                   help="fraction of the full sample sizes")
    s.add_argument("--out", help="also write the verdict JSON here")
    s.set_defaults(fn=cmd_verify)

    s = sub.add_parser("pinning-check", help="pinning inequality on random joints")
    s.add_argument("--instances", type=_positive(int), required=True)
    s.add_argument("--m", type=_positive(int), required=True)
    s.add_argument("--q", type=_positive(int), required=True)
    s.add_argument("--k", type=_positive(int), default=2)
    s.add_argument("--method", choices=["partitions", "permutations"], default="partitions")
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--out")
    s.set_defaults(fn=cmd_pinning)

    s = sub.add_parser("ito-check", help="Monte-Carlo check of the Ito identity")
    s.add_argument("--target", help="atoms JSON (default: atoms at -1 and 1)")
    s.add_argument("--t0", type=float, default=0.5)
    s.add_argument("--t1", type=float, default=2.0)
    s.add_argument("--paths", type=_positive(int), default=100000)
    s.add_argument("--dt", type=_positive(float), default=1e-3)
    s.add_argument("--tol", type=_positive(float), default=0.05)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(fn=cmd_ito)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _threads()
        return args.fn(args)
    except UsageError as e:
        parser.print_usage(sys.stderr)
        print(f"parsample: error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
