"""Command-line interface: ``spinmple <subcommand> ...``.

Subcommands: gen, norm, sample, estimate, exact, audit, sweep.
"""
from __future__ import annotations

import argparse
import json
import math
import secrets
import sys
from pathlib import Path

import numpy as np

from . import coupling, estimator, gibbs, harness
from .harness import fmt_float

RANDOM_FAMILIES = ("sk", "hopfield")
MODEL_CHOICES = ("sk", "hopfield", "cw", "lattice", "custom")


class UsageError(Exception):
    pass


def _int_list(s):
    try:
        return [int(x) for x in s.split(",") if x]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {s!r}")


def _float_list(s):
    try:
        return [float(x) for x in s.split(",") if x]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {s!r}")


def _positive_int(s):
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def _nonneg_int(s):
    v = int(s)
    if v < 0:
        raise argparse.ArgumentTypeError("must be a nonnegative integer")
    return v


def _nonneg_float(s):
    v = float(s)
    if not v >= 0 or math.isinf(v):
        raise argparse.ArgumentTypeError("must be a finite nonnegative number")
    return v


def _seed(s):
    v = int(s, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return v


def _add_model_flags(p, n_list=False):
    p.add_argument("--model", choices=MODEL_CHOICES, help="model family")
    if n_list:
        p.add_argument("--n", type=_int_list, required=True, help="comma-separated sizes")
    else:
        p.add_argument("--n", type=_positive_int, help="number of sites")
    p.add_argument("--patterns", type=_positive_int, help="Hopfield pattern count M")
    p.add_argument("--pattern-ratio", type=float, help="Hopfield M/n when --patterns is absent")
    p.add_argument("--bond", type=float, default=1.0, help="lattice bond strength")
    p.add_argument("--matrix", help="jmat file (custom model)")


def _need_seed(args, what):
    if args.seed is None:
        raise UsageError(f"{what} requires an explicit --seed")


def _load_matrix(args, need_seed=True):
    """Coupling matrix from --matrix or from model flags (single n)."""
    if args.matrix and (args.model in (None, "custom")):
        return coupling.read_matrix(args.matrix), f"custom:{Path(args.matrix).name}"
    if args.model is None:
        raise UsageError("give --model or --matrix")
    if args.n is None:
        raise UsageError("--n is required with --model")
    if args.model in RANDOM_FAMILIES and need_seed:
        _need_seed(args, f"--model {args.model}")
    seed = args.seed if args.seed is not None else 0
    if args.model == "lattice" and int(math.isqrt(args.n)) ** 2 != args.n:
        raise UsageError("lattice needs n to be a perfect square")
    spec = harness.model_spec(args.model, args.n, seed, patterns=args.patterns,
                              pattern_ratio=args.pattern_ratio, bond=args.bond)
    return coupling.build(spec), spec.tag


def _write(text, path):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def cmd_gen(args):
    J, _ = _load_matrix(args)
    coupling.write_matrix(J, args.output)
    print(f"norm {fmt_float(coupling.operator_norm(J))}")
    return 0


def cmd_norm(args):
    J = coupling.read_matrix(args.path)
    print(fmt_float(coupling.operator_norm(J, args.tol)))
    return 0


def cmd_sample(args):
    J = coupling.read_matrix(args.matrix)
    seed = args.seed
    if seed is None:
        seed = secrets.randbits(63)
        print(f"seed {seed}", file=sys.stderr)
    smp = gibbs.sample(J, args.beta, args.burnin, args.n_samples, args.thin, seed)
    if smp.mixing_uncertain:
        print("warning: beta*||J|| > 1, mixing_uncertain", file=sys.stderr)
    if args.output in (None, "-"):
        print(f"spins v1 n={J.n} beta={args.beta!r} seed={seed}")
        for t in smp.spins:
            print(gibbs.format_config(t))
    else:
        gibbs.write_spins(args.output, smp.spins, args.beta, seed)
    return 0


def cmd_estimate(args):
    J = coupling.read_matrix(args.matrix)
    if args.spins:
        configs, _ = gibbs.read_spins(args.spins)
        if configs.shape[1] != J.n:
            raise UsageError(f"spins have n={configs.shape[1]}, matrix has n={J.n}")
    elif args.sample_beta is not None:
        _need_seed(args, "inline sampling")
        configs = gibbs.sample(J, args.sample_beta, args.burnin, args.n_samples, args.thin,
                               args.seed).spins
    else:
        raise UsageError("give --spins or --sample-beta")
    j_norm = coupling.operator_norm(J)
    for t in configs:
        est = estimator.mple(J, t, j_norm=j_norm)
        print(f"{est} score={est.score_at_root:.6e}")
    return 0


def cmd_exact(args):
    J, _ = _load_matrix(args)
    h = gibbs.energy_table(J)
    lines = ["beta,psi,psi_prime,psi_double_prime"]
    for b in args.beta:
        t = gibbs.enumerate_exact(J, b, h_values=h)
        lines.append(",".join([fmt_float(b), fmt_float(t.psi), fmt_float(t.psi_prime),
                               fmt_float(t.psi_double_prime)]))
    _write("\n".join(lines) + "\n", args.output)
    return 0


AUDITS = ("lemma12", "lemma12-tail", "thm21", "lemma22", "lemma23", "lemma24", "lemma25",
          "lemma26")
_AUDIT_GRID = {"lemma12-tail": [0.05, 0.1, 0.2, 0.5], "thm21": [0.1, 0.3, 0.5],
               "lemma22": [0.05, 0.1, 0.2], "lemma26": [0.1, 0.3, 0.5]}


def cmd_audit(args):
    needs_seed = args.model in RANDOM_FAMILIES or (args.kind == "lemma12" and args.mode == "mc")
    if needs_seed:
        _need_seed(args, f"audit {args.kind} here")
    J, _ = _load_matrix(args)
    if args.kind == "lemma23":
        grid = args.beta if len(args.beta) > 1 else list(np.linspace(0.0, 3.0, 13))
        rep = harness.monotonicity_audit(J, args.f, grid)
        if args.format == "json":
            text = json.dumps(dict(name=rep.name, function=rep.function, betas=rep.betas,
                                   values=rep.values, max_decrease=rep.max_decrease,
                                   satisfied=rep.nondecreasing), indent=None) + "\n"
        else:
            text = "beta,expectation\n" + "".join(
                f"{fmt_float(b)},{fmt_float(v)}\n" for b, v in zip(rep.betas, rep.values))
        _write(text, args.output)
        print(f"lemma23 nondecreasing={str(rep.nondecreasing).lower()} "
              f"max_decrease={rep.max_decrease:.3e}", file=sys.stderr)
        return 0 if rep.nondecreasing else 1
    reports = []
    ss = None
    grid = args.grid if args.grid else _AUDIT_GRID.get(args.kind, [])
    for b in args.beta:
        if args.kind == "lemma12":
            reports.append(harness.variance_audit(J, b, args.mode, args.replicas, args.seed))
            continue
        if ss is None:
            ss = harness.StateSpace(J)
        if args.kind == "lemma24":
            g = args.grid if args.grid else [b / 2, b]
            reports += harness.probability_audit(J, b, "lemma24", g, ss, args.jobs)
            continue
        q = {"lemma12-tail": "score_tail", "thm21": "tanh_distance", "lemma22": "lemma22",
             "lemma25": "h_threshold", "lemma26": "lemma26"}[args.kind]
        reports += harness.probability_audit(J, b, q, grid, ss, args.jobs)
    if args.format == "json":
        text = "".join(json.dumps(r.to_dict()) + "\n" for r in reports)
    else:
        text = harness.reports_to_csv(reports)
    _write(text, args.output)
    bad = [r for r in reports if r.satisfied is False]
    for r in bad:
        print(f"VIOLATION {r.name} {r.inputs}", file=sys.stderr)
    return 1 if bad else 0


def cmd_sweep(args):
    if args.kind == "cw-counterexample":
        if len(args.beta) != 1:
            raise UsageError("cw-counterexample takes a single --beta")
        dists = harness.counterexample_cw(args.beta[0], args.n)
        text = harness.cw_to_csv(dists)
        _write(text, args.output)
        if args.output not in (None, "-"):
            sys.stdout.write(text)
        return 0
    _need_seed(args, f"sweep {args.kind}")
    if args.model is None:
        raise UsageError("--model is required")
    fam = dict(patterns=args.patterns, pattern_ratio=args.pattern_ratio, bond=args.bond)
    if args.model != "hopfield":
        fam = dict(bond=args.bond) if args.model == "lattice" else {}
    if len(args.beta) != 1:
        raise UsageError(f"{args.kind} takes a single --beta")
    beta = args.beta[0]
    if args.kind == "conditions":
        rows, rep = harness.condition_scan(args.model, beta, args.n, args.disorder_seed
                                           if args.disorder_seed is not None else args.seed,
                                           args.seed, **fam)
        _write(harness.conditions_to_csv(rows), args.output)
        print(f"condition_a={str(rep.condition_a).lower()} sup_norm={rep.sup_norm:.6g} "
              f"condition_b={str(rep.condition_b).lower()} min_psi={rep.min_psi:.6g} "
              f"({rep.label})", file=sys.stderr)
        return 0
    opts = harness.SamplerOptions(args.burnin, args.thin)
    summ = harness.consistency_sweep(args.model, beta, args.n, args.replicas, args.seed,
                                     args.disorder_seed, opts, args.jobs, **fam)
    _write(harness.records_to_csv(summ.records, args.timing), args.output)
    if args.summary:
        Path(args.summary).write_text(summ.to_csv(), encoding="utf-8")
    out = sys.stderr if args.output in (None, "-") else sys.stdout
    print(f"{'n':>6} {'finite':>6} {'median':>10} {'rmse':>10} {'sqrt_n_rmse':>12}", file=out)
    for r in summ.rows:
        print(f"{r.n:>6} {r.finite:>6} {r.median:>10.5f} {r.rmse:>10.5f} {r.sqrt_n_rmse:>12.5f}",
              file=out)
    print(f"ratio {summ.ratio:.4f}", file=out)
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="spinmple", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a coupling matrix file")
    _add_model_flags(g)
    g.add_argument("--seed", type=_seed, help="disorder seed (required for sk/hopfield)")
    g.add_argument("-o", "--output", required=True, help="jmat output path")
    g.set_defaults(func=cmd_gen)

    nm = sub.add_parser("norm", help="print the spectral norm of a jmat file")
    nm.add_argument("path")
    nm.add_argument("--tol", type=float, default=1e-10)
    nm.set_defaults(func=cmd_norm)

    s = sub.add_parser("sample", help="draw configurations by heat-bath Glauber dynamics")
    s.add_argument("--matrix", required=True)
    s.add_argument("--beta", type=_nonneg_float, required=True)
    s.add_argument("--n-samples", type=_positive_int, default=1)
    s.add_argument("--burnin", type=_nonneg_int, default=gibbs.BURNIN_SWEEPS)
    s.add_argument("--thin", type=_positive_int, default=gibbs.THIN_SWEEPS)
    s.add_argument("--seed", type=_seed, help="chain seed; a fresh one is echoed if omitted")
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_sample)

    e = sub.add_parser("estimate", help="maximum pseudolikelihood estimate of beta")
    e.add_argument("--matrix", required=True)
    e.add_argument("--spins", help="spins v1 file")
    e.add_argument("--sample-beta", type=_nonneg_float, help="sample data inline at this beta")
    e.add_argument("--n-samples", type=_positive_int, default=1)
    e.add_argument("--burnin", type=_nonneg_int, default=gibbs.BURNIN_SWEEPS)
    e.add_argument("--thin", type=_positive_int, default=gibbs.THIN_SWEEPS)
    e.add_argument("--seed", type=_seed)
    e.set_defaults(func=cmd_estimate)

    x = sub.add_parser("exact", help="exact psi and derivatives by enumeration")
    _add_model_flags(x)
    x.add_argument("--seed", type=_seed)
    x.add_argument("--beta", type=_float_list, required=True, help="comma-separated betas")
    x.add_argument("-o", "--output")
    x.set_defaults(func=cmd_exact)

    a = sub.add_parser("audit", help="exact audits of the finite-sample bounds")
    a.add_argument("kind", choices=AUDITS)
    _add_model_flags(a)
    a.add_argument("--seed", type=_seed, help="disorder seed (and MC seed)")
    a.add_argument("--beta", type=_float_list, default=[1.0], help="comma-separated betas")
    a.add_argument("--grid", type=_float_list, help="delta/eps/c/beta_1 grid")
    a.add_argument("--mode", choices=("exact", "mc"), default="exact")
    a.add_argument("--replicas", type=_positive_int, default=10_000, help="MC sample count")
    a.add_argument("--f", choices=harness.TEST_FUNCTIONS, default="identity")
    a.add_argument("--format", choices=("csv", "json"), default="csv")
    a.add_argument("--jobs", type=_positive_int, default=1)
    a.add_argument("-o", "--output")
    a.set_defaults(func=cmd_audit)

    w = sub.add_parser("sweep", help="replica sweeps and the Curie-Weiss counterexample")
    w.add_argument("kind", choices=("consistency", "cw-counterexample", "conditions"))
    _add_model_flags(w, n_list=True)
    w.add_argument("--beta", type=_float_list, required=True)
    w.add_argument("--replicas", type=_positive_int, default=50)
    w.add_argument("--seed", type=_seed, help="master data seed")
    w.add_argument("--disorder-seed", type=_seed, help="defaults to --seed")
    w.add_argument("--burnin", type=_nonneg_int, default=gibbs.BURNIN_SWEEPS)
    w.add_argument("--thin", type=_positive_int, default=gibbs.THIN_SWEEPS)
    w.add_argument("--jobs", type=_positive_int, default=1)
    w.add_argument("--timing", action="store_true", help="fill the runtime_ms column")
    w.add_argument("--summary", help="per-n summary CSV path")
    w.add_argument("-o", "--output")
    w.set_defaults(func=cmd_sweep)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.error(str(exc))
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
