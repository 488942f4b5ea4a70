"""
Command-line front end: ``dropaudit {audit,bounds,simulate,summarize}``.

Every subcommand accepts ``--out DIR``, ``--threads N``, ``--seed S``,
``--config FILE`` and ``--dry-run``. Values from the JSON config file act as
defaults that explicit flags override. Exit codes: 0 success, 1 usage,
2 data problems, 3 numerical failure.
"""

import argparse
import json
import os
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import dataio
from .audit import AuditQuery, amip_audit, brute_force_delta, one_greedy
from .bounds import (
    BoundParams,
    NoiseDist,
    asymptotic_lower_bound,
    finite_sample_lower_bound,
    gaussian_upper_bound,
    rate_bounds,
)
from .errors import BoundError, BudgetExceeded, DataError, DimensionMismatch, NumericalError
from .regression import HuberConfig
from .simulate import (
    ModelSpec,
    SimulationConfig,
    SimulationFailed,
    run_figure1,
    run_regime_grid,
    regime_trends,
)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 0, 1, 2, 3

# flags that affect neither results nor report bytes
_NOT_ECHOED = {"out", "threads", "config", "dry_run", "command", "handler"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _floats(text):
    try:
        return [float(x) for x in str(text).split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _ints(text):
    try:
        return [int(x) for x in str(text).split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def parse_direction(text: str, p: int, names=None) -> np.ndarray:
    """``e<j>``, a column name, or a comma list.

    ``e<j>`` selects coefficient j counting from 0, so with an intercept in
    the first column ``e1`` is the first slope.
    """
    text = text.strip()
    if text.startswith("e") and text[1:].isdigit():
        j = int(text[1:])
        if not 0 <= j < p:
            raise UsageError(f"direction {text} outside e0..e{p - 1}")
        return np.eye(p)[j]
    if names and text in names:
        return np.eye(p)[list(names).index(text)]
    try:
        v = np.array([float(x) for x in text.split(",")])
    except ValueError:
        raise UsageError(f"cannot parse direction {text!r}") from None
    if v.shape != (p,):
        raise UsageError(f"direction has {v.size} entries, design has {p} columns")
    return v


def _common(p):
    g = p.add_argument_group("common")
    g.add_argument("--out", default=".", help="output directory")
    g.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    g.add_argument("--seed", type=int, default=0, help="master seed")
    g.add_argument("--config", help="JSON file of defaults, overridden by flags")
    g.add_argument("--dry-run", action="store_true",
                   help="validate inputs and print the resolved plan")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dropaudit", description=__doc__.strip().splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    a = sub.add_parser("audit", help="search for a removal set that moves a coefficient")
    _common(a)
    a.add_argument("--data", required=True)
    a.add_argument("--schema", required=True, help="JSON table schema")
    a.add_argument("--delimiter", default=",")
    a.add_argument("--direction", required=True,
                   help="e<j> (0-based coefficient), column name, or comma list")
    a.add_argument("--loss", choices=("squared", "huber"), default="squared")
    a.add_argument("--tau", type=float, default=1.0)
    a.add_argument("--method", choices=("one-greedy", "amip", "brute-force"), default="one-greedy")
    a.add_argument("--target", choices=("flip", "maximize"), default="flip")
    a.add_argument("--k-max", type=int, default=None,
                   help="removal budget (defaults to n - p for flip, 10 otherwise)")
    a.add_argument("--allow-exhaustive", action="store_true")
    a.add_argument("--budget", type=int, default=None, help="brute-force subset limit")
    a.add_argument("--candidates", type=int, default=None,
                   help="Huber greedy: refit only the top-m first-order candidates")
    a.set_defaults(handler=cmd_audit)

    b = sub.add_parser("bounds", help="evaluate a theoretical bound")
    _common(b)
    b.add_argument("--kind", required=True, choices=(
        "gaussian-ub", "asymptotic-lb", "finite-lb", "misspec-rate", "consistency-rate"))
    b.add_argument("--n", type=int)
    b.add_argument("--p", type=int)
    b.add_argument("--k", type=int)
    b.add_argument("--alpha", type=float)
    b.add_argument("--t", type=float, default=0.0)
    b.add_argument("--delta", type=float, default=0.0)
    b.add_argument("--noise", default="gaussian",
                   choices=("gaussian", "rademacher", "uniform", "student_t"))
    b.add_argument("--df", type=float, default=None)
    b.add_argument("--noise-scale", type=float, default=1.0)
    b.add_argument("--sigma-inv-norm", type=float, default=1.0)
    b.add_argument("--sigma-inv-v-norm", type=float, default=1.0)
    b.add_argument("--eta", type=float, default=1.0, help="misspecification sub-Gaussian constant")
    b.add_argument("--omega", type=float, default=1.0)
    b.add_argument("--kappa", type=float, default=1.0)
    b.add_argument("--beta-norm", type=float, default=0.0)
    b.add_argument("--yx-psi1", type=float, default=1.0)
    b.add_argument("--eta-consistency", type=float, default=None)
    b.add_argument("--C", dest="C", type=float, default=1.0)
    b.add_argument("--c", dest="c", type=float, default=1.0)
    b.add_argument("--cutoff", type=float, default=0.1)
    b.set_defaults(handler=cmd_bounds)

    s = sub.add_parser("simulate", help="run a synthetic experiment")
    _common(s)
    mode = s.add_mutually_exclusive_group(required=True)
    mode.add_argument("--figure1", action="store_true")
    mode.add_argument("--regime-grid", action="store_true")
    s.add_argument("--p", type=int, default=1)
    s.add_argument("--n", type=int, default=1000)
    s.add_argument("--replicates", type=int, default=50)
    s.add_argument("--alphas", type=_floats, default=[0.01, 0.02, 0.03, 0.04, 0.05])
    s.add_argument("--methods", default="amip,theory")
    s.add_argument("--noise", default="gaussian",
                   choices=("gaussian", "rademacher", "uniform", "student_t"))
    s.add_argument("--df", type=float, default=None)
    s.add_argument("--n-list", type=_ints, default=[200, 800, 3200])
    s.add_argument("--regions", default="I,II,III,IV")
    s.set_defaults(handler=cmd_simulate)

    m = sub.add_parser("summarize", help="response diagnostics, optionally for a removal set")
    _common(m)
    m.add_argument("--data", required=True)
    m.add_argument("--schema", required=True)
    m.add_argument("--delimiter", default=",")
    m.add_argument("--removal", help="audit report whose removed rows to describe")
    m.set_defaults(handler=cmd_summarize)
    return parser


def _apply_config(parser, argv):
    """Re-parse with config-file values installed as subparser defaults."""
    args = parser.parse_args(argv)
    if not args.config:
        return args
    try:
        with open(args.config, encoding="utf-8") as fh:
            overlay = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {args.config}: {exc}")
    if not isinstance(overlay, dict):
        raise UsageError("config file must hold a JSON object")
    overlay = {k.replace("-", "_"): v for k, v in overlay.items()}
    unknown = set(overlay) - set(vars(args))
    if unknown:
        raise UsageError(f"unknown config keys: {sorted(unknown)}")
    subparser = parser._subparsers._group_actions[0].choices[args.command]
    subparser.set_defaults(**overlay)
    return parser.parse_args(argv)


def _resolved(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in _NOT_ECHOED}


def _noise(args) -> NoiseDist:
    return NoiseDist(args.noise, args.df)


def _load(args):
    schema = dataio.TableSchema.from_json(args.schema)
    data = dataio.load_dataset(args.data, schema, delimiter=args.delimiter)
    return dataio.expand_fixed_effects(data, schema.fixed_effect_columns)


def _plan(args, extra=None):
    plan = {"command": args.command, "config": _resolved(args)}
    if extra:
        plan.update(extra)
    print(dataio.dumps(plan), end="")
    return EXIT_OK


def cmd_audit(args) -> int:
    data = _load(args)
    v = parse_direction(args.direction, data.p, data.column_names)
    k_max = args.k_max
    if k_max is None:
        k_max = data.n - data.p if args.target == "flip" else min(10, data.n - data.p)
    if args.method == "brute-force" and not args.allow_exhaustive:
        raise UsageError("brute-force needs --allow-exhaustive")
    if args.method != "one-greedy" and args.loss == "huber":
        raise UsageError("only one-greedy supports the Huber loss")
    loss = HuberConfig(args.tau) if args.loss == "huber" else "squared"
    q = AuditQuery(v, k_max, args.target, loss, args.candidates)
    if args.dry_run:
        return _plan(args, {"n": data.n, "p": data.p, "direction": v.tolist(), "k_max": k_max})
    if args.method == "one-greedy":
        trace = one_greedy(data, q)
    elif args.method == "amip":
        trace = amip_audit(data, q)
    else:
        kw = {} if args.budget is None else {"budget": args.budget}
        trace = brute_force_delta(data, q, **kw)
    removed_ids = [data.row_ids[i] for i in trace.removed] if data.row_ids else None
    extras = {"removed_row_ids": removed_ids,
              "summary": asdict(dataio.summarize(data, trace.removed)),
              "column_names": data.column_names}
    path = Path(args.out) / "audit.json"
    dataio.emit_report(trace, path, _resolved(args), extras)
    print(path)
    return EXIT_OK


def _bound_params(args) -> BoundParams:
    missing = [f for f in ("n", "p", "k") if getattr(args, f) is None]
    if missing:
        raise UsageError(f"--kind {args.kind} needs " + ", ".join("--" + m for m in missing))
    return BoundParams(n=args.n, p=args.p, k=args.k, t=args.t, delta=args.delta,
                       sigma_inv_norm=args.sigma_inv_norm,
                       sigma_inv_v_norm=args.sigma_inv_v_norm,
                       noise_scale=args.noise_scale, eta_misspec=args.eta,
                       omega=args.omega, kappa=args.kappa, beta_norm=args.beta_norm,
                       yx_psi1=args.yx_psi1, eta_consistency=args.eta_consistency)


def cmd_bounds(args) -> int:
    if args.kind == "asymptotic-lb":
        alpha = args.alpha
        if alpha is None:
            if args.n is None or args.k is None:
                raise UsageError("asymptotic-lb needs --alpha or both --n and --k")
            alpha = args.k / args.n
        if args.dry_run:
            return _plan(args, {"alpha": alpha})
        report = asymptotic_lower_bound(alpha, args.sigma_inv_v_norm, _noise(args),
                                        args.noise_scale)
    else:
        params = _bound_params(args)
        if args.dry_run:
            return _plan(args, {"params": params.to_dict()})
        if args.kind == "finite-lb":
            report = finite_sample_lower_bound(params, _noise(args), c=args.c)
        elif args.kind == "gaussian-ub":
            report = gaussian_upper_bound(params)
        else:
            kind = "misspec_delta" if args.kind == "misspec-rate" else "consistency"
            report = rate_bounds(params, kind, C=args.C, c=args.c, cutoff=args.cutoff)
    path = Path(args.out) / "bounds.json"
    dataio.emit_report(report, path, _resolved(args))
    print(path)
    return EXIT_OK


def cmd_simulate(args) -> int:
    noise = _noise(args)
    if args.figure1:
        spec = ModelSpec.isotropic(args.p, noise=noise) if args.p > 1 else \
            ModelSpec(np.eye(1), np.ones(1), noise)
        cfg = SimulationConfig(spec, args.n, args.replicates, tuple(args.alphas),
                               master_seed=args.seed,
                               methods=tuple(m.strip() for m in args.methods.split(",")))
        if args.dry_run:
            return _plan(args, {"simulation": cfg.to_dict()})
        result = run_figure1(cfg, threads=args.threads)
        path = Path(args.out) / "simulate.json"
        dataio.emit_report(result, path, _resolved(args))
    else:
        regions = tuple(r.strip() for r in args.regions.split(","))
        if set(regions) - {"I", "II", "III", "IV"}:
            raise UsageError("regions must be drawn from I, II, III, IV")
        if args.dry_run:
            return _plan(args, {"regions": list(regions), "n_list": args.n_list})
        rows = run_regime_grid(args.n_list, regions, seeds=args.replicates,
                               master_seed=args.seed, noise=noise, threads=args.threads)
        doc = {"type": "RegimeGrid", "data": {"rows": rows, "trends": regime_trends(rows)}}
        path = Path(args.out) / "regime_grid.json"
        dataio.emit_report(doc, path, _resolved(args))
    print(path)
    return EXIT_OK


def cmd_summarize(args) -> int:
    data = _load(args)
    removal = None
    if args.removal:
        trace = dataio.load_report(args.removal)
        removal = trace.removed
    if args.dry_run:
        return _plan(args, {"n": data.n, "p": data.p})
    stats = dataio.summarize(data, removal)
    path = Path(args.out) / "summary.json"
    dataio.emit_report(stats, path, _resolved(args))
    print(path)
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
        if args.threads < 1:
            raise UsageError("--threads must be >= 1")
        return args.handler(args)
    except UsageError as exc:
        print(f"dropaudit: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, FileNotFoundError, DimensionMismatch) as exc:
        print(f"dropaudit: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (BoundError, BudgetExceeded) as exc:
        print(f"dropaudit: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericalError, SimulationFailed) as exc:
        print(f"dropaudit: numerical error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"dropaudit: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
