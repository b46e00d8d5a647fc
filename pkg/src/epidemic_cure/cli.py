"""Command line entry point: ``epidemic-cure <subcommand> ...``.

Exit status: 0 on success or when every bound passes, 2 when a bound is
violated, 1 on usage errors or refused configurations.
"""
from __future__ import annotations

import argparse
import math
import sys
import warnings

from . import experiments as ex
from .crusade import (Crusade, ExactCrusades, GraphTooLarge, RestrictedCrusades, format_order,
                      width)
from .graph import GraphFormatError, parse_graph_spec
from .sim import RngStream, run

EXIT_OK, EXIT_USAGE, EXIT_VIOLATION = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def parse_caps(text: str | None) -> tuple[int, float]:
    """``events:N``, ``time:T`` or both, comma separated."""
    max_events, max_time = ex.DEFAULT_MAX_EVENTS, math.inf
    if not text:
        return max_events, max_time
    for part in text.split(","):
        key, _, val = part.partition(":")
        try:
            if key == "events":
                max_events = int(val)
            elif key == "time":
                max_time = float(val)
            else:
                raise ValueError
        except ValueError:
            raise UsageError(f"bad --caps entry {part!r}; use events:N and/or time:T") from None
    return max_events, max_time


def parse_bag(text: str, n: int) -> list[int]:
    if text == "all":
        return list(range(n))
    if text.startswith("list:"):
        text = text[5:]
    return [int(x) for x in text.replace(",", " ").split()]


def _add_run_flags(p: argparse.ArgumentParser, reps: int) -> None:
    p.add_argument("--graph", required=True,
                   help="edge-list file or line:N, grid:RxC, complete:N, cycle:N, star:N")
    p.add_argument("--policy", default="cure", choices=ex.POLICIES)
    p.add_argument("--budget", type=float, default=1.0, help="total curing rate r")
    p.add_argument("--init", default="all", help="all | list:0,1,... | frac:p")
    p.add_argument("--reps", type=int, default=reps)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--caps", help="events:N,time:T")
    p.add_argument("--crusade-mode", default="auto", choices=("auto", "exact", "restricted"))
    p.add_argument("--order", help="file with a removal order of all nodes (restricted mode)")
    p.add_argument("--no-check-rates", action="store_true",
                   help="skip the cut <= r/2 instrumentation during excursions")
    p.add_argument("--out", help="directory for replications.csv and summary.json")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="epidemic-cure", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("cutwidth", help="exact CutWidth and an optimal removal order")
    p.add_argument("graph_pos", nargs="?", metavar="graph")
    p.add_argument("--graph")

    p = sub.add_parser("crusade", help="impedance of a bag and its target path")
    p.add_argument("graph_pos", nargs="?", metavar="graph")
    p.add_argument("bag_pos", nargs="?", metavar="bag")
    p.add_argument("--graph")
    p.add_argument("--bag", help="all | list:0,2 | 0,2")
    p.add_argument("--crusade-mode", default="exact", choices=("exact", "restricted"))

    p = sub.add_parser("simulate", help="run the process and print the trace or CSV")
    _add_run_flags(p, reps=1)

    p = sub.add_parser("verify", help="check a bound empirically")
    p.add_argument("bound", choices=sorted(ex.VERIFIERS))
    _add_run_flags(p, reps=10000)

    p = sub.add_parser("sweep", help="mean extinction time over a grid of budgets")
    _add_run_flags(p, reps=2000)
    p.add_argument("--budgets", required=True, help="comma-separated budgets")
    return parser


def _config(args) -> ex.ExperimentConfig:
    max_events, max_time = parse_caps(args.caps)
    return ex.ExperimentConfig(
        graph=args.graph, policy=args.policy, budget=args.budget, init=args.init,
        reps=args.reps, seed=args.seed, max_events=max_events, max_time=max_time,
        crusade_mode=args.crusade_mode, order=args.order, check_rates=not args.no_check_rates)


def _graph_arg(args):
    spec = args.graph or args.graph_pos
    if not spec:
        raise UsageError("a graph is required (positional or --graph)")
    return parse_graph_spec(spec)


def cmd_cutwidth(args) -> int:
    g = _graph_arg(args)
    provider = ExactCrusades(g)
    cr = provider(g.nodes)
    print(width(g, cr))
    print(format_order(cr.removal_order))
    return EXIT_OK


def cmd_crusade(args) -> int:
    g = _graph_arg(args)
    bag_text = args.bag or args.bag_pos
    if bag_text is None:
        raise UsageError("a bag is required (positional or --bag)")
    bag = g.bag(parse_bag(bag_text, g.n))
    provider = ExactCrusades(g) if args.crusade_mode == "exact" else RestrictedCrusades(g)
    cr: Crusade = provider(bag)
    print(width(g, cr))
    print(format_order(cr.removal_order))
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = _config(args)
    if cfg.reps == 1 and not args.out:
        ctx = ex.Context(cfg)
        rng = RngStream(cfg.seed, 0)
        start = ex.initial_bag(cfg.init, ctx.graph, rng)
        trace = run(ctx.graph, ctx.policy(), start, cfg.budget, rng,
                    max_events=cfg.max_events, max_time=cfg.max_time)
        sys.stdout.write(trace.to_log())
        return EXIT_OK
    res = ex.run_experiment(cfg)
    if args.out:
        ex.write_outputs(args.out, res)
    else:
        sys.stdout.write(res.to_csv())
    print(f"replications={len(res.records)} censored={res.censored}", file=sys.stderr)
    return EXIT_OK


def cmd_verify(args) -> int:
    cfg = _config(args)
    verifier = ex.VERIFIERS[args.bound]
    if args.bound == "theorem1" and cfg.policy == "cure":
        ctx = ex.Context(cfg)
        ex.check_cure_hypotheses(ctx.graph, cfg.budget, ctx.cutwidth)
    res = ex.run_experiment(cfg)
    reports = verifier(cfg, res)
    if isinstance(reports, ex.BoundReport):
        reports = (reports,)
    for rep in reports:
        print(rep.line() + (f" ({rep.note})" if rep.note else ""))
    if cfg.policy == "cure" and cfg.check_rates:
        print(f"excursion rate checks: {sum(r.rate_checks for r in res.records)}, "
              f"violations of cut <= r/2: {res.rate_violations()}")
    if args.out:
        ex.write_outputs(args.out, res, reports)
    if any(r.verdict == "fail" for r in reports):
        return EXIT_VIOLATION
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _config(args)
    try:
        budgets = [float(b) for b in args.budgets.split(",")]
    except ValueError:
        raise UsageError("--budgets must be comma-separated numbers") from None
    rows = ex.sweep(cfg, budgets)
    lines = ["budget,mean,variance,count,half_width,censored"]
    lines += [f"{b!r},{s.mean!r},{s.variance!r},{s.count},{s.half_width!r},{s.censored}"
              for b, s in rows]
    text = "\n".join(lines) + "\n"
    if args.out:
        import os
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "sweep.csv"), "w") as fh:
            fh.write(text)
    sys.stdout.write(text)
    for lo, hi in ex.sweep_monotone_violations(rows):
        print(f"heuristic check: mean at r={hi:g} exceeds mean at r={lo:g} "
              "beyond the combined half-widths", file=sys.stderr)
    return EXIT_OK


COMMANDS = {"cutwidth": cmd_cutwidth, "crusade": cmd_crusade, "simulate": cmd_simulate,
            "verify": cmd_verify, "sweep": cmd_sweep}


def run_cli(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            return COMMANDS[args.command](args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except (ex.HypothesisError, ex.AllCensored, GraphTooLarge, GraphFormatError,
            ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main() -> None:
    sys.exit(run_cli())
