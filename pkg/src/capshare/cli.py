"""Command-line front end.

    capshare approx   --config F
    capshare exact    --config F [--dump-chain]
    capshare simulate --config F --arrivals N --replications R --seed S [--warmup FRAC] [--trace FILE]
    capshare analyze  --config F [--skip-exact] [--sim ...]
    capshare tables   [--format md|csv] [--skip-sim] [--out DIR] [--seed S]
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from capshare import approx, exact, experiments, sim
from capshare.configio import parse_config
from capshare.errors import CapshareError, ParseError, ValidationError


def _prob(x, full):
    return repr(float(x)) if full else f"{x:.4f}"


def cmd_approx(args):
    config = parse_config(args.config)
    res = approx.approximate_loss(config)
    print(f"offered load A = {res.load:.6g}")
    print(f"equivalent servers v = {res.servers:.6g}")
    print(f"approximate loss = {_prob(res.blocking, args.full_precision)}")
    return 0


def cmd_exact(args):
    config = parse_config(args.config)
    gen = exact.build_state_space(config, args.max_states)
    dist = exact.stationary_distribution(gen)
    loss = float(dist.probabilities[gen.idle == 0].sum())
    if args.dump_chain:
        sys.stdout.write(exact.dump_chain(gen))
    print(f"states = {gen.size}")
    print(f"balance residual = {dist.residual:.3e}")
    print(f"exact loss = {_prob(loss, args.full_precision)}")
    return 0


def cmd_simulate(args):
    config = parse_config(args.config)
    trace = open(args.trace, "w", encoding="utf-8") if args.trace else None
    try:
        est = sim.run(config, args.arrivals, args.replications, args.warmup, args.seed,
                      engine_name="reference" if trace else "compiled",
                      check_invariants=args.check, trace=trace)
    finally:
        if trace:
            trace.close()
    full = args.full_precision
    print(f"simulated loss = {_prob(est.point, full)}  95% CI [{_prob(est.ci_low, full)}, {_prob(est.ci_high, full)}]")
    for i, (p, se) in enumerate(zip(est.per_class, est.per_class_se)):
        print(f"  class {i}: {_prob(p, full)} (se {se:.2g})")
    print(f"time-average P(idle = 0) = {_prob(est.time_average, full)}")
    print(f"replications = {est.replications}, counted arrivals = {est.arrivals_total}, events = {est.events}")
    if args.check:
        print(f"invariant violations = {est.invariant_violations}")
    return 0


def _sim_params(args):
    return experiments.SimParams(args.arrivals, args.replications, args.warmup, args.seed)


def cmd_analyze(args):
    config = parse_config(args.config)
    row = experiments.analyze(config, run_exact=not args.skip_exact, run_sim=args.sim,
                              sim_params=_sim_params(args))
    full = args.full_precision
    print(f"approx = {_prob(row.approx.blocking, full)}")
    print(f"exact = {row.exact if row.exact == experiments.SKIPPED else _prob(row.exact, full)}")
    if row.sim == experiments.SKIPPED:
        print("sim = skipped")
    else:
        print(f"sim = {_prob(row.sim.point, full)} [{_prob(row.sim.ci_low, full)}, {_prob(row.sim.ci_high, full)}]")
    for note in row.notes:
        print(f"note: {note}")
    return 0


def cmd_tables(args):
    reports = experiments.reproduce(run_sim=not args.skip_sim, sim_params=_sim_params(args),
                                    row3_channels_required=args.table4_row3_d)
    render = experiments.render_markdown if args.format == "md" else experiments.render_csv
    ext = "md" if args.format == "md" else "csv"
    failures = []
    for rep in reports:
        text = render(rep, args.full_precision)
        if args.out:
            out = Path(args.out)
            out.mkdir(parents=True, exist_ok=True)
            with open(out / f"table{rep.table}.{ext}", "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text if args.format == "md" else f"# table {rep.table}\n{text}")
            sys.stdout.write("\n")
        failures += rep.failures()
    for line in failures:
        print(f"TOLERANCE: {line}", file=sys.stderr)
    print(f"{len(failures)} tolerance violation(s)", file=sys.stderr)
    return 1 if failures else 0


def _add_sim_options(p, arrivals=1_000_000, replications=20):
    p.add_argument("--arrivals", type=int, default=arrivals, help="arrivals per replication")
    p.add_argument("--replications", type=int, default=replications)
    p.add_argument("--warmup", type=float, default=0.1, help="fraction of arrivals discarded")
    p.add_argument("--seed", type=int, default=experiments.SimParams.seed)


def build_parser():
    parser = argparse.ArgumentParser(prog="capshare", description="Loss probability of a capacity-sharing loss system")
    parser.add_argument("--full-precision", action="store_true", help="print probabilities with full precision")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("approx", help="fractional Erlang B approximation")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_approx)

    p = sub.add_parser("exact", help="exact value from the Markov chain")
    p.add_argument("--config", required=True)
    p.add_argument("--dump-chain", action="store_true", help="list states and outgoing rates")
    p.add_argument("--max-states", type=int, default=exact.DEFAULT_MAX_STATES)
    p.set_defaults(func=cmd_exact)

    p = sub.add_parser("simulate", help="discrete-event simulation")
    p.add_argument("--config", required=True)
    _add_sim_options(p)
    p.add_argument("--trace", help="write one line per event to this file (slow engine)")
    p.add_argument("--check", action="store_true", help="check channel invariants after every event")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("analyze", help="approx, exact and optionally simulated loss for one config")
    p.add_argument("--config", required=True)
    p.add_argument("--skip-exact", action="store_true")
    p.add_argument("--sim", action="store_true")
    _add_sim_options(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("tables", help="reproduce the published comparison tables")
    p.add_argument("--format", choices=("md", "csv"), default="md")
    p.add_argument("--skip-sim", action="store_true")
    p.add_argument("--out", help="directory for table<N>.<format> files (stdout if omitted)")
    p.add_argument("--table4-row3-d", type=int, choices=(1, 2), default=1,
                   help="channels required in Table 4 row 3 (printed: 1)")
    _add_sim_options(p)
    p.set_defaults(func=cmd_tables)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: file not found: {exc.filename}", file=sys.stderr)
    except ParseError as exc:
        print(f"error: parse error: {exc}", file=sys.stderr)
    except ValidationError as exc:
        print("error: invalid configuration:", file=sys.stderr)
        for v in exc.violations:
            print(f"  {v.code}: {v.message}", file=sys.stderr)
    except CapshareError as exc:
        print(f"error: {exc}", file=sys.stderr)
    return 2


if __name__ == "__main__":
    sys.exit(main())
