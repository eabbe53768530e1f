"""Command-line entry point: ``cogmac {analyze,simulate,sweep,compare,phy}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .chain import service_rates
from .errors import DegenerateModelError, NumericalError, ParameterError, StabilityError
from .experiment import (
    PRESETS,
    ExperimentSpec,
    SimSettings,
    compare,
    load_spec,
    parse_sweep,
    run_sweep,
    spec_from_dict,
)
from .phy import derive_link_profile, load_scenario
from .simulator import SimConfig, replicate
from .throughput import aggregate_throughput

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_COMPARE = 0, 1, 2, 3



class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _common(p: argparse.ArgumentParser, sim: bool = False, sweep: bool = False):
    p.add_argument("--config", type=Path, help="JSON experiment file; flags override it")
    p.add_argument("--preset", choices=sorted(PRESETS))
    p.add_argument("--profile", help="p11,p112,p22,p212")
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--q", type=float)
    p.add_argument("--M", type=int)
    if sweep:
        p.add_argument("--sweep", help="var:start:stop:step or var=v1,v2,... (var in q, lambda, M)")
        p.add_argument("--out", type=Path, help="CSV output path")
    if sim:
        p.add_argument("--slots", type=int)
        p.add_argument("--warmup", type=int)
        p.add_argument("--reps", type=int)
        p.add_argument("--seed", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cogmac", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("analyze", help="analytical throughput at one point")
    _common(p)
    p.add_argument("--json", action="store_true", help="print the report as JSON")

    p = sub.add_parser("simulate", help="slot-level simulation at one point")
    _common(p, sim=True)
    p.add_argument("--trace", type=Path, help="write the per-slot event trace of replication 0")

    p = sub.add_parser("sweep", help="sweep q, lambda or M and write CSV")
    _common(p, sim=True, sweep=True)
    p.add_argument("--simulate", action="store_true", help="add simulated columns")

    p = sub.add_parser("compare", help="validate analytics against simulation")
    _common(p, sim=True, sweep=True)

    p = sub.add_parser("phy", help="derive link success probabilities from a scenario file")
    p.add_argument("scenario", type=Path)
    return parser


def _spec_from_args(args, want_sim: bool) -> ExperimentSpec:
    if args.config is not None:
        spec = load_spec(args.config)
        if args.preset or args.profile:
            raw = {"preset": args.preset} if args.preset else {"profile": args.profile.split(",")}
            spec = replace(spec, profile=spec_from_dict(raw).profile, preset=args.preset)
    else:
        if args.preset and args.profile:
            raise ParameterError("give either --preset or --profile, not both")
        if args.profile:
            raw = {"profile": args.profile.split(",")}
        else:
            raw = {"preset": args.preset or "fig3"}
        spec = spec_from_dict(raw)

    kw = {}
    if args.lam is not None:
        kw["lam"] = args.lam
    if args.q is not None:
        kw["q"] = args.q
    if args.M is not None:
        kw["M"] = args.M
    sweep = getattr(args, "sweep", None)
    if sweep:
        kw["sweep_var"], kw["sweep_values"] = parse_sweep(sweep)
    if getattr(args, "out", None) is not None:
        kw["output"] = args.out

    if want_sim:
        base = spec.simulation or SimSettings()
        sim_kw = {}
        for flag, name in (("slots", "slots"), ("warmup", "warmup"), ("reps", "replications"),
                           ("seed", "seed")):
            if getattr(args, flag, None) is not None:
                sim_kw[name] = getattr(args, flag)
        kw["simulation"] = replace(base, **sim_kw)
    if kw:
        spec = replace(spec, **kw)
    return spec


def _single_point(spec: ExperimentSpec):
    params = spec.params_at(spec.fixed(spec.sweep_var))
    return params, service_rates(spec.profile, params.q)


def cmd_analyze(args) -> int:
    spec = _spec_from_args(args, want_sim=False)
    params, rates = _single_point(spec)
    report = aggregate_throughput(params, rates, spec.profile)
    fields = {
        "lambda": params.lam, "q": params.q, "M": params.M,
        "mu1": rates.mu1, "mu2": rates.mu2, "stable": report.stable,
        "pi0": report.pi0, "prob_band": report.prob_band,
        "idle_term": report.idle_term, "band_term": report.band_term,
        "t_primary": report.t_primary, "t_secondary": report.t_secondary,
        "t_aggregate": report.t_aggregate,
    }
    if args.json:
        print(json.dumps(fields, indent=2))
    else:
        for k, v in fields.items():
            print(f"{k:>12}: {v}")
    if not report.stable:
        raise StabilityError(
            f"queue unstable (lambda={params.lam} >= mu2={rates.mu2}); "
            "analytical throughput is undefined"
        )
    return EXIT_OK


def cmd_simulate(args) -> int:
    spec = _spec_from_args(args, want_sim=True)
    params, _ = _single_point(spec)
    s = spec.simulation
    config = SimConfig(params=params, profile=spec.profile, slots=s.slots, warmup=s.warmup,
                       seed=s.seed, replications=s.replications)
    if args.trace is not None:
        from .simulator import run_replication

        with open(args.trace, "w") as fh:
            run_replication(config, 0, trace=fh)
    stats = replicate(config)
    print(f"slots={config.slots} warmup={config.warmup} replications={config.replications} "
          f"seed={config.seed}")
    print(f"{'metric':>12} {'mean':>12} {'stderr':>10} {'ci95':>10}")
    for metric, mean in stats.mean.items():
        hw = stats.half_width[metric]
        print(f"{metric:>12} {mean:12.8f} {stats.stderr[metric]:10.3e} "
              f"{'' if hw is None else format(hw, '.3e'):>10}")
    print(f"{'final_queue':>12} {stats.final_queue:12.1f}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    spec = _spec_from_args(args, want_sim=args.simulate)
    if not args.simulate:
        spec = replace(spec, simulation=None)
    rows = run_sweep(spec)
    if spec.output is None:
        from .experiment import format_csv

        sys.stdout.write(format_csv(rows))
    else:
        print(f"wrote {len(rows)} rows to {spec.output}")
    return EXIT_OK


def cmd_compare(args) -> int:
    spec = _spec_from_args(args, want_sim=True)
    report = compare(spec)
    if spec.output is not None:
        from .experiment import write_csv

        write_csv(report.rows, spec.output)
    print(report.format())
    return EXIT_OK if report.passed else EXIT_COMPARE


def cmd_phy(args) -> int:
    profile = derive_link_profile(load_scenario(args.scenario))
    for name, value in zip(("p_1_1", "p_1_12", "p_2_2", "p_2_12"), profile.as_tuple()):
        print(f"{name} = {value:.10g}")
    return EXIT_OK


COMMANDS = {"analyze": cmd_analyze, "simulate": cmd_simulate, "sweep": cmd_sweep,
            "compare": cmd_compare, "phy": cmd_phy}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        return COMMANDS[args.command](args)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ParameterError, StabilityError, DegenerateModelError, NumericalError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
