"""Command line front end: ``blsnc {analyze,sweep,awc,simulate,compare} CONFIG``.

Exit status: 0 when everything was bounded (and, with ``--strict``, every deadline
and bound check passed), 1 when the analysis is infeasible or a strict check fails,
2 on a configuration error.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

from . import __version__
from .errors import BlsncError, ConfigError

EXIT_OK, EXIT_INFEASIBLE, EXIT_CONFIG = 0, 1, 2


def _num(x):
    return "" if x is None else repr(float(x))


def _emit(args, header, rows, payload):
    if args.json:
        json.dump(payload, sys.stdout, indent=2, sort_keys=True)
        sys.stdout.write("\n")
    else:
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _load_network(path):
    from .config import load_json, parse_network

    return parse_network(load_json(path))


def cmd_analyze(args):
    from .netanalysis import analyze

    model, options = _load_network(args.config)
    report = analyze(model, **options)
    rows = [
        [f.flow, f.cls, _num(f.e2e), _num(f.deadline), _num(f.margin), str(f.schedulable).lower(), f.error or ""]
        for f in report.flows.values()
    ]
    payload = report.to_dict()
    payload["class_delays"] = [
        {"node": n, "class": c, "delay_s": d, "branch": report.ruling.get((n, c))}
        for (n, c), d in sorted(report.class_delays.items())
    ]
    _emit(args, ["flow", "class", "e2e_s", "deadline_s", "margin_s", "schedulable", "error"], rows, payload)
    rates_ok = all(p.rate_ok for p in report.ports.values())
    if not report.feasible or not rates_ok:
        return EXIT_INFEASIBLE
    if args.strict and not report.schedulable:
        return EXIT_INFEASIBLE
    return EXIT_OK


def _write_plotdata(directory, spec, rows):
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    for cls in spec.classes:
        mine = [r for r in rows if r.cls == cls]
        for column in ("nc_delay_s", "awc_delay_s"):
            points = [(r.value, getattr(r, column)) for r in mine if getattr(r, column) is not None]
            if not points:
                continue
            name = f"{spec.name}_{cls}_{column.split('_')[0]}.dat"
            lines = [f"# {spec.param} {column}"] + [f"{v!r} {d!r}" for v, d in points]
            (out / name).write_text("\n".join(lines) + "\n")


def cmd_sweep(args):
    from .scenarios import CSV_COLUMNS, load_scenario, run_scenario

    spec = load_scenario(args.config)
    rows = run_scenario(spec, workers=args.threads)
    payload = {"scenario": spec.name, "rows": [r.to_dict() for r in rows]}
    _emit(args, CSV_COLUMNS, [r.csv_fields() for r in rows], payload)
    if args.plotdata:
        _write_plotdata(args.plotdata, spec, rows)
    if args.strict and not all(r.schedulable and r.error is None for r in rows):
        return EXIT_INFEASIBLE
    return EXIT_OK


def cmd_awc(args):
    from .awc import CASES, SIDES, awc_delay
    from .config import load_json, parse_awc

    cfg = parse_awc(load_json(args.config))
    options = {"rel_tolerance": args.tolerance} if args.tolerance is not None else {}
    rows, payload = [], []
    for side in SIDES:
        for case in CASES:
            r = awc_delay(cfg, side, case, **options)
            rows.append([side, case, _num(r.delay), r.iterations, _num(r.blocking)])
            payload.append({"side": side, "case": case, "delay_s": r.delay, "iterations": r.iterations,
                            "blocking_s": r.blocking, "history_s": r.history})
    _emit(args, ["side", "case", "delay_s", "iterations", "blocking_s"], rows, payload)
    return EXIT_OK


def _sim_arrivals(settings, port):
    from .blssim import demotion_gap_pair, random_arrivals, worst_min_service_arrivals

    model, node = settings["model"], settings["port"]
    flows = [f for f in model.flows if f.path[0] == node]
    shaped = [c.name for c in port.classes if c.shaped]
    if settings["pattern"] == "random":
        return random_arrivals(flows, settings["frames"], seed=settings["seed"])
    if not shaped:
        raise ConfigError(f"simulation.pattern: {settings['pattern']} needs a shaped class at {node}")
    sizes = {c.name: int(max((f.mfs for f in flows if f.cls == c.name), default=12000)) for c in port.classes}
    if settings["pattern"] == "worst_min_service":
        return worst_min_service_arrivals(port, shaped[0], sizes, settings["duration_ns"])
    from .mux import partition

    mc = sorted(partition(port.classes, shaped[0]).mc)
    if not mc:
        raise ConfigError("simulation.pattern: demotion_gap needs a class between the shaper's two priorities")
    return demotion_gap_pair(port, shaped[0], mc[0], sizes[shaped[0]], sizes[mc[0]]).gapped


def cmd_simulate(args):
    from .blssim import SimPort, simulate, validate_against_bounds
    from .config import load_json, parse_simulation
    from .minplus import hdev
    from .netanalysis import ingress_mux

    path = Path(args.config)
    settings = parse_simulation(load_json(path), path.parent)
    model, node = settings["model"], settings["port"]
    port = SimPort(model.nodes[node].link_rate, model.class_table(node))
    trace = simulate(port, _sim_arrivals(settings, port))
    if args.trace:
        with open(args.trace, "w", newline="") as fh:
            trace.to_csv(fh)
    mux = ingress_mux(model, node)
    slack = 1.0 + (args.tolerance or 0.0)
    rows, payload, failed = [], [], False
    for c in port.classes:
        if not trace.of(c.name) or c.name not in mux.loads or mux.loads[c.name].arrival.is_zero():
            continue
        beta = mux.curve(c.name).curve
        gamma = mux.bls_curves(c.name)[1] if c.shaped else None
        bound = None
        if settings["pattern"] == "random":
            bound = hdev(mux.loads[c.name].arrival, beta) * slack
        v = validate_against_bounds(trace, c.name, beta=beta if settings["pattern"] == "random" else None,
                                    gamma=gamma, nc_delay=bound, raise_on_violation=False)
        failed |= not v.ok
        rows.append([c.name, v.frames, v.periods, _num(v.max_delay_s), _num(bound), len(v.violations)])
        payload.append({"class": c.name, "frames": v.frames, "periods": v.periods, "max_delay_s": v.max_delay_s,
                        "bound_s": bound, "violations": v.violations})
    _emit(args, ["class", "frames", "backlogged_periods", "max_delay_s", "bound_s", "violations"], rows, payload)
    return EXIT_INFEASIBLE if failed else EXIT_OK


def cmd_compare(args):
    from .netanalysis import analyze, without_shaping

    model, options = _load_network(args.config)
    shaped = analyze(model, **options)
    plain = analyze(without_shaping(model), **options)
    rows, payload = [], []
    for cls in dict.fromkeys(f.cls for f in model.flows):
        def worst(report):
            vals = [f.e2e for f in report.flows.values() if f.cls == cls]
            return None if any(v is None for v in vals) else max(vals)

        b, s = worst(shaped), worst(plain)
        ratio = s / b if b and s is not None else None
        rows.append([cls, _num(b), _num(s), _num(ratio)])
        payload.append({"class": cls, "bls_delay_s": b, "sp_delay_s": s, "sp_over_bls": ratio})
    _emit(args, ["class", "bls_delay_s", "sp_delay_s", "sp_over_bls"], rows, payload)
    if args.strict and not (shaped.schedulable and shaped.feasible):
        return EXIT_INFEASIBLE
    return EXIT_OK


COMMANDS = {
    "analyze": (cmd_analyze, "delay bounds of every flow in a network"),
    "sweep": (cmd_sweep, "run a parameter sweep scenario"),
    "awc": (cmd_awc, "achievable worst-case delays of a three-class port"),
    "simulate": (cmd_simulate, "simulate one port and check the computed bounds"),
    "compare": (cmd_compare, "bounds with shapers against plain static priority"),
}


def build_parser():
    parser = argparse.ArgumentParser(prog="blsnc", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", help="JSON instead of CSV on stdout")
    common.add_argument("--strict", action="store_true", help="exit 1 on any deadline or bound failure")
    common.add_argument("--threads", type=int, default=1, help="worker processes for sweeps")
    common.add_argument("--tolerance", type=float, default=None,
                        help="relative tolerance (AWC convergence, simulated delay checks)")
    common.add_argument("--plotdata", metavar="DIR", help="write two-column data files for plotting")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, text) in COMMANDS.items():
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("config", help="JSON configuration file")
        if name == "simulate":
            p.add_argument("--trace", metavar="CSV", help="write the event trace")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.threads < 1:
        print("blsnc: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return COMMANDS[args.command][0](args)
    except ConfigError as exc:
        print(f"blsnc: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BlsncError as exc:
        print(f"blsnc: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except BrokenPipeError:
        # reader went away (``| head``); silence the flush at exit
        sys.stdout = open(os.devnull, "w")
        return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
