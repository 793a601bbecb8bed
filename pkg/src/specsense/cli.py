"""Command line entry point: ``specsense scenario gen | run | plot``.

Exit codes: 0 success, 1 invalid configuration or arguments, 2 runtime failure.
"""
from __future__ import annotations

import argparse
import logging
import sys

from . import harness
from .consensus import build_graph
from .scenario import check_identifiability, generate_scenario, save_scenario

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


class ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_CONFIG)


def _grid(text):
    return tuple(float(v) for v in text.replace(",", " ").split())


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="specsense", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sc = sub.add_parser("scenario", help="scenario files")
    sc_sub = sc.add_subparsers(dest="action", required=True, parser_class=_Parser)
    gen = sc_sub.add_parser("gen", help="generate a random scenario")
    gen.add_argument("--seed", type=int, default=1)
    gen.add_argument("--primaries", type=int, default=4)
    gen.add_argument("--secondaries", type=int, default=20)
    gen.add_argument("--side", type=float, default=200.0)
    gen.add_argument("--noise", type=float, default=1.0, help="receiver noise std")
    gen.add_argument("--radius", type=float, default=None,
                     help="also store a communication graph built with this radius")
    gen.add_argument("--out", required=True)

    run = sub.add_parser("run", help="run a StNrR sweep")
    run.add_argument("--config", help="[experiment] key-value file")
    run.add_argument("--trials", type=int, dest="trials_per_point")
    run.add_argument("--scheme", choices=sorted(harness.SCHEMES))
    run.add_argument("--pfa", type=float, dest="p_fa")
    run.add_argument("--consensus", choices=["ideal", "iterative"])
    run.add_argument("--seed", type=int, dest="master_seed")
    run.add_argument("--scenario", dest="scenario_file", help="scenario file instead of a generated one")
    run.add_argument("--scenario-seed", type=int, dest="scenario_seed")
    run.add_argument("--grid", type=_grid, dest="stnr_grid", help='StNrR values in dB, e.g. "0 10 20"')
    run.add_argument("--beta", choices=list(harness.BETA_CONVENTIONS), dest="beta_convention")
    run.add_argument("--workers", type=int)
    run.add_argument("--out", default="results.csv")
    run.add_argument("--svg", help="also draw the curves to this file")

    plot = sub.add_parser("plot", help="draw curves from a results CSV")
    plot.add_argument("--in", dest="inp", required=True)
    plot.add_argument("--out", required=True)
    return p


def _scenario_gen(args) -> int:
    try:
        sc = generate_scenario(args.seed, args.primaries, args.secondaries, args.side, args.noise)
    except ValueError as e:
        raise ConfigError(str(e)) from e
    if args.radius is not None:
        g = build_graph(sc.secondary_positions, args.radius)
        sc.graph_radius, sc.graph_edges = g.radius, g.edges
    for pair in check_identifiability(sc.attenuation):
        logging.warning("primaries %d and %d are not distinguishable", *pair)
    save_scenario(sc, args.out)
    print(f"wrote {args.out}: P={sc.n_primaries} S={sc.n_secondaries}")
    return EXIT_OK


def _print_point(stnr, points):
    for p in points:
        print(f"{p.scheme:>12s} {stnr:6.1f} dB  p_detect={p.p_detect:.3f}  p_ident={p.p_ident:.3f}  "
              f"false_alarm={p.false_alarm:.3f}")


def _run(args) -> int:
    keys = ("trials_per_point", "scheme", "p_fa", "consensus", "master_seed", "scenario_file",
            "scenario_seed", "stnr_grid", "beta_convention", "workers")
    overrides = {k: getattr(args, k) for k in keys}
    try:
        if args.config:
            config = harness.load_config(args.config, **overrides)
        else:
            config = harness.ExperimentConfig(**{k: v for k, v in overrides.items() if v is not None})
    except (ValueError, TypeError, KeyError) as e:
        raise ConfigError(str(e)) from e

    result = harness.run_sweep(config, args.out, progress=_print_point)
    for scheme in config.schemes:
        try:
            x = harness.crossing_point(result.curve(scheme), 0.6)
            print(f"{scheme}: p_ident crosses 0.6 at {x:.2f} dB")
        except ValueError:
            print(f"{scheme}: p_ident never crosses 0.6 on this grid")
    if args.svg:
        from .plotting import plot_sweep
        plot_sweep(result, args.svg)
    print(f"wrote {args.out}")
    return EXIT_OK


def _plot(args) -> int:
    from .plotting import plot_sweep
    try:
        result = harness.read_csv(args.inp)
    except (OSError, KeyError, ValueError) as e:
        raise ConfigError(f"cannot read {args.inp}: {e}") from e
    plot_sweep(result, args.out)
    print(f"wrote {args.out}")
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    handler = {"scenario": _scenario_gen, "run": _run, "plot": _plot}[args.command]
    try:
        return handler(args)
    except ConfigError as e:
        print(f"specsense: invalid configuration: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except KeyboardInterrupt:
        print("specsense: interrupted; completed grid points were kept", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as e:  # noqa: BLE001
        logging.debug("runtime failure", exc_info=True)
        print(f"specsense: runtime failure: {e}", file=sys.stderr)
        return EXIT_RUNTIME
