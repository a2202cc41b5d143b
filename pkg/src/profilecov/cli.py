"""Command-line front end.

Exit codes: 0 success, 2 invalid flags or spec, 3 failed ``--check``,
4 I/O failure. Diagnostics go to stderr; stdout carries results only.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from pathlib import Path

from . import analytics as an
from . import experiments as ex
from . import montecarlo as mc
from .analytics import ScenarioParams
from .model import per_km2, to_per_km2

SEED_ENV = "PROFILECOV_SEED"

EXIT_OK, EXIT_USAGE, EXIT_CHECK, EXIT_IO = 0, 2, 3, 4


class UsageError(Exception):
    pass


def _number(kind, check, what):
    def parse(text):
        try:
            value = kind(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"invalid {kind.__name__} value: {text!r}")
        if not check(value):
            raise argparse.ArgumentTypeError(f"{text} is not {what}")
        return value
    return parse


nonneg = _number(float, lambda v: v >= 0 and math.isfinite(v), "a finite number >= 0")
positive = _number(float, lambda v: v > 0 and math.isfinite(v), "a finite number > 0")
count = _number(int, lambda v: v >= 0, "an integer >= 0")
pos_count = _number(int, lambda v: v >= 1, "an integer >= 1")


def _scenario_flags(p: argparse.ArgumentParser, with_m=True):
    dens = p.add_mutually_exclusive_group()
    dens.add_argument("--lambda", dest="density", type=nonneg, help="sensor density [1/m^2] (default 1e-5)")
    dens.add_argument("--density-km2", type=nonneg, help="sensor density [1/km^2]")
    p.add_argument("--rs", type=nonneg, default=150.0, help="native sensing radius [m] (default 150)")
    p.add_argument("--tau", type=nonneg, default=5.0, help="allowed tolerance (default 5)")
    p.add_argument("-A", "--amplitude", type=positive, default=1.0, help="tolerance amplitude A (default 1)")
    prof = p.add_mutually_exclusive_group()
    prof.add_argument("--w", type=positive, default=None, help="spatial variation rate [1/m] (default 0.01)")
    prof.add_argument("--no-profile", action="store_true", help="ignore profile information (w = infinity)")
    p.add_argument("--r", type=nonneg, default=100.0, help="radius of the region of interest [m] (default 100)")
    if with_m:
        p.add_argument("--m", type=count, default=None, help="sensor count for the m-metrics")


def _sim_flags(p: argparse.ArgumentParser):
    default_seed = os.environ.get(SEED_ENV, "0")
    p.add_argument("--seed", type=count, default=default_seed, help=f"master seed (env {SEED_ENV}, default 0)")
    p.add_argument("--replications", type=pos_count, default=200)
    p.add_argument("--test-points", type=pos_count, default=10_000)
    p.add_argument("--window", type=positive, default=5000.0, help="observation half-width L [m]")
    p.add_argument("--padding", type=nonneg, default=None, help="sampling padding [m] (default R_S(tau)+r+1)")
    p.add_argument("--workers", type=pos_count, default=1)


def _output_flags(p: argparse.ArgumentParser):
    p.add_argument("--format", choices=("text", "csv", "json"), default="text")
    p.add_argument("--precision", type=pos_count, default=10, help="significant digits in text output")
    p.add_argument("--output", default=None, help="write to this file instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="profilecov", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="closed-form coverage metrics")
    _scenario_flags(p)
    _output_flags(p)

    p = sub.add_parser("simulate", help="Monte Carlo estimates next to the closed forms")
    _scenario_flags(p)
    _sim_flags(p)
    _output_flags(p)
    p.add_argument("--check", action="store_true", help="exit 3 if any |z| exceeds --z-threshold")
    p.add_argument("--z-threshold", type=positive, default=4.0)

    p = sub.add_parser("figure", help="write the tables behind one of the four figures")
    p.add_argument("n", type=int, choices=sorted(ex.FIGURES))
    p.add_argument("--output", default="figures", help="output directory (default ./figures)")
    p.add_argument("--m", type=pos_count, action="append", help="m values (repeatable)")
    p.add_argument("--r", type=nonneg, action="append", help="region radii [m] (figure 3, repeatable)")
    p.add_argument("--rs", type=nonneg, default=None)
    p.add_argument("--tau", type=nonneg, default=None)
    p.add_argument("-A", "--amplitude", type=positive, default=None)
    p.add_argument("--lambda", dest="density", type=positive, default=None, help="density for figure 4 [1/m^2]")

    p = sub.add_parser("sweep", help="run a sweep described by a JSON spec file")
    p.add_argument("spec")
    p.add_argument("--output", default=None, help="CSV path (overrides the spec's output)")

    p = sub.add_parser("validate", help="closed forms vs. simulation on the 12-scenario grid")
    _sim_flags(p)
    p.add_argument("--z-threshold", type=positive, default=4.0)
    p.add_argument("--output", default=None, help="write the report CSV here")
    return parser


def resolve_scenario(args) -> tuple[ScenarioParams, dict]:
    if args.density_km2 is not None:
        density = per_km2(args.density_km2)
    elif args.density is not None:
        density = args.density
    else:
        density = 1e-5
    rate = None if args.no_profile else (0.01 if args.w is None else args.w)
    try:
        params = ScenarioParams.build(density, args.rs, args.tau, args.amplitude, rate, args.r)
    except ValueError as err:
        raise UsageError(str(err)) from None
    config = {"lambda": density, "lambda_km2": to_per_km2(density), "rs": args.rs, "tau": args.tau,
              "A": args.amplitude, "w": rate, "no_profile": args.no_profile, "r": args.r,
              "m": getattr(args, "m", None)}
    return params, config


def analyze_metrics(params: ScenarioParams, m: int | None) -> dict:
    try:
        eta = an.cif(params)
    except an.DegenerateDenominatorError:
        eta = None
    out = {
        "effective_radius": params.radius.value,
        "nu_tau": an.saf(params),
        "vacancy_tau": an.vacancy(params),
        "eta_tau": eta,
        "mu_tau": an.intersection_prob(params),
        "beta_tau": an.cover_prob(params),
    }
    if m is not None:
        out["nu_m_tau"] = an.at_most_m_saf(m, params) if m >= 1 else 0.0
        out["mu_m_tau"] = an.m_intersection_prob(m, params)
        out["beta_m_tau"] = an.m_cover_prob(m, params)
        if m >= 1 and params.radius.value + params.region.radius > 0:
            lam_opt, mu_max = an.optimal_density(m, params.net, params.profile, params.tau, params.region)
            out["lambda_opt"] = lam_opt
            out["lambda_opt_km2"] = to_per_km2(lam_opt)
            out["mu_max"] = mu_max
    return out


def _text_value(v, precision):
    if v is None:
        return "undefined"
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return format(v, f".{precision}g")
    return str(v)


def render(rows: list[dict], fmt: str, precision: int, config: dict) -> str:
    if fmt == "json":
        return json.dumps({"config": config, "results": rows}, indent=2, sort_keys=True) + "\n"
    columns = list(rows[0])
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\r\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([ex._fmt(row[c]) for c in columns])
        return buf.getvalue()
    cells = [[_text_value(row[c], precision) for c in columns] for row in rows]
    widths = [max(len(c), *(len(r[i]) for r in cells)) for i, c in enumerate(columns)]
    lines = ["  ".join(c.ljust(w) for c, w in zip(columns, widths)).rstrip()]
    lines += ["  ".join(v.ljust(w) for v, w in zip(r, widths)).rstrip() for r in cells]
    return "\n".join(lines) + "\n"


def emit(text: str, output: str | None):
    if output is None:
        sys.stdout.write(text)
        return
    Path(output).write_text(text, encoding="utf-8", newline="")
    print(f"wrote {output}", file=sys.stderr)


def cmd_analyze(args) -> int:
    params, config = resolve_scenario(args)
    metrics = analyze_metrics(params, args.m)
    rows = [{"metric": k, "value": v} for k, v in metrics.items()]
    emit(render(rows, args.format, args.precision, config), args.output)
    return EXIT_OK


def sim_config(args) -> mc.SimulationConfig:
    return mc.SimulationConfig(replications=args.replications, test_points=args.test_points,
                               half_width=args.window, padding=args.padding, seed=int(args.seed),
                               workers=args.workers)


def simulate_rows(params: ScenarioParams, m: int | None, sim: mc.SimulationConfig) -> list[dict]:
    records = mc.simulate(params, sim)
    pairs = [
        ("nu_tau", an.saf(params), mc.covered_fraction(records)),
        ("vacancy_tau", an.vacancy(params), mc.exact_k_fraction(records, 0)),
        ("mu_tau", an.intersection_prob(params), mc.event_rate(records, "intersect_count")),
        ("beta_tau", an.cover_prob(params), mc.event_rate(records, "cover_count")),
    ]
    if m is not None:
        if m >= 1:
            pairs.append(("nu_m_tau", an.at_most_m_saf(m, params), mc.at_most_m_fraction(records, m)))
        pairs += [
            ("exact_k_tau", an.exact_k_coverage_prob(m, params), mc.exact_k_fraction(records, m)),
            ("mu_m_tau", an.m_intersection_prob(m, params), mc.event_rate(records, "intersect_count", m)),
            ("beta_m_tau", an.m_cover_prob(m, params), mc.event_rate(records, "cover_count", m)),
        ]
    return [{"metric": name, "closed_form": exact, "estimate": est.mean, "se": est.standard_error,
             "z": est.z_score(exact), "replications": est.replications}
            for name, exact, est in pairs]


def cmd_simulate(args) -> int:
    params, config = resolve_scenario(args)
    try:
        sim = sim_config(args)
        sim.window(params)
    except ValueError as err:
        raise UsageError(str(err)) from None
    rows = simulate_rows(params, args.m, sim)
    config.update(seed=sim.seed, replications=sim.replications, test_points=sim.grid_side ** 2,
                  window=sim.half_width, padding=sim.window(params).padding)
    emit(render(rows, args.format, args.precision, config), args.output)
    if args.check and any(r["z"] is not None and abs(r["z"]) > args.z_threshold for r in rows):
        print(f"check failed: |z| > {args.z_threshold}", file=sys.stderr)
        return EXIT_CHECK
    return EXIT_OK


def figure_kwargs(args) -> dict:
    kw = {}
    if args.m:
        kw["ms"] = tuple(args.m)
    if args.r:
        if args.n != 3:
            raise UsageError("--r applies to figure 3 only")
        kw["radii"] = tuple(args.r)
    if args.rs is not None:
        kw["sensing_radius"] = args.rs
    if args.amplitude is not None:
        kw["amplitude"] = args.amplitude
    if args.tau is not None:
        if args.n == 4:
            kw["taus"] = (0.0, args.tau)
        else:
            kw["tau"] = args.tau
    if args.density is not None:
        if args.n != 4:
            raise UsageError("--lambda applies to figure 4 only")
        kw["density"] = args.density
    if args.n == 1 and "ms" in kw:
        raise UsageError("--m does not apply to figure 1")
    return kw


def cmd_figure(args) -> int:
    try:
        result = ex.FIGURES[args.n](**figure_kwargs(args))
    except ValueError as err:
        raise UsageError(str(err)) from None
    paths = result.write(args.output)
    print(f"{result.name}: {result.row_count} rows -> {', '.join(str(p) for p in paths)}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    try:
        spec = ex.SweepSpec.load(args.spec)
        result = ex.run_sweep(spec)
    except (KeyError, TypeError, ValueError) as err:
        raise UsageError(f"bad sweep spec: {err}") from None
    out = Path(args.output or spec.output or "sweep.csv")
    result.table.write_csv(out)
    out.with_suffix(".json").write_text(result.summary_json(), encoding="utf-8")
    print(f"sweep: {result.row_count} rows -> {out}")
    return EXIT_OK


def cmd_validate(args) -> int:
    try:
        sim = sim_config(args)
    except ValueError as err:
        raise UsageError(str(err)) from None
    report = ex.validation_grid(sim, args.z_threshold)
    table = report.to_table()
    if args.output:
        table.write_csv(args.output)
    for c in report.cells:
        z = "undefined" if c.z is None else f"{c.z:+.2f}"
        print(f"{'PASS' if c.passed else 'FAIL'} {c.metric:<7} lambda={c.density:g} R_S={c.sensing_radius:g} "
              f"tau={c.tau:g} closed={c.closed_form:.6g} est={c.estimate:.6g} z={z}")
    n = len(report.cells)
    print(f"|z|<=4: {report.count_within(4)}/{n}  |z|<=3: {report.count_within(3)}/{n}")
    return EXIT_OK


COMMANDS = {"analyze": cmd_analyze, "simulate": cmd_simulate, "figure": cmd_figure,
            "sweep": cmd_sweep, "validate": cmd_validate}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except UsageError as err:
        print(f"{parser.prog}: error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as err:
        print(f"{parser.prog}: I/O error: {err}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
