"""Parameter sweeps, figure tables and the analytic-vs-simulation validation grid.

Tables are written as CSV (header row, fixed column order, floats in ``%.12e``)
next to a JSON summary of derived quantities. Both are byte-stable for a fixed
input, which the tests rely on.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import analytics as an
from . import montecarlo as mc
from .analytics import ScenarioParams
from .model import NetworkModel, RegionOfInterest, ToleranceProfile, to_per_km2

FLOAT_FMT = ".12e"
POINTS_PER_DECADE = 60
SWEEP_VARIABLES = ("lambda", "r", "tau", "w", "m")

# Values read off the original plots, kept beside the formula-exact numbers.
PLOT_READ = {
    "cif_gain_w0.01": "up to 76% gain for w=0.01",
    "density_reduction_w0.01": "82/km^2 -> 8/km^2 for target SAF 0.8",
    "coverable_radius": "200-300 m coverable with tolerance",
}


def log_grid(lo: float, hi: float, per_decade: int = POINTS_PER_DECADE) -> np.ndarray:
    decades = math.log10(hi) - math.log10(lo)
    return np.logspace(math.log10(lo), math.log10(hi), int(round(decades * per_decade)) + 1)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), FLOAT_FMT)
    return str(value)


@dataclass
class Table:
    columns: tuple[str, ...]
    rows: list[tuple] = field(default_factory=list)

    def add(self, *values):
        if len(values) != len(self.columns):
            raise ValueError(f"expected {len(self.columns)} values, got {len(values)}")
        self.rows.append(values)

    def column(self, name: str) -> list:
        i = self.columns.index(name)
        return [row[i] for row in self.rows]

    def where(self, **conds) -> Table:
        idx = {self.columns.index(k): v for k, v in conds.items()}
        out = Table(self.columns)
        out.rows = [row for row in self.rows if all(row[i] == v for i, v in idx.items())]
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\r\n")
        writer.writerow(self.columns)
        for row in self.rows:
            writer.writerow([_fmt(v) for v in row])
        return buf.getvalue()

    def write_csv(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_csv(), encoding="utf-8", newline="")
        return path


def summary_entry(metric: str, parameters: dict, value, note: str = "") -> dict:
    return {"metric": metric, "parameters": parameters, "value": value, "note": note}


@dataclass
class SweepResult:
    name: str
    tables: dict[str, Table]
    summary: list[dict] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    @property
    def table(self) -> Table:
        return next(iter(self.tables.values()))

    @property
    def row_count(self) -> int:
        return sum(len(t.rows) for t in self.tables.values())

    def summary_value(self, metric: str, **params):
        for entry in self.summary:
            if entry["metric"] == metric and all(entry["parameters"].get(k) == v for k, v in params.items()):
                return entry["value"]
        raise KeyError(metric)

    def summary_json(self) -> str:
        doc = {"name": self.name, "metadata": self.metadata, "summary": self.summary}
        return json.dumps(doc, indent=2, sort_keys=True, default=_json_default) + "\n"

    def write(self, outdir) -> list[Path]:
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        paths = [table.write_csv(outdir / f"{key}.csv") for key, table in self.tables.items()]
        summary = outdir / f"{self.name}_summary.json"
        summary.write_text(self.summary_json(), encoding="utf-8")
        return paths + [summary]


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"not JSON serialisable: {type(obj).__name__}")


def _profile(amplitude: float, rate: float | None) -> ToleranceProfile:
    if rate is None or math.isinf(rate):
        return ToleranceProfile.none(amplitude)
    return ToleranceProfile.exponential(amplitude, rate)


def _grid_step_ratio(grid) -> float:
    grid = np.asarray(grid, dtype=float)
    return float(np.max(grid[1:] / grid[:-1]))


# --------------------------------------------------------------------------
# Figure 1: tolerance-aware SAF and improvement factor against density.

def figure1_sweep(densities=None, sensing_radius: float = 80.0, amplitude: float = 1.0,
                  tau: float = 10.0, rates=(0.01, 0.02, 0.05, math.inf),
                  target_saf: float = 0.8, target_cif: float = 1.76) -> SweepResult:
    densities = log_grid(1e-7, 1e-3) if densities is None else np.asarray(densities, dtype=float)
    table = Table(("lambda", "w", "nu_0", "nu_tau", "eta"))
    summary = []
    net = NetworkModel(float(densities[0]), sensing_radius)
    for rate in rates:
        profile = _profile(amplitude, rate)
        base = ScenarioParams(net, profile, tau)
        for lam in densities:
            p = base.with_density(float(lam))
            table.add(float(lam), float(rate), an.saf(p.baseline()), an.saf(p), an.cif(p))

        params = {"w": None if math.isinf(rate) else float(rate), "tau": tau, "A": amplitude,
                  "R_S": sensing_radius}
        try:
            lam_star = an.cif_density(target_cif, base)
        except ValueError:
            lam_star = None
        summary.append(summary_entry(
            "cif_target_density", {**params, "target": target_cif}, lam_star,
            "density [1/m^2] where the improvement factor falls to the target; "
            "None if the target is unattainable"
            + (f"; plot-read: {PLOT_READ['cif_gain_w0.01']}" if rate == 0.01 else "")))
        req = an.required_density(target_saf, net, profile, tau)
        summary.append(summary_entry(
            "required_density", {**params, "target_saf": target_saf}, req,
            f"{to_per_km2(req):.4f} per km^2 (formula-exact)"
            + (f"; plot-read: {PLOT_READ['density_reduction_w0.01']}" if rate == 0.01 else "")))
    req0 = an.required_density(target_saf, net, ToleranceProfile.none(amplitude), 0.0)
    summary.append(summary_entry(
        "required_density", {"w": None, "tau": 0.0, "A": amplitude, "R_S": sensing_radius,
                             "target_saf": target_saf},
        req0, f"{to_per_km2(req0):.4f} per km^2 without profile information"))
    meta = {"R_S": sensing_radius, "A": amplitude, "tau": tau, "units": "lambda in sensors/m^2"}
    return SweepResult("figure1", {"figure1": table}, summary, meta)


# --------------------------------------------------------------------------
# Figure 2: at-most-m SAF and vacancy, with and without tolerance.

def figure2_sweep(densities=None, sensing_radius: float = 150.0, amplitude: float = 1.0,
                  tau: float = 5.0, rate: float = 0.01, ms=(1, 2, 3, 5)) -> SweepResult:
    densities = log_grid(1e-7, 1e-3) if densities is None else np.asarray(densities, dtype=float)
    table = Table(("lambda", "m", "nu_m_tau", "nu_m_0", "vacancy_tau", "vacancy_0"))
    base = ScenarioParams(NetworkModel(float(densities[0]), sensing_radius), _profile(amplitude, rate), tau)
    summary = []
    for m in ms:
        best = {"tau": (-1.0, None), "0": (-1.0, None)}
        for lam in densities:
            p = base.with_density(float(lam))
            nu_t, nu_0 = an.at_most_m_saf(m, p), an.at_most_m_saf(m, p.baseline())
            table.add(float(lam), m, nu_t, nu_0, an.vacancy(p), an.vacancy(p.baseline()))
            if nu_t > best["tau"][0]:
                best["tau"] = (nu_t, float(lam))
            if nu_0 > best["0"][0]:
                best["0"] = (nu_0, float(lam))
        for key, (value, lam) in best.items():
            summary.append(summary_entry(
                "at_most_m_saf_argmax", {"m": m, "with_tolerance": key == "tau"}, lam,
                f"grid density maximising nu_m; maximum {value:.10g}"))
    meta = {"R_S": sensing_radius, "A": amplitude, "tau": tau, "w": rate,
            "units": "lambda in sensors/m^2"}
    return SweepResult("figure2", {"figure2": table}, summary, meta)


# --------------------------------------------------------------------------
# Figure 3: m-intersection probability against density for several region sizes.

def figure3_sweep(densities=None, sensing_radius: float = 150.0, amplitude: float = 1.0,
                  tau: float = 5.0, rate: float = 0.01, ms=(1, 2, 5),
                  radii=(100.0, 300.0)) -> SweepResult:
    densities = log_grid(1e-8, 1e-3) if densities is None else np.asarray(densities, dtype=float)
    profile = _profile(amplitude, rate)
    net = NetworkModel(float(densities[0]), sensing_radius)
    step = _grid_step_ratio(densities)
    tables, summary = {}, []
    for r in radii:
        table = Table(("lambda", "m", "r", "mu_m_tau"))
        base = ScenarioParams(net, profile, tau, RegionOfInterest(float(r)))
        for m in ms:
            values = [an.m_intersection_prob(m, base.with_density(float(lam))) for lam in densities]
            for lam, v in zip(densities, values):
                table.add(float(lam), m, float(r), v)
            i = int(np.argmax(values))
            lam_opt, mu_max = an.optimal_density(m, net, profile, tau, RegionOfInterest(float(r)))
            within = 1 / step <= densities[i] / lam_opt <= step
            params = {"m": m, "r": float(r), "tau": tau}
            summary.append(summary_entry("mu_m_grid_max", params, values[i],
                                         f"closed-form maximum {mu_max:.12g}"))
            summary.append(summary_entry("mu_m_grid_argmax", params, float(densities[i]),
                                         f"optimal density {lam_opt:.12g}; within one grid step: {within}"))
            summary.append(summary_entry("optimal_density", params, lam_opt, "m / (pi (R_S(tau) + r)^2)"))
        tables[f"figure3_r{r:g}"] = table
    meta = {"R_S": sensing_radius, "A": amplitude, "tau": tau, "w": rate,
            "assumption": "tau and A are not given for this figure; defaults tau=5, A=1 reused from figure 2",
            "units": "lambda in sensors/m^2"}
    return SweepResult("figure3", tables, summary, meta)


# --------------------------------------------------------------------------
# Figure 4: m-cover probability against region radius.

def figure4_sweep(radii=None, density: float = 1e-4, sensing_radius: float = 150.0,
                  amplitude: float = 1.0, rate: float = 0.01, taus=(0.0, 5.0),
                  ms=(1, 2, 3), threshold: float = 0.01) -> SweepResult:
    radii = np.arange(0.0, 401.0, 1.0) if radii is None else np.asarray(radii, dtype=float)
    profile = _profile(amplitude, rate)
    net = NetworkModel(density, sensing_radius)
    table = Table(("r", "m", "tau", "beta_m_tau"))
    summary = []
    for tau in taus:
        base = ScenarioParams(net, profile, float(tau))
        for m in ms:
            for r in radii:
                table.add(float(r), m, float(tau), an.m_cover_prob(m, base.with_region(float(r))))
        betas = [an.cover_prob(base.with_region(float(r))) for r in radii]
        above = [float(r) for r, b in zip(radii, betas) if b > threshold]
        positive = [float(r) for r, b in zip(radii, betas) if b > 0]
        params = {"tau": float(tau), "lambda": density}
        summary.append(summary_entry("largest_r_cover_above_threshold", {**params, "threshold": threshold},
                                     max(above) if above else None))
        summary.append(summary_entry(
            "largest_coverable_r", params, max(positive) if positive else None,
            f"on the grid; exact bound R_S(tau) = {base.radius.value:.10g}"
            + (f"; plot-read: {PLOT_READ['coverable_radius']}" if tau > 0 else "")))
    meta = {"R_S": sensing_radius, "A": amplitude, "w": rate, "lambda": density,
            "assumption": "tau and A are not given for this figure; defaults tau=5, A=1 reused from figure 2"}
    return SweepResult("figure4", {"figure4": table}, summary, meta)


FIGURES = {1: figure1_sweep, 2: figure2_sweep, 3: figure3_sweep, 4: figure4_sweep}


# --------------------------------------------------------------------------
# Generic sweeps driven by a spec file.

@dataclass
class SweepSpec:
    variable: str
    grid: list
    fixed: dict
    monte_carlo: bool = False
    simulation: dict = field(default_factory=dict)
    output: str | None = None

    FIXED_DEFAULTS = {"lambda": 1e-5, "rs": 150.0, "tau": 5.0, "A": 1.0, "w": 0.01, "r": 100.0, "m": None}

    def __post_init__(self):
        if self.variable not in SWEEP_VARIABLES:
            raise ValueError(f"unknown sweep variable {self.variable!r}; choose from {SWEEP_VARIABLES}")
        if not self.grid:
            raise ValueError("sweep grid is empty")
        values = [math.inf if v is None else float(v) for v in self.grid]
        if not (all(b > a for a, b in zip(values, values[1:])) or all(b < a for a, b in zip(values, values[1:]))):
            raise ValueError("sweep grid must be strictly monotone")
        if self.variable in self.fixed:
            raise ValueError(f"swept variable {self.variable!r} also appears in the fixed parameters")
        unknown = set(self.fixed) - set(self.FIXED_DEFAULTS)
        if unknown:
            raise ValueError(f"unknown fixed parameters: {sorted(unknown)}")

    @classmethod
    def from_dict(cls, doc: dict) -> SweepSpec:
        grid = doc.get("grid")
        if isinstance(grid, dict):
            start, stop, num = float(grid["start"]), float(grid["stop"]), int(grid["num"])
            if grid.get("scale", "linear") == "log":
                grid = np.logspace(math.log10(start), math.log10(stop), num).tolist()
            else:
                grid = np.linspace(start, stop, num).tolist()
        if not isinstance(grid, list):
            raise ValueError("grid must be a list or a {start, stop, num, scale} range")
        return cls(doc["variable"], grid, dict(doc.get("fixed", {})), bool(doc.get("monte_carlo", False)),
                   dict(doc.get("simulation", {})), doc.get("output"))

    @classmethod
    def load(cls, path) -> SweepSpec:
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    def resolved(self) -> dict:
        return {**self.FIXED_DEFAULTS, **self.fixed}

    def params_at(self, value) -> tuple[ScenarioParams, int | None]:
        vals = {**self.resolved(), self.variable: value}
        m = vals["m"]
        params = ScenarioParams.build(float(vals["lambda"]), float(vals["rs"]), float(vals["tau"]),
                                      float(vals["A"]), None if vals["w"] is None or math.isinf(float(vals["w"]))
                                      else float(vals["w"]), float(vals["r"]))
        return params, None if m is None else int(m)


def run_sweep(spec: SweepSpec) -> SweepResult:
    columns = [spec.variable, "nu", "vacancy", "eta", "mu", "beta"]
    with_m = spec.variable == "m" or spec.resolved()["m"] is not None
    if with_m:
        columns += ["nu_m", "mu_m", "beta_m"]
    if spec.monte_carlo:
        columns += ["nu_mc", "nu_mc_se", "mu_mc", "mu_mc_se", "beta_mc", "beta_mc_se"]
    table = Table(tuple(columns))
    sim = mc.SimulationConfig(**spec.simulation) if spec.monte_carlo else None
    for value in spec.grid:
        params, m = spec.params_at(value)
        try:
            eta = an.cif(params)
        except an.DegenerateDenominatorError:
            eta = math.nan
        row = [value, an.saf(params), an.vacancy(params), eta,
               an.intersection_prob(params), an.cover_prob(params)]
        if with_m:
            row += [an.at_most_m_saf(m, params) if m >= 1 else 0.0,
                    an.m_intersection_prob(m, params), an.m_cover_prob(m, params)]
        if sim is not None:
            records = mc.simulate(params, sim)
            for est in (mc.covered_fraction(records),
                        mc.event_rate(records, "intersect_count"),
                        mc.event_rate(records, "cover_count")):
                row += [est.mean, est.standard_error]
        table.add(*row)
    meta = {"variable": spec.variable, "fixed": spec.resolved(), "monte_carlo": spec.monte_carlo,
            "simulation": spec.simulation}
    return SweepResult("sweep", {"sweep": table}, [], meta)


# --------------------------------------------------------------------------
# Validation grid: every closed form against the simulator.

VALIDATION_DENSITIES = (1e-6, 8e-5)
VALIDATION_RADII = (80.0, 150.0)
VALIDATION_TAUS = (0.0, 5.0, 10.0)
VALIDATION_REGION = 50.0


@dataclass(frozen=True)
class ValidationCell:
    metric: str
    density: float
    sensing_radius: float
    tau: float
    closed_form: float
    estimate: float
    standard_error: float | None
    z: float | None
    threshold: float

    @property
    def passed(self) -> bool:
        return self.z is not None and abs(self.z) <= self.threshold


@dataclass
class ValidationReport:
    cells: list[ValidationCell]
    config: dict

    def count_within(self, bound: float) -> int:
        return sum(1 for c in self.cells if c.z is not None and abs(c.z) <= bound)

    def to_table(self) -> Table:
        table = Table(("metric", "lambda", "R_S", "tau", "closed_form", "estimate", "se", "z", "pass"))
        for c in self.cells:
            table.add(c.metric, c.density, c.sensing_radius, c.tau, c.closed_form, c.estimate,
                      c.standard_error, c.z, c.passed)
        return table

    def to_json(self) -> str:
        doc = {"config": self.config, "cells": [asdict(c) | {"pass": c.passed} for c in self.cells]}
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def validation_scenarios(amplitude: float = 1.0, rate: float = 0.01, region: float = VALIDATION_REGION):
    for lam in VALIDATION_DENSITIES:
        for rs in VALIDATION_RADII:
            for tau in VALIDATION_TAUS:
                yield ScenarioParams.build(lam, rs, tau, amplitude, rate, region)


def validate_scenario(params: ScenarioParams, sim: mc.SimulationConfig,
                      threshold: float = 4.0) -> list[ValidationCell]:
    """Compare nu, nu_2, mu_1 and beta_1 for one scenario against a shared set of replications."""
    records = mc.simulate(params, sim)
    pairs = [
        ("nu", an.saf(params), mc.covered_fraction(records)),
        ("nu_2", an.at_most_m_saf(2, params), mc.at_most_m_fraction(records, 2)),
        ("mu_1", an.m_intersection_prob(1, params), mc.event_rate(records, "intersect_count", 1)),
        ("beta_1", an.m_cover_prob(1, params), mc.event_rate(records, "cover_count", 1)),
    ]
    return [ValidationCell(name, params.net.density, params.net.sensing_radius, params.tau,
                           exact, est.mean, est.standard_error, est.z_score(exact), threshold)
            for name, exact, est in pairs]


def validation_grid(sim: mc.SimulationConfig | None = None, threshold: float = 4.0) -> ValidationReport:
    sim = sim or mc.SimulationConfig()
    cells = []
    for params in validation_scenarios():
        cells.extend(validate_scenario(params, sim, threshold))
    config = {k: v for k, v in asdict(sim).items() if k != "workers"}
    config["region_radius"] = VALIDATION_REGION
    return ValidationReport(cells, config)
