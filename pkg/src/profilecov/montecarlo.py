"""First-principles Monte Carlo over Poisson sensor fields.

Each replication draws a fresh sensor realization and answers coverage
questions by direct distance arithmetic. Nothing here uses the closed forms,
so the estimates are an independent check on :mod:`profilecov.analytics`.

Replication ``i`` of master seed ``s`` always gets the same Philox stream
(``SeedSequence(s, spawn_key=(i,))``), so results do not depend on how
replications are spread over workers.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .analytics import ScenarioParams


@dataclass(frozen=True)
class SimulationWindow:
    """Observation square ``center + [-L, L]^2`` plus sampling padding on all sides."""

    half_width: float = 5000.0
    padding: float = 0.0
    center: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if not self.half_width > 0:
            raise ValueError(f"half_width must be positive, got {self.half_width}")
        if not self.padding >= 0:
            raise ValueError(f"padding must be >= 0, got {self.padding}")

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        """Padded sampling square as (xmin, xmax, ymin, ymax)."""
        reach = self.half_width + self.padding
        cx, cy = self.center
        return cx - reach, cx + reach, cy - reach, cy + reach

    @property
    def area(self) -> float:
        return (2 * (self.half_width + self.padding)) ** 2

    def contains_disk(self, radius: float) -> bool:
        """Whether the padded square holds the disk B(o, radius)."""
        xmin, xmax, ymin, ymax = self.bounds
        return xmin <= -radius and xmax >= radius and ymin <= -radius and ymax >= radius


@dataclass(frozen=True)
class SimulationConfig:
    replications: int = 200
    test_points: int = 10_000
    half_width: float = 5000.0
    padding: float | None = None  # default: R_S(tau) + r + 1
    seed: int = 0
    workers: int = 1
    offset: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if self.test_points < 1:
            raise ValueError("test_points must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    def window(self, params: ScenarioParams) -> SimulationWindow:
        needed = params.radius.value + params.region.radius
        padding = needed + 1.0 if self.padding is None else self.padding
        if padding < needed:
            raise ValueError(f"padding {padding} < R_S(tau) + r = {needed}; estimates would be edge-biased")
        window = SimulationWindow(self.half_width, padding, tuple(self.offset))
        if not window.contains_disk(needed):
            raise ValueError("shifted window no longer contains the region of interest")
        return window

    @property
    def grid_side(self) -> int:
        return max(1, round(math.sqrt(self.test_points)))


@dataclass(frozen=True)
class SensorRealization:
    points: np.ndarray  # (N, 2) in meters
    seed: int
    index: int

    def __len__(self):
        return len(self.points)


@dataclass(frozen=True)
class MetricEstimate:
    mean: float
    standard_error: float | None  # None when fewer than 2 replications
    replications: int
    samples_per_replication: int

    @classmethod
    def from_samples(cls, values, samples_per_replication: int = 1) -> MetricEstimate:
        values = np.asarray(values, dtype=float)
        n = len(values)
        se = float(values.std(ddof=1) / math.sqrt(n)) if n >= 2 else None
        return cls(float(values.mean()), se, n, samples_per_replication)

    def z_score(self, reference: float) -> float | None:
        """Standardised deviation from ``reference``.

        A zero sample SE (e.g. no event seen in any replication) falls back to
        the Bernoulli bound ``sqrt(p (1 - p) / n)`` under the reference value.
        """
        if self.standard_error is None:
            return None
        diff = self.mean - reference
        se = self.standard_error
        if se == 0:
            if diff == 0:
                return 0.0
            se = math.sqrt(max(reference * (1 - reference), 0.0) / self.replications)
            if se == 0:
                return math.copysign(math.inf, diff)
        return diff / se


@dataclass
class ReplicationRecord:
    """Raw outcome of one replication."""

    index: int
    n_sensors: int
    count_histogram: np.ndarray = field(repr=False)  # [k] -> test points covered by exactly k sensors
    intersect_count: int = 0
    cover_count: int = 0

    @property
    def test_points(self) -> int:
        return int(self.count_histogram.sum())

    def fraction_exact(self, k: int) -> float:
        hist = self.count_histogram
        return int(hist[k]) / self.test_points if k < len(hist) else 0.0

    def fraction_at_most(self, m: int) -> float:
        """Fraction covered by between 1 and ``m`` sensors."""
        return int(self.count_histogram[1:m + 1].sum()) / self.test_points

    def fraction_covered(self) -> float:
        return (self.test_points - int(self.count_histogram[0])) / self.test_points


def replication_stream(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(index,))))


def sample_ppp(density: float, window: SimulationWindow, stream: np.random.Generator,
               seed: int = 0, index: int = 0) -> SensorRealization:
    """Homogeneous PPP on the padded window: Poisson count, then uniform positions."""
    if density < 0:
        raise ValueError(f"density must be >= 0, got {density}")
    n = int(stream.poisson(density * window.area)) if density > 0 else 0
    xmin, xmax, ymin, ymax = window.bounds
    pts = np.empty((n, 2))
    pts[:, 0] = stream.uniform(xmin, xmax, n)
    pts[:, 1] = stream.uniform(ymin, ymax, n)
    return SensorRealization(pts, seed, index)


def stratified_grid(window: SimulationWindow, side: int, stream: np.random.Generator) -> np.ndarray:
    """One uniform point in each cell of a side x side partition of the observation square."""
    cell = 2 * window.half_width / side
    cx, cy = window.center
    ii, jj = np.meshgrid(np.arange(side), np.arange(side), indexing="ij")
    u = stream.random((side * side, 2))
    x = cx - window.half_width + (ii.ravel() + u[:, 0]) * cell
    y = cy - window.half_width + (jj.ravel() + u[:, 1]) * cell
    return np.column_stack([x, y])


def count_covering_sensors(z, realization: SensorRealization, radius) -> int:
    """Sensors within ``radius`` of ``z`` (closed disk)."""
    pts = realization.points
    if len(pts) == 0:
        return 0
    d2 = ((pts - np.asarray(z, dtype=float)) ** 2).sum(axis=1)
    return int(np.count_nonzero(d2 <= float(radius) ** 2))


def _grid_counts(points: np.ndarray, test: np.ndarray, radius: float) -> np.ndarray:
    if len(points) == 0:
        return np.zeros(len(test), dtype=np.int64)
    # query_ball_point uses the closed-ball convention d <= radius.
    return cKDTree(points).query_ball_point(test, radius, return_length=True)


def run_replication(params: ScenarioParams, sim: SimulationConfig, index: int,
                    grid: bool = True) -> ReplicationRecord:
    window = sim.window(params)
    stream = replication_stream(sim.seed, index)
    real = sample_ppp(params.net.density, window, stream, sim.seed, index)
    radius = params.radius.value
    r = params.region.radius

    if grid:
        test = stratified_grid(window, sim.grid_side, stream)
        counts = _grid_counts(real.points, test, radius)
        hist = np.bincount(counts, minlength=1)
    else:
        hist = np.ones(1, dtype=np.int64)

    dist = np.hypot(real.points[:, 0], real.points[:, 1])
    intersect = int(np.count_nonzero(dist <= radius + r))
    # Containment tested directly: B(o, r) lies in B(X, R) iff |X| + r <= R.
    cover = int(np.count_nonzero(dist + r <= radius))
    return ReplicationRecord(index, len(real), hist, intersect, cover)


def _run_one(args):
    return run_replication(*args)


def simulate(params: ScenarioParams, sim: SimulationConfig, grid: bool = True) -> list[ReplicationRecord]:
    """Run all replications; records come back in replication-index order."""
    jobs = [(params, sim, i, grid) for i in range(sim.replications)]
    if sim.workers == 1 or sim.replications == 1:
        return [_run_one(job) for job in jobs]
    chunk = max(1, sim.replications // (4 * sim.workers))
    with ProcessPoolExecutor(max_workers=sim.workers) as pool:
        return list(pool.map(_run_one, jobs, chunksize=chunk))


def exact_k_fraction(records, k: int) -> MetricEstimate:
    return MetricEstimate.from_samples([rec.fraction_exact(k) for rec in records], records[0].test_points)


def covered_fraction(records) -> MetricEstimate:
    return MetricEstimate.from_samples([rec.fraction_covered() for rec in records], records[0].test_points)


def at_most_m_fraction(records, m: int) -> MetricEstimate:
    return MetricEstimate.from_samples([rec.fraction_at_most(m) for rec in records], records[0].test_points)


def event_rate(records, attr: str, m: int | None = None) -> MetricEstimate:
    """Fraction of replications with exactly ``m`` (or, if None, at least one) sensors."""
    counts = np.array([getattr(rec, attr) for rec in records])
    hits = counts >= 1 if m is None else counts == m
    return MetricEstimate.from_samples(hits.astype(float), 1)


def estimate_exact_k_fraction(k: int, params: ScenarioParams, sim: SimulationConfig) -> MetricEstimate:
    records = simulate(params, sim)
    return exact_k_fraction(records, k)


def estimate_saf(params: ScenarioParams, sim: SimulationConfig) -> MetricEstimate:
    return covered_fraction(simulate(params, sim))


def estimate_at_most_m_saf(m: int, params: ScenarioParams, sim: SimulationConfig) -> MetricEstimate:
    return at_most_m_fraction(simulate(params, sim), m)


def estimate_intersection_events(m: int | None, params: ScenarioParams,
                                 sim: SimulationConfig) -> MetricEstimate:
    """Exactly-``m`` intersection rate; ``m=None`` gives the at-least-one rate."""
    return event_rate(simulate(params, sim, grid=False), "intersect_count", m)


def estimate_cover_events(m: int | None, params: ScenarioParams,
                          sim: SimulationConfig) -> MetricEstimate:
    """Exactly-``m`` containment rate; ``m=None`` gives the at-least-one rate."""
    return event_rate(simulate(params, sim, grid=False), "cover_count", m)
