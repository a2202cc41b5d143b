"""Closed-form coverage metrics for a Poisson sensor field with a tolerance profile.

Every metric reduces to a Poisson count in a disk: a test point is covered by
the sensors inside ``B(z, R_S(tau))``, the region of interest ``B(o, r)`` is hit
by the sensors inside ``B(o, R_S(tau) + r)`` and it is contained in the zones
of the sensors inside ``B(o, R_S(tau) - r)`` (empty when ``R_S(tau) <= r``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from scipy import optimize

from .model import (
    EffectiveRadius,
    NetworkModel,
    RegionOfInterest,
    ToleranceProfile,
    effective_radius,
    poisson_pmf,
    poisson_support,
)


class DegenerateDenominatorError(ValueError):
    """Raised when the baseline coverage used as a denominator is zero."""


@dataclass(frozen=True)
class ScenarioParams:
    net: NetworkModel
    profile: ToleranceProfile = field(default_factory=ToleranceProfile.exponential)
    tau: float = 0.0
    region: RegionOfInterest = field(default_factory=RegionOfInterest)

    def __post_init__(self):
        if not self.tau >= 0 or math.isinf(self.tau):
            raise ValueError(f"tau must be finite and >= 0, got {self.tau}")
        if not math.isfinite(self.intersection_mean):
            raise ValueError("mean sensor count is not finite")

    @classmethod
    def build(cls, density: float, sensing_radius: float, tau: float = 0.0,
              amplitude: float = 1.0, variation_rate: float | None = 0.01,
              r: float = 0.0) -> ScenarioParams:
        """Flat constructor; ``variation_rate=None`` selects the no-profile variant."""
        if variation_rate is None:
            profile = ToleranceProfile.none(amplitude)
        else:
            profile = ToleranceProfile.exponential(amplitude, variation_rate)
        return cls(NetworkModel(density, sensing_radius), profile, tau, RegionOfInterest(r))

    @property
    def radius(self) -> EffectiveRadius:
        return effective_radius(self.net, self.tau, self.profile)

    @property
    def point_mean(self) -> float:
        """Mean number of sensors whose tolerance zone contains a fixed point."""
        return self.net.density * math.pi * self.radius.value ** 2

    @property
    def intersection_mean(self) -> float:
        return self.net.density * math.pi * (self.radius.value + self.region.radius) ** 2

    @property
    def can_cover(self) -> bool:
        return self.radius.value > self.region.radius

    @property
    def cover_mean(self) -> float:
        if not self.can_cover:
            return 0.0
        return self.net.density * math.pi * (self.radius.value - self.region.radius) ** 2

    def with_density(self, density: float) -> ScenarioParams:
        return replace(self, net=replace(self.net, density=density))

    def with_tau(self, tau: float) -> ScenarioParams:
        return replace(self, tau=tau)

    def with_region(self, r: float) -> ScenarioParams:
        return replace(self, region=RegionOfInterest(r))

    def baseline(self) -> ScenarioParams:
        """Same network without any profile information (tau = 0)."""
        return replace(self, tau=0.0)


def exact_k_coverage_prob(k: int, params: ScenarioParams) -> float:
    # Standard Poisson pmf: the count of sensors in B(z, R_S(tau)) is Poisson.
    # A negated base inside the power term would not be a probability.
    return poisson_pmf(k, params.point_mean)


def at_most_m_saf(m: int, params: ScenarioParams) -> float:
    """Average fraction covered by between 1 and ``m`` sensors (vacant points excluded)."""
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    mean = params.point_mean
    return math.fsum(poisson_pmf(k, mean) for k in range(1, m + 1))


def saf(params: ScenarioParams) -> float:
    return -math.expm1(-params.point_mean)


def vacancy(params: ScenarioParams) -> float:
    return math.exp(-params.point_mean)


def cif(params: ScenarioParams) -> float:
    """Coverage improvement factor: tolerance-aware SAF over the plain SAF."""
    if params.net.density == 0 or params.net.sensing_radius == 0:
        raise DegenerateDenominatorError("baseline coverage is zero (density or sensing radius is 0)")
    return saf(params) / saf(params.baseline())


def cif_density(target: float, params: ScenarioParams, xtol: float = 1e-14) -> float:
    """Density at which the improvement factor equals ``target``.

    The factor falls strictly from ``(R_S(tau)/R_S)^2`` (sparse limit) to 1
    (dense limit), so the root is unique; it is bracketed and bisected in
    log-density.
    """
    ratio = (params.radius.value / params.net.sensing_radius) ** 2 if params.net.sensing_radius else math.inf
    if not 1 < target < ratio:
        raise ValueError(f"target {target} outside the attainable range (1, {ratio})")

    def gap(log_density):
        return cif(params.with_density(math.exp(log_density))) - target

    # Work with mean counts at the base radius to set a bracket independent of units.
    area = math.pi * params.net.sensing_radius ** 2
    lo, hi = math.log(1e-12 / area), math.log(1.0 / area)
    while gap(lo) <= 0:
        lo -= 5.0
    while gap(hi) >= 0:
        hi += 1.0
    root = optimize.bisect(gap, lo, hi, xtol=xtol, rtol=1e-15, maxiter=400)
    return math.exp(root)


def m_intersection_prob(m: int, params: ScenarioParams) -> float:
    return poisson_pmf(m, params.intersection_mean)


def optimal_density(m: int, net: NetworkModel, profile: ToleranceProfile, tau: float,
                    region: RegionOfInterest) -> tuple[float, float]:
    """Density maximising the m-intersection probability, and that maximum.

    The maximum is the Poisson pmf at k = mean = m, i.e. m^m e^-m / m!. It does
    not depend on the region or the sensing radius.
    """
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    reach = effective_radius(net, tau, profile).value + region.radius
    if reach <= 0:
        raise ValueError("effective radius plus region radius must be positive")
    return m / (math.pi * reach ** 2), poisson_pmf(m, float(m))


def intersection_prob(params: ScenarioParams) -> float:
    return -math.expm1(-params.intersection_mean)


def m_cover_prob(m: int, params: ScenarioParams) -> float:
    if not params.can_cover:
        return 1.0 if m == 0 else 0.0
    return poisson_pmf(m, params.cover_mean)


def cover_prob(params: ScenarioParams) -> float:
    if not params.can_cover:
        return 0.0
    return -math.expm1(-params.cover_mean)


def required_density(target_saf: float, net: NetworkModel, profile: ToleranceProfile,
                     tau: float) -> float:
    """Smallest density whose tolerance-aware SAF reaches ``target_saf``."""
    if not 0 < target_saf < 1:
        raise ValueError(f"target SAF must lie in (0, 1), got {target_saf}")
    radius = effective_radius(net, tau, profile).value
    if radius <= 0:
        raise ValueError("effective sensing radius is zero")
    return -math.log1p(-target_saf) / (math.pi * radius ** 2)


def truncated_sum(term, mean: float, start: int = 0) -> float:
    """Sum ``term(k)`` for k from ``start`` up to the Poisson tail cut for ``mean``."""
    upper = poisson_support(mean)
    return math.fsum(term(k) for k in range(start, upper + 1))
