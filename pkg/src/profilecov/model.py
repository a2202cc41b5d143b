"""Domain types, the tolerance function and shared numerical primitives.

Lengths are in meters and densities in sensors per square meter throughout.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

# Exact conversion used by the CLI: x sensors/km^2 == x * 1e-6 sensors/m^2.
PER_KM2 = 1e-6


def per_km2(density_km2: float) -> float:
    """Convert a density in sensors/km^2 to sensors/m^2."""
    return density_km2 * PER_KM2


def to_per_km2(density: float) -> float:
    return density / PER_KM2


class ProfileForm(enum.Enum):
    EXPONENTIAL = "exponential"
    NONE = "none"


@dataclass(frozen=True)
class ToleranceProfile:
    """Envelope on how fast the sensed variable can drift with distance.

    ``EXPONENTIAL`` bounds the uncertainty at distance ``d > 0`` by
    ``amplitude * exp(variation_rate * d)``. ``NONE`` stands for an infinitely
    fast varying field: nothing can be inferred outside a sensor's own disk.
    """

    amplitude: float = 1.0
    variation_rate: float | None = 0.01
    form: ProfileForm = ProfileForm.EXPONENTIAL

    def __post_init__(self):
        if not self.amplitude > 0 or not math.isfinite(self.amplitude):
            raise ValueError(f"amplitude must be positive and finite, got {self.amplitude}")
        if self.form is ProfileForm.EXPONENTIAL:
            rate = self.variation_rate
            if rate is None or not rate > 0 or not math.isfinite(rate):
                raise ValueError(f"variation_rate must be positive and finite, got {rate}")

    @classmethod
    def exponential(cls, amplitude: float = 1.0, variation_rate: float = 0.01) -> ToleranceProfile:
        return cls(amplitude, variation_rate, ProfileForm.EXPONENTIAL)

    @classmethod
    def none(cls, amplitude: float = 1.0) -> ToleranceProfile:
        return cls(amplitude, None, ProfileForm.NONE)

    @property
    def is_none(self) -> bool:
        return self.form is ProfileForm.NONE

    def bound(self, d: float) -> float:
        if d < 0 or math.isnan(d):
            raise ValueError(f"distance must be nonnegative, got {d}")
        if d == 0:
            return 0.0
        if self.is_none:
            return math.inf
        try:
            return self.amplitude * math.exp(self.variation_rate * d)
        except OverflowError:
            return math.inf

    def radius(self, tau: float) -> float:
        if tau < 0 or math.isnan(tau):
            raise ValueError(f"tolerance must be nonnegative, got {tau}")
        if self.is_none or tau <= self.amplitude:
            return 0.0
        return math.log(tau / self.amplitude) / self.variation_rate

    def label(self) -> str:
        if self.is_none:
            return "none"
        return f"exponential(A={self.amplitude:g}, w={self.variation_rate:g})"


@dataclass(frozen=True)
class NetworkModel:
    density: float
    sensing_radius: float

    def __post_init__(self):
        if not self.density >= 0 or not math.isfinite(self.density):
            raise ValueError(f"density must be >= 0, got {self.density}")
        if not self.sensing_radius >= 0 or not math.isfinite(self.sensing_radius):
            raise ValueError(f"sensing_radius must be >= 0, got {self.sensing_radius}")


@dataclass(frozen=True)
class RegionOfInterest:
    """Disk of the given radius centered at the origin."""

    radius: float = 0.0

    def __post_init__(self):
        if not self.radius >= 0 or not math.isfinite(self.radius):
            raise ValueError(f"region radius must be >= 0, got {self.radius}")


@dataclass(frozen=True)
class EffectiveRadius:
    """Sensing radius extended by what the tolerance profile lets us infer."""

    base: float
    extension: float

    @property
    def value(self) -> float:
        return self.base + self.extension

    def __float__(self) -> float:
        return self.value


def tolerance_bound(d: float, profile: ToleranceProfile) -> float:
    """Largest possible change of the sensed variable over distance ``d``."""
    return profile.bound(d)


def tolerance_radius(tau: float, profile: ToleranceProfile) -> float:
    """Distance over which the variable is known to within ``tau``."""
    return profile.radius(tau)


def effective_radius(net: NetworkModel, tau: float, profile: ToleranceProfile) -> EffectiveRadius:
    return EffectiveRadius(net.sensing_radius, tolerance_radius(tau, profile))


def poisson_pmf(k: int, mean: float) -> float:
    """Poisson probability of ``k`` events, evaluated in log space."""
    if k < 0:
        return 0.0
    if mean < 0 or math.isnan(mean):
        raise ValueError(f"mean must be nonnegative, got {mean}")
    if mean == 0:
        return 1.0 if k == 0 else 0.0
    if math.isinf(mean):
        return 0.0
    return math.exp(k * math.log(mean) - mean - math.lgamma(k + 1))


def poisson_support(mean: float, tol: float = 1e-12) -> int:
    """Smallest K with P(N <= K) >= 1 - tol, capped at mean + 50 sqrt(mean) + 50."""
    cap = int(math.ceil(mean + 50 * math.sqrt(mean) + 50))
    if mean == 0:
        return 0
    k = np.arange(cap + 1)
    cdf = np.cumsum(np.exp(k * math.log(mean) - mean - gammaln(k + 1)))
    hit = int(np.searchsorted(cdf, 1 - tol))
    return min(hit, cap)
