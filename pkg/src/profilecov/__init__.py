"""Coverage analysis for sensor networks that exploit a known spatial profile."""

from .analytics import (
    DegenerateDenominatorError,
    ScenarioParams,
    at_most_m_saf,
    cif,
    cif_density,
    cover_prob,
    exact_k_coverage_prob,
    intersection_prob,
    m_cover_prob,
    m_intersection_prob,
    optimal_density,
    required_density,
    saf,
    vacancy,
)
from .model import (
    EffectiveRadius,
    NetworkModel,
    ProfileForm,
    RegionOfInterest,
    ToleranceProfile,
    effective_radius,
    per_km2,
    poisson_pmf,
    tolerance_bound,
    tolerance_radius,
)

__version__ = "0.1.0"
