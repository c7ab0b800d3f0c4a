"""Profit semantics, parameter-space partitions and sample-complexity tools for pricing mechanisms."""

from .errors import ConsistencyError, DomainError, GeometryError, ResourceError
from .mechanisms import MechanismClass, MechanismSpec, Outcome, evaluate_batch, profit, vcg
from .valuations import (
    CostFunction,
    DistributionSpec,
    SampleSet,
    Valuation,
    ValuationProfile,
    cost,
    sample_profiles,
    value,
)

__all__ = [
    "ConsistencyError",
    "CostFunction",
    "DistributionSpec",
    "DomainError",
    "GeometryError",
    "MechanismClass",
    "MechanismSpec",
    "Outcome",
    "ResourceError",
    "SampleSet",
    "Valuation",
    "ValuationProfile",
    "cost",
    "evaluate_batch",
    "profit",
    "sample_profiles",
    "value",
    "vcg",
]
