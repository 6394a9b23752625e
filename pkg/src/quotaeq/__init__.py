"""Equilibrium computation for economies with emission quotas, emission taxes and fuel taxes."""

from .economy import (
    BoxSet,
    Candidate,
    CobbDouglas,
    CommoditySpace,
    ConcaveCurve,
    Consumer,
    Economy,
    EmissionTaxScheme,
    Firm,
    FuelTaxScheme,
    Linear,
    LinearActivities,
    QuotaScheme,
    Singleton0,
    UtilitySpec,
    excess,
    total_net_emission,
    validate_economy,
)
from .equilibrium import certify, emission_correspondence, solve, solve_fuel, solve_quota, solve_tax

__version__ = "0.1.0"
