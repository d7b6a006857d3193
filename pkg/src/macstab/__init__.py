"""Codeword lengths, stability regions and simulation for scheduled
multi-access with random coding and joint maximum-likelihood decoding."""

__version__ = "0.1.0"

from .coding import (CodingConfig, asymptotic_rate, chi, codeword_length, error_exponent,
                     length_bounds)
from .regions import (PolicySpec, RateVector, ScheduleCatalog, Verdict, asymptotic_box,
                      capacity_membership, enumerate_schedules, nat_rate_threshold,
                      outer_bound_membership, psi, schedule_for_rate, split_distribution,
                      synthesize_policy)

__all__ = [
    "CodingConfig", "asymptotic_rate", "chi", "codeword_length", "error_exponent",
    "length_bounds", "PolicySpec", "RateVector", "ScheduleCatalog", "Verdict",
    "asymptotic_box", "capacity_membership", "enumerate_schedules", "nat_rate_threshold",
    "outer_bound_membership", "psi", "schedule_for_rate", "split_distribution",
    "synthesize_policy",
]
