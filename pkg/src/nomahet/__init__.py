"""NOMA multicast in a two-tier heterogeneous network: Monte Carlo
simulation and numerical evaluation of the analytical coverage model."""

from .analytic import case_probabilities, coverage_both_layers, coverage_case1, coverage_case2, coverage_case3, coverage_pl
from .config import NetworkConfig, NomaConfig, TierParams, defaults, load_config, rate_to_threshold, validate
from .metrics import MosCurve, avg_mos, avg_rate_analytic, avg_rate_sim, mos, oma_baseline
from .simulator import CoverageEstimate, estimate, sample_realization

__version__ = "0.1.0"

__all__ = [
    "CoverageEstimate",
    "MosCurve",
    "NetworkConfig",
    "NomaConfig",
    "TierParams",
    "avg_mos",
    "avg_rate_analytic",
    "avg_rate_sim",
    "case_probabilities",
    "coverage_both_layers",
    "coverage_case1",
    "coverage_case2",
    "coverage_case3",
    "coverage_pl",
    "defaults",
    "estimate",
    "load_config",
    "mos",
    "oma_baseline",
    "rate_to_threshold",
    "sample_realization",
    "validate",
]
