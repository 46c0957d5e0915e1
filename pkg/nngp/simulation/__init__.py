"""Finite-width networks, ensemble convergence checks and Barron networks."""

from .network import NetworkSample, forward, sample_network, sample_l1_sphere
from .ensemble import (
    EnsembleStats,
    Verdict,
    WidthConvergenceReport,
    ensemble_stats,
    width_convergence_report,
)
from .barron import (
    ARule,
    BarronSamplerSpec,
    BarronVarianceReport,
    parse_barron_spec,
    load_barron_spec,
    build_barron_network,
    direct_barron_integral,
    barron_variance_scaling,
    estimate_hpi_norm_sq,
)

__all__ = [
    "NetworkSample",
    "forward",
    "sample_network",
    "sample_l1_sphere",
    "EnsembleStats",
    "Verdict",
    "WidthConvergenceReport",
    "ensemble_stats",
    "width_convergence_report",
    "ARule",
    "BarronSamplerSpec",
    "BarronVarianceReport",
    "parse_barron_spec",
    "load_barron_spec",
    "build_barron_network",
    "direct_barron_integral",
    "barron_variance_scaling",
    "estimate_hpi_norm_sq",
]
