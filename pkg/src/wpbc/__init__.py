"""Energy beamforming with estimated backscatter CSI for wirelessly powered backscatter networks."""

from .channel import SystemConfig, TagProfile, dbm_to_watt, path_loss_from_distance
from .detection import link_report, rate_closed_form, rate_lower_bound
from .energy import ResourceAllocation, incident_power_analytic
from .errors import (ConfigError, DegenerateEstimateError, DomainError, InfeasibleAllocationError,
                     WPBCError)
from .harness import load_scenario, run_sweep
from .montecarlo import simulate_link
from .optimizer import GridSpec, solve_maxmin_energy, solve_maxmin_rate
from .specfun import gamma0

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "DegenerateEstimateError", "DomainError", "GridSpec", "InfeasibleAllocationError",
    "ResourceAllocation", "SystemConfig", "TagProfile", "WPBCError", "dbm_to_watt", "gamma0",
    "incident_power_analytic", "link_report", "load_scenario", "path_loss_from_distance",
    "rate_closed_form", "rate_lower_bound", "run_sweep", "simulate_link", "solve_maxmin_energy",
    "solve_maxmin_rate",
]
