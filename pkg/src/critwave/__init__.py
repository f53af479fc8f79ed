"""Numerical checks for two-soliton collisions of the 5D energy-critical wave equation."""
from .fields_quadrature import (AxisymField, PowerLawFit, PowerLawRegressor, QuadratureSpec,
                                QuadratureError, RadialProfile, fit_power_law, integrate_axisym,
                                sobolev_norms, spherical_mean)
from .ground_state import SolitonParams, ground_state_data, kappa, lorentz_compose
from .soliton_interaction import TwoSolitonConfig, interaction_coeffs
from .energy_channels import ChannelReport, channel_limits, proj_perp_norm
from .harness import ScenarioConfig, run_scenario

__version__ = "0.1.0"

__all__ = [
    "AxisymField", "ChannelReport", "PowerLawFit", "PowerLawRegressor", "QuadratureError",
    "QuadratureSpec", "RadialProfile", "ScenarioConfig", "SolitonParams", "TwoSolitonConfig",
    "channel_limits", "fit_power_law", "ground_state_data", "integrate_axisym",
    "interaction_coeffs", "kappa", "lorentz_compose", "proj_perp_norm", "run_scenario",
    "sobolev_norms", "spherical_mean",
]
