"""Dynamical transport on rescaled periodic graphs."""
from .path import DiscretePath, action, ce_residual, step_energies
from .minimal import MinimalActionResult, minimal_action
from .embedding import FluxMeasure, TorusMeasure, embed_density, embed_flux, weak_ce_residual
from .kr import kr_distance
from .regularize import RegularisationDomainError, smooth_space, smooth_time, tilt_energy
from .continuum import BumpDensity, circle_geodesic, continuum_action_reference, power_closed_form
from .sweep import epsilon_sweep

__all__ = ["DiscretePath", "action", "ce_residual", "step_energies", "MinimalActionResult", "minimal_action",
           "FluxMeasure", "TorusMeasure", "embed_density", "embed_flux", "weak_ce_residual", "kr_distance",
           "RegularisationDomainError", "smooth_space", "smooth_time", "tilt_energy", "BumpDensity",
           "circle_geodesic", "continuum_action_reference", "power_closed_form", "epsilon_sweep"]
