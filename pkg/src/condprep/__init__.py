"""Conditional preparation of multimode entangled photonic states with linear optics."""

from .errors import (
    CapError,
    CondPrepError,
    DesignError,
    PlanError,
    RegistryError,
    SpecError,
    SupportError,
)
from .fock import FockState, Mode, ModeRegistry, fidelity, make_state, tensor
from .optics import BeamSplitterParams, apply_beam_splitter, subtract_photon
from .planner import PlanConfig, PrepPlan, PrepReport, TargetSpec, estimate_resources, plan, simulate

__version__ = "0.1.0"

__all__ = [
    "BeamSplitterParams",
    "CapError",
    "CondPrepError",
    "DesignError",
    "FockState",
    "Mode",
    "ModeRegistry",
    "PlanConfig",
    "PlanError",
    "PrepPlan",
    "PrepReport",
    "RegistryError",
    "SpecError",
    "SupportError",
    "TargetSpec",
    "apply_beam_splitter",
    "estimate_resources",
    "fidelity",
    "make_state",
    "plan",
    "simulate",
    "subtract_photon",
    "tensor",
]
