"""Constrained control allocation over attainable moment sets.

Builds the attainable moment set (AMS) of an over-actuated aircraft as a
convex polytope, clips infeasible moment commands onto it by pure scaling,
and distributes the clipped command with an active-set QP that honours
position and (optionally) rate limits.
"""
from ._accel import backend
from .actuator_sim import (ActuatorBank, ActuatorParams, ManeuverSample, TimeSeries,
                           run_experiment, synth_maneuver)
from .allocator import (AircraftModel, AllocationResult, Allocator, ClipResult, Mode,
                        UnsupportedModeError, allocate, build_ams, clip_to_ams)
from .baseline import BaselineResult, erpi_allocate, pseudo_inverse_allocate
from .polytope import (BoxLimits, GeometryError, PolytopeH, PolytopeV, contains,
                       convex_hull_3d, intersect, to_halfspace)
from .qp import QPError, QPInfeasibleError, QPStalledError, qp_solve

__version__ = "0.1.0"

__all__ = [
    "ActuatorBank", "ActuatorParams", "AircraftModel", "AllocationResult", "Allocator",
    "BaselineResult", "BoxLimits", "ClipResult", "GeometryError", "ManeuverSample", "Mode",
    "PolytopeH", "PolytopeV", "QPError", "QPInfeasibleError", "QPStalledError", "TimeSeries",
    "UnsupportedModeError", "allocate", "backend", "build_ams", "clip_to_ams", "contains",
    "convex_hull_3d", "erpi_allocate", "intersect", "pseudo_inverse_allocate", "qp_solve",
    "run_experiment", "synth_maneuver", "to_halfspace",
]
