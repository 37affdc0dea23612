"""Deterministic planar rigid-body simulation for one character and one object."""

from .bodies import (
    BodyDef,
    Capsule,
    CharacterDef,
    JointDef,
    Polygon,
    biped9,
    box_body,
    capsule_body,
    default_crate,
    forward_kinematics,
    joint_angles_from_links,
    standing_root_pose,
)
from .engine import (
    ContactReport,
    SimParams,
    SimState,
    SimulationError,
    Simulator,
    StepDiagnostics,
    link_ground_clearance,
    link_separations,
    nearest_vector,
    object_ground_clearance,
    state_from_kinematics,
)
from .geometry import angle_diff, sample_polygon_boundary, wrap_angle

__all__ = [
    "BodyDef", "Capsule", "CharacterDef", "JointDef", "Polygon",
    "biped9", "box_body", "capsule_body", "default_crate",
    "forward_kinematics", "joint_angles_from_links", "standing_root_pose",
    "ContactReport", "SimParams", "SimState", "SimulationError", "Simulator",
    "StepDiagnostics", "link_ground_clearance", "link_separations",
    "nearest_vector", "object_ground_clearance", "state_from_kinematics",
    "angle_diff", "sample_polygon_boundary", "wrap_angle",
]
