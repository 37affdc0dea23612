"""Rigid-body and articulated-character definitions plus forward kinematics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import (
    Vec,
    capsule_inertia_per_mass,
    polygon_area,
    polygon_centroid,
    polygon_inertia_per_mass,
    rotate,
    transform,
    validate_convex_ccw,
    wrap_angle,
)


@dataclass(frozen=True)
class Capsule:
    half_length: float  # m, along the local +x axis
    radius: float  # m


@dataclass(frozen=True)
class Polygon:
    vertices: tuple[Vec, ...]  # local, convex, CCW, centered on centroid


@dataclass(frozen=True)
class BodyDef:
    name: str
    shape: Capsule | Polygon
    mass: float  # kg
    inertia: float  # kg m^2 about the center
    friction: float = 0.9
    restitution: float = 0.7

    def __post_init__(self):
        if not (self.mass > 0.0):
            raise ValueError(f"{self.name}: mass must be positive")
        if not (self.inertia > 0.0):
            raise ValueError(f"{self.name}: inertia must be positive")
        if not (0.0 <= self.friction <= 2.0):
            raise ValueError(f"{self.name}: friction must be in [0, 2]")
        if not (0.0 <= self.restitution <= 1.0):
            raise ValueError(f"{self.name}: restitution must be in [0, 1]")
        if isinstance(self.shape, Polygon):
            verts = list(self.shape.vertices)
            validate_convex_ccw(verts)
            cx, cy = polygon_centroid(verts)
            if math.hypot(cx, cy) > 1e-6:
                raise ValueError(f"{self.name}: polygon vertices must be centered on the centroid")


def capsule_body(name: str, half_length: float, radius: float, mass: float,
                 friction: float = 0.9, restitution: float = 0.0) -> BodyDef:
    inertia = mass * capsule_inertia_per_mass(half_length, radius)
    return BodyDef(name, Capsule(half_length, radius), mass, inertia, friction, restitution)


def box_body(name: str, half_w: float, half_h: float, density: float,
             friction: float = 0.9, restitution: float = 0.7) -> BodyDef:
    verts = ((-half_w, -half_h), (half_w, -half_h), (half_w, half_h), (-half_w, half_h))
    mass = density * polygon_area(list(verts))
    inertia = mass * polygon_inertia_per_mass(list(verts))
    return BodyDef(name, Polygon(verts), mass, inertia, friction, restitution)


@dataclass(frozen=True)
class JointDef:
    name: str
    parent: int  # link index
    child: int  # link index
    parent_anchor: Vec  # local to parent
    child_anchor: Vec  # local to child
    rest_offset: float  # child world angle minus parent world angle at joint angle 0
    lo: float  # rad
    hi: float  # rad
    kp: float  # N m / rad
    kd: float  # N m s / rad

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValueError(f"{self.name}: joint limits must satisfy lo <= hi")


@dataclass(frozen=True)
class CharacterDef:
    name: str
    links: tuple[BodyDef, ...]
    joints: tuple[JointDef, ...]
    root: int = 0
    # links whose contact markers count as hand segments / feet, by index
    hand_links: tuple[int, ...] = ()
    foot_links: tuple[int, ...] = ()

    def __post_init__(self):
        seen = {self.root}
        for j in self.joints:
            if j.parent not in seen:
                raise ValueError(f"joint {j.name}: parent link {j.parent} not yet reachable "
                                 "(joints must be ordered parents-first from the root)")
            if j.child in seen:
                raise ValueError(f"joint {j.name}: link {j.child} has two parents")
            seen.add(j.child)
        if seen != set(range(len(self.links))):
            raise ValueError("joint graph must be a tree spanning all links")

    @property
    def n_links(self) -> int:
        return len(self.links)

    @property
    def n_joints(self) -> int:
        return len(self.joints)

    def clamp_action(self, action: np.ndarray) -> np.ndarray:
        lo = np.array([j.lo for j in self.joints])
        hi = np.array([j.hi for j in self.joints])
        return np.clip(action, lo, hi)


def forward_kinematics(char: CharacterDef, root_pos: Vec, root_angle: float,
                       joint_angles: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Link world poses from a root pose and joint angles.

    Returns (positions (n,2), angles (n,)).
    """
    n = char.n_links
    pos = np.zeros((n, 2))
    ang = np.zeros(n)
    pos[char.root] = root_pos
    ang[char.root] = root_angle
    for k, j in enumerate(char.joints):
        ang[j.child] = ang[j.parent] + j.rest_offset + float(joint_angles[k])
        anchor = transform(j.parent_anchor, tuple(pos[j.parent]), ang[j.parent])
        off = rotate(j.child_anchor, ang[j.child])
        pos[j.child] = (anchor[0] - off[0], anchor[1] - off[1])
    return pos, ang


def joint_angles_from_links(char: CharacterDef, link_angles: np.ndarray) -> np.ndarray:
    """Recover joint angles from link world angles (inverse of forward_kinematics)."""
    out = np.zeros(char.n_joints)
    for k, j in enumerate(char.joints):
        out[k] = wrap_angle(float(link_angles[j.child]) - float(link_angles[j.parent]) - j.rest_offset)
    return out


def _kd_critical(kp: float, inertia: float) -> float:
    return 2.0 * math.sqrt(kp * inertia)


def biped9() -> CharacterDef:
    """Default planar character: torso plus per-side thigh, shin, foot, upper arm, hand."""
    torso = capsule_body("torso", 0.30, 0.10, 30.0)
    links = [torso]
    joints = []
    hand_links = []
    foot_links = []
    for side in ("l", "r"):
        thigh = capsule_body(f"thigh_{side}", 0.20, 0.06, 8.0)
        shin = capsule_body(f"shin_{side}", 0.20, 0.05, 4.0)
        foot = capsule_body(f"foot_{side}", 0.10, 0.05, 1.5)
        uarm = capsule_body(f"uarm_{side}", 0.22, 0.045, 2.5)
        hand = capsule_body(f"hand_{side}", 0.15, 0.04, 1.0)
        i0 = len(links)
        links += [thigh, shin, foot, uarm, hand]
        foot_links.append(i0 + 2)
        hand_links.append(i0 + 4)
        joints += [
            JointDef(f"hip_{side}", 0, i0, (-0.30, 0.0), (-0.20, 0.0), -math.pi,
                     -1.2, 1.2, 300.0, _kd_critical(300.0, thigh.inertia)),
            JointDef(f"knee_{side}", i0, i0 + 1, (0.20, 0.0), (-0.20, 0.0), 0.0,
                     -2.4, 0.05, 100.0, _kd_critical(100.0, shin.inertia)),
            JointDef(f"ankle_{side}", i0 + 1, i0 + 2, (0.20, 0.0), (0.0, 0.03), 0.5 * math.pi,
                     -0.8, 0.8, 100.0, _kd_critical(100.0, foot.inertia)),
            JointDef(f"shoulder_{side}", 0, i0 + 3, (0.25, 0.0), (-0.22, 0.0), -math.pi,
                     -2.8, 2.8, 300.0, _kd_critical(300.0, uarm.inertia)),
            JointDef(f"wrist_{side}", i0 + 3, i0 + 4, (0.22, 0.0), (-0.15, 0.0), 0.0,
                     -2.4, 2.4, 100.0, _kd_critical(100.0, hand.inertia)),
        ]
    return CharacterDef("biped9", tuple(links), tuple(joints), 0,
                        tuple(hand_links), tuple(foot_links))


def standing_root_pose() -> tuple[Vec, float]:
    """Root pose that puts biped9 feet on the ground with all joint angles zero."""
    return (0.0, 1.18), 0.5 * math.pi


def default_crate() -> BodyDef:
    """Tall light crate that the default character can reach and move."""
    return box_body("crate", 0.09, 0.55, density=30.0, friction=0.9, restitution=0.7)
