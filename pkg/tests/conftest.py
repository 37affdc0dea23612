import dataclasses
import math

import numpy as np
import pytest
from hypothesis import settings

from planarmimic.sim2d import (
    CharacterDef,
    SimParams,
    Simulator,
    biped9,
    default_crate,
    forward_kinematics,
    standing_root_pose,
    state_from_kinematics,
)
from planarmimic.sim2d.bodies import capsule_body

settings.register_profile("ci", max_examples=50, deadline=None)
settings.load_profile("ci")


def stiff_leg_character() -> CharacterDef:
    """biped9 with the desk gain profile (passively stable standing)."""
    base = biped9()
    overrides = {"ankle": 600.0, "knee": 300.0}
    joints = []
    for j in base.joints:
        for prefix, kp in overrides.items():
            if j.name.startswith(prefix):
                j = dataclasses.replace(
                    j, kp=kp, kd=2.0 * math.sqrt(kp * base.links[j.child].inertia))
        joints.append(j)
    return CharacterDef(base.name, base.links, tuple(joints), base.root,
                        base.hand_links, base.foot_links)


def free_disk_character(radius=0.1, mass=2.0, friction=0.9, restitution=0.0) -> CharacterDef:
    disk = dataclasses.replace(capsule_body("disk", 0.0, radius, mass),
                               friction=friction, restitution=restitution)
    return CharacterDef("free_disk", (disk,), (), 0)


def standing_state(char, obj_pose=(5.0, 0.55, 0.0), joint_angles=None):
    root, rang = standing_root_pose()
    q = np.zeros(char.n_joints) if joint_angles is None else joint_angles
    pos, angs = forward_kinematics(char, root, rang, q)
    return state_from_kinematics(char, pos, angs, np.zeros((char.n_links, 2)),
                                 np.zeros(char.n_links), np.array(obj_pose), np.zeros(3))


@pytest.fixture
def char():
    return biped9()


@pytest.fixture
def stiff_char():
    return stiff_leg_character()


@pytest.fixture
def crate():
    return default_crate()


@pytest.fixture
def sim(stiff_char, crate):
    s = Simulator(stiff_char, crate, SimParams())
    s.set_state(standing_state(stiff_char))
    return s
