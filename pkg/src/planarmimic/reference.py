"""Reference clips: scripted kinematic interaction trajectories, mocap-style
artifact injection, and contact-marker inference from kinematics alone.

A clip stores the character trajectory as (root pose, joint angles) so every
frame is kinematically consistent by construction; link-level arrays and all
interaction features (separation vectors, ground clearances) are derived and
cached on the clip. Velocities are central finite differences of the stored
positions.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .sim2d import (
    BodyDef,
    CharacterDef,
    SimState,
    forward_kinematics,
    link_ground_clearance,
    link_separations,
    object_ground_clearance,
    state_from_kinematics,
    wrap_angle,
)

CLIP_FORMAT = "planarmimic-clip"
CLIP_VERSION = 1


class ClipError(ValueError):
    """Malformed clip data or an infeasible task script."""


@dataclass(frozen=True)
class ArtifactSpec:
    float_offset: float = 0.0  # m, vertical contact gap
    jitter_sigma: float = 0.0  # m on root position; rad on joint angles
    flatten_hands: bool = False  # freeze wrist joints at neutral during contact
    drop_rate: float = 0.0  # fraction of contact frames with interpolated object pose

    def __post_init__(self):
        if not (0.0 <= self.float_offset <= 0.1):
            raise ClipError("float_offset must be in [0, 0.1]")
        if not (0.0 <= self.jitter_sigma <= 0.05):
            raise ClipError("jitter_sigma must be in [0, 0.05]")
        if not (0.0 <= self.drop_rate <= 0.5):
            raise ClipError("drop_rate must be in [0, 0.5]")

    def is_clean(self) -> bool:
        return (self.float_offset == 0.0 and self.jitter_sigma == 0.0
                and not self.flatten_hands and self.drop_rate == 0.0)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass(frozen=True)
class TaskScript:
    kind: str  # push | lift | carry | kick
    object_start: tuple[float, float, float]
    object_end: tuple[float, float, float]
    duration: float  # s
    stance_x: float  # character root x
    contact_height: float  # m, task contact point height
    approach_time: float  # s, pre-contact pose reached
    contact_start: float  # s
    contact_end: float  # s
    side: str = "r"
    carry_height: float = 0.25  # m object raise for lift/carry

    def __post_init__(self):
        if self.kind not in ("push", "lift", "carry", "kick"):
            raise ClipError(f"unknown task kind {self.kind!r}")
        times = (0.0, self.approach_time, self.contact_start, self.contact_end, self.duration)
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ClipError("phase times must be strictly increasing")
        if self.side not in ("l", "r"):
            raise ClipError("side must be 'l' or 'r'")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class ReferenceClip:
    fps: float
    root: np.ndarray  # (T,3)
    joint_q: np.ndarray  # (T,J)
    link_pos: np.ndarray  # (T,n,2)
    link_angle: np.ndarray  # (T,n)
    link_vel: np.ndarray  # (T,n,2)
    link_angvel: np.ndarray  # (T,n)
    obj_pose: np.ndarray  # (T,3)
    obj_vel: np.ndarray  # (T,3)
    dvec: np.ndarray  # (T,n,2) link-surface to object-surface separation vectors
    dist: np.ndarray  # (T,n)
    link_clearance: np.ndarray  # (T,n) link-surface to ground
    obj_clearance: np.ndarray  # (T,)
    metadata: dict = field(default_factory=dict)
    # contact annotation (filled by infer_contact_markers)
    markers_inferred: bool = False
    gate: np.ndarray | None = None  # (T,) interaction inferred this frame
    sigma: np.ndarray | None = None  # (T,) adaptive promotion threshold
    contact_b: np.ndarray | None = None  # (T,n) promotion markers
    contact_p: np.ndarray | None = None  # (T,n) penalty markers
    contact_g: np.ndarray | None = None  # (T,n) ground-contact markers
    tri: np.ndarray | None = None  # (T,n) in {-1,0,1}
    hand_markers: np.ndarray | None = None  # (T,H) per hand link

    @property
    def frame_count(self) -> int:
        return self.root.shape[0]

    @property
    def n_links(self) -> int:
        return self.link_pos.shape[1]

    @property
    def n_joints(self) -> int:
        return self.joint_q.shape[1]

    @property
    def clip_id(self) -> str:
        return self.metadata.get("clip_id", "")

    def clamp_frame(self, t: int) -> int:
        return min(max(t, 0), self.frame_count - 1)

    def to_sim_state(self, char: CharacterDef, t: int) -> SimState:
        t = self.clamp_frame(t)
        return state_from_kinematics(
            char, self.link_pos[t], self.link_angle[t], self.link_vel[t],
            self.link_angvel[t], self.obj_pose[t], self.obj_vel[t], time=t / self.fps)

    def copy(self) -> "ReferenceClip":
        out = dataclasses.replace(self)
        for f in dataclasses.fields(self):
            v = getattr(out, f.name)
            if isinstance(v, np.ndarray):
                setattr(out, f.name, v.copy())
            elif isinstance(v, dict):
                setattr(out, f.name, json.loads(json.dumps(v)))
        return out


def scripted_contact_frames(clip: ReferenceClip) -> dict[str, list[tuple[int, int]]]:
    """Ground-truth contact schedule from the generating script: link name to
    list of [start, end) frame ranges."""
    return {k: [tuple(r) for r in v]
            for k, v in clip.metadata.get("contact_schedule", {}).items()}


# ---------------------------------------------------------------------------
# interpolation and inverse kinematics helpers


def _catmull_rom(times: np.ndarray, values: np.ndarray, t: float) -> float:
    """Cubic Hermite interpolation with Catmull-Rom tangents on non-uniform
    knots; clamped (zero-tangent) ends."""
    n = len(times)
    if t <= times[0]:
        return float(values[0])
    if t >= times[-1]:
        return float(values[-1])
    i = int(np.searchsorted(times, t, side="right") - 1)
    i = min(i, n - 2)
    t0, t1 = times[i], times[i + 1]
    h = t1 - t0
    s = (t - t0) / h
    p0, p1 = values[i], values[i + 1]
    m0 = (values[i + 1] - values[i - 1]) / (times[i + 1] - times[i - 1]) if i > 0 else 0.0
    m1 = (values[i + 2] - values[i]) / (times[i + 2] - times[i]) if i + 2 < n else 0.0
    s2, s3 = s * s, s * s * s
    return float((2 * s3 - 3 * s2 + 1) * p0 + (s3 - 2 * s2 + s) * h * m0
                 + (-2 * s3 + 3 * s2) * p1 + (s3 - s2) * h * m1)


def _smoothstep(a: float, b: float, s: float) -> float:
    s = min(1.0, max(0.0, s))
    return a + (b - a) * (3 * s * s - 2 * s * s * s)


def _limb_keyframes(T, f1, f2, f3, q_pre, q_contact, q_release, q_far):
    """Keyframe times and per-channel values for the acting limb: rest, a
    plateau at the pre-contact pose (no overshoot into the object), contact,
    a fast pull-away after release, then rest."""
    t_far = min(f3 + 3.0, 0.5 * (f3 + T - 1))
    times = np.array([0.0, float(f1 - 2), float(f1), float(f2), float(f3), t_far,
                      float(T - 1)])
    keys = []
    for ch in range(len(q_pre)):
        keys.append(np.array([0.0, q_pre[ch], q_pre[ch], q_contact[ch],
                              q_release[ch], q_far[ch], 0.0]))
    return times, keys


def _joint_index(char: CharacterDef, name: str) -> int:
    for k, j in enumerate(char.joints):
        if j.name == name:
            return k
    raise ClipError(f"character has no joint {name!r}")


def _two_link_ik(base: tuple[float, float], target: tuple[float, float],
                 l1: float, l2: float, bend: float) -> tuple[float, float]:
    """World angles of the two segments placing the chain tip at target.

    bend > 0 bends the middle joint counterclockwise.
    """
    dx, dy = target[0] - base[0], target[1] - base[1]
    d = math.hypot(dx, dy)
    if d > l1 + l2 - 1e-9:
        raise ClipError(f"IK target out of reach: need {d:.3f} m, limb spans {l1 + l2:.3f} m")
    d = max(d, abs(l1 - l2) + 1e-9)
    cos_alpha = (l1 * l1 + d * d - l2 * l2) / (2.0 * l1 * d)
    alpha = math.acos(min(1.0, max(-1.0, cos_alpha)))
    phi = math.atan2(dy, dx)
    a1 = phi + (alpha if bend > 0 else -alpha)
    jx = base[0] + l1 * math.cos(a1)
    jy = base[1] + l1 * math.sin(a1)
    a2 = math.atan2(target[1] - jy, target[0] - jx)
    return a1, a2


class _ArmSolver:
    """Per-frame IK for one arm, writing shoulder and wrist joint angles."""

    def __init__(self, char: CharacterDef, side: str):
        self.shoulder_idx = _joint_index(char, f"shoulder_{side}")
        self.wrist_idx = _joint_index(char, f"wrist_{side}")
        sj = char.joints[self.shoulder_idx]
        wj = char.joints[self.wrist_idx]
        uarm = char.links[sj.child]
        hand = char.links[wj.child]
        self.shoulder_anchor_local = sj.parent_anchor
        self.l1 = 2.0 * uarm.shape.half_length
        self.l2 = 2.0 * hand.shape.half_length + hand.shape.radius
        self.shoulder_rest = sj.rest_offset
        self.wrist_rest = wj.rest_offset

    def shoulder_world(self, root_pose) -> tuple[float, float]:
        x, y, a = root_pose
        c, s = math.cos(a), math.sin(a)
        ax, ay = self.shoulder_anchor_local
        return (x + c * ax - s * ay, y + s * ax + c * ay)

    def solve(self, root_pose, tip_target, bend: float) -> tuple[float, float]:
        base = self.shoulder_world(root_pose)
        a1, a2 = _two_link_ik(base, tip_target, self.l1, self.l2, bend)
        q_shoulder = wrap_angle(a1 - root_pose[2] - self.shoulder_rest)
        q_wrist = wrap_angle(a2 - a1 - self.wrist_rest)
        return q_shoulder, q_wrist


class _LegSolver:
    """Per-frame IK for one leg; the foot angle channel stays scripted."""

    def __init__(self, char: CharacterDef, side: str):
        self.hip_idx = _joint_index(char, f"hip_{side}")
        self.knee_idx = _joint_index(char, f"knee_{side}")
        self.ankle_idx = _joint_index(char, f"ankle_{side}")
        hj = char.joints[self.hip_idx]
        kj = char.joints[self.knee_idx]
        thigh = char.links[hj.child]
        shin = char.links[kj.child]
        self.hip_anchor_local = hj.parent_anchor
        self.l1 = 2.0 * thigh.shape.half_length
        self.l2 = 2.0 * shin.shape.half_length
        self.hip_rest = hj.rest_offset
        self.knee_rest = kj.rest_offset
        self.ankle_rest = char.joints[self.ankle_idx].rest_offset

    def hip_world(self, root_pose) -> tuple[float, float]:
        x, y, a = root_pose
        c, s = math.cos(a), math.sin(a)
        ax, ay = self.hip_anchor_local
        return (x + c * ax - s * ay, y + s * ax + c * ay)

    def solve(self, root_pose, ankle_target, foot_world_angle: float,
              bend: float) -> tuple[float, float, float]:
        base = self.hip_world(root_pose)
        a1, a2 = _two_link_ik(base, ankle_target, self.l1, self.l2, bend)
        q_hip = wrap_angle(a1 - root_pose[2] - self.hip_rest)
        q_knee = wrap_angle(a2 - a1 - self.knee_rest)
        q_ankle = wrap_angle(foot_world_angle - a2 - self.ankle_rest)
        return q_hip, q_knee, q_ankle


# ---------------------------------------------------------------------------
# clip generation


def _object_rest_height(obj: BodyDef) -> float:
    return -min(v[1] for v in obj.shape.vertices)


def _object_half_width(obj: BodyDef) -> float:
    return max(v[0] for v in obj.shape.vertices)


def _object_top(obj: BodyDef) -> float:
    return max(v[1] for v in obj.shape.vertices)


def standard_script(kind: str, obj: BodyDef, seed: int = 0, side: str = "r",
                    object_x: float = 0.0) -> TaskScript:
    """Canonical desk-scale script for a task kind, lightly varied by seed."""
    rng = np.random.default_rng(np.random.SeedSequence([0x5C12, seed]))
    jit = lambda lo, hi: float(rng.uniform(lo, hi))
    rest_y = _object_rest_height(obj)
    half_w = _object_half_width(obj)
    top = _object_top(obj) + rest_y
    sgn = 1.0 if side == "r" else 1.0  # planar model pushes toward +x either arm
    if kind == "push":
        contact_h = top - 0.10 + jit(-0.02, 0.02)
        stance = object_x - half_w - 0.25 + jit(-0.02, 0.02)
        t1 = 0.5 + jit(-0.05, 0.05)
        t2 = t1 + 0.2
        t3 = t2 + 1.2 + jit(-0.1, 0.1)
        dur = t3 + 0.5
        dist = 0.25 + jit(-0.03, 0.03)
        return TaskScript(kind, (object_x, rest_y, 0.0), (object_x + sgn * dist, rest_y, 0.0),
                          dur, stance, contact_h, t1, t2, t3, side)
    if kind in ("lift", "carry"):
        contact_h = top + jit(-0.005, 0.005)
        stance = object_x - half_w - 0.30 + jit(-0.02, 0.02)
        t1 = 0.5 + jit(-0.05, 0.05)
        t2 = t1 + 0.2
        t3 = t2 + (1.6 if kind == "lift" else 2.2) + jit(-0.1, 0.1)
        dur = t3 + 0.5
        dx = 0.2 if kind == "carry" else 0.0
        return TaskScript(kind, (object_x, rest_y, 0.0), (object_x + dx, rest_y, 0.0),
                          dur, stance, contact_h, t1, t2, t3, side,
                          carry_height=0.22 + jit(-0.02, 0.02))
    if kind == "kick":
        contact_h = min(0.25, top - 0.05) + jit(-0.02, 0.02)
        stance = object_x - half_w - 0.42 + jit(-0.02, 0.02)
        t1 = 0.5 + jit(-0.05, 0.05)
        t2 = t1 + 0.2
        t3 = t2 + 0.9 + jit(-0.05, 0.05)
        dur = t3 + 0.5
        dist = 0.2 + jit(-0.03, 0.03)
        return TaskScript(kind, (object_x, rest_y, 0.0), (object_x + dist, rest_y, 0.0),
                          dur, stance, contact_h, t1, t2, t3, side)
    raise ClipError(f"unknown task kind {kind!r}")


def _validate_script(script: TaskScript, obj: BodyDef) -> None:
    rest_y = _object_rest_height(obj)
    if abs(script.object_start[1] - rest_y) > 0.02:
        raise ClipError("object start pose is not statically feasible (must rest on ground)")


def generate_clip(script: TaskScript, char: CharacterDef, obj: BodyDef, seed: int,
                  fps: float = 30.0) -> ReferenceClip:
    """Kinematically smooth clip realizing the script's interaction."""
    _validate_script(script, obj)
    T = int(round(script.duration * fps)) + 1
    f1 = int(round(script.approach_time * fps))
    f2 = int(round(script.contact_start * fps))
    f3 = int(round(script.contact_end * fps))
    dt = 1.0 / fps
    half_w = _object_half_width(obj)
    rest_y = _object_rest_height(obj)
    top_off = _object_top(obj)
    gap = 0.002

    x0, y0, a0 = script.object_start
    x1 = script.object_end[0]

    # object trajectory: at rest until just after first touch, moved with a
    # zero-end-velocity profile, and at rest again from the release frame on
    obj_pose = np.zeros((T, 3))
    obj_pose[:, 0] = x0
    obj_pose[:, 1] = y0
    obj_pose[:, 2] = a0
    move_a, move_b = f2 + 1, f3  # motion window within the contact phase

    def up_down(s: float) -> float:
        # raise then set down, zero slope at both ends and at the apex
        if s <= 0.5:
            return _smoothstep(0.0, 1.0, 2.0 * s)
        return _smoothstep(1.0, 0.0, 2.0 * s - 1.0)

    for t in range(move_a, T):
        s = min(1.0, (t - move_a) / max(1, (move_b - move_a)))
        if script.kind in ("push", "kick"):
            obj_pose[t, 0] = _smoothstep(x0, x1, s)
        elif script.kind == "lift":
            obj_pose[t, 1] = y0 + script.carry_height * up_down(s)
        elif script.kind == "carry":
            obj_pose[t, 1] = y0 + script.carry_height * up_down(s)
            obj_pose[t, 0] = _smoothstep(x0, x1, s)

    # character channels from keyframes, acting limb overridden by IK
    n_j = char.n_joints
    root = np.zeros((T, 3))
    root[:, 0] = script.stance_x
    root[:, 1] = 1.18
    root[:, 2] = 0.5 * math.pi
    q = np.zeros((T, n_j))

    side = script.side
    if script.kind in ("push", "lift", "carry"):
        solver = _ArmSolver(char, side)
        # pushing keeps the elbow low behind the hand; top grips arc the elbow
        # up so the forearm clears the object's top corner
        bend = -1.0 if script.kind == "push" else 1.0

        def tip_target(t: int) -> tuple[float, float]:
            ox, oy = obj_pose[t, 0], obj_pose[t, 1]
            if script.kind == "push":
                return (ox - half_w - gap, script.contact_height)
            # grip the top face near its close corner; keeps a wide object
            # within arm reach through the carry
            return (ox - half_w + 0.05, oy + top_off + gap)

        idx_a, idx_b = solver.shoulder_idx, solver.wrist_idx
        q_contact0 = solver.solve(root[f2], tip_target(f2), bend)
        pre = tip_target(0)
        pre = (pre[0] - 0.18, pre[1] + (0.10 if script.kind != "push" else 0.0))
        q_pre = solver.solve(root[f1], pre, bend)
        q_release = solver.solve(root[f3], tip_target(f3), bend)
        far = tip_target(f3)
        far = (far[0] - 0.20, far[1] + (0.10 if script.kind != "push" else 0.02))
        q_far = solver.solve(root[f3], far, bend)
        # plateau key at f1-2 kills spline overshoot through the pre-contact pose
        times, keys = _limb_keyframes(T, f1, f2, f3, q_pre, q_contact0, q_release, q_far)
        for t in range(T):
            q[t, idx_a] = _catmull_rom(times, keys[0], t)
            q[t, idx_b] = _catmull_rom(times, keys[1], t)
        for t in range(f2, f3 + 1):
            q[t, idx_a], q[t, idx_b] = solver.solve(root[t], tip_target(t), bend)
        contact_links = [f"hand_{side}"]
    else:  # kick
        solver = _LegSolver(char, side)
        bend = 1.0  # knee bends backward through the swing

        def ankle_target(t: int) -> tuple[float, float]:
            # foot tip surface sits at the near face: tip = ankle + (hl + r, -anchor_y)
            ox = obj_pose[t, 0]
            return (ox - half_w - gap - 0.15, script.contact_height + 0.03)

        q_contact0 = solver.solve(root[f2], ankle_target(f2), 0.0, bend)
        pre_t = ankle_target(0)
        q_pre = solver.solve(root[f1], (pre_t[0] - 0.15, pre_t[1] + 0.05), 0.0, bend)
        q_release = solver.solve(root[f3], ankle_target(f3), 0.0, bend)
        far_t = ankle_target(f3)
        q_far = solver.solve(root[f3], (far_t[0] - 0.18, far_t[1] + 0.05), 0.0, bend)
        ids = (solver.hip_idx, solver.knee_idx, solver.ankle_idx)
        times, keys = _limb_keyframes(T, f1, f2, f3, q_pre, q_contact0, q_release, q_far)
        for ch in range(3):
            for t in range(T):
                q[t, ids[ch]] = _catmull_rom(times, keys[ch], t)
        for t in range(f2, f3 + 1):
            vals = solver.solve(root[t], ankle_target(t), 0.0, bend)
            for ch in range(3):
                q[t, ids[ch]] = vals[ch]
        contact_links = [f"foot_{side}"]

    schedule = {name: [(f2, f3 + 1)] for name in contact_links}
    metadata = {
        "clip_id": f"{script.kind}-{side}-s{seed}",
        "task": script.kind,
        "subject": f"subject-{seed}",
        "character": char.name,
        "artifacts": ArtifactSpec().to_dict(),
        "contact_schedule": schedule,
        "script": script.to_dict(),
        "seed": seed,
    }
    clip = _assemble_clip(fps, root, q, obj_pose, char, obj, metadata)
    return clip


def _assemble_clip(fps, root, q, obj_pose, char, obj, metadata) -> ReferenceClip:
    T = root.shape[0]
    if T < 2:
        raise ClipError("clips need at least 2 frames")
    n = char.n_links
    link_pos = np.zeros((T, n, 2))
    link_angle = np.zeros((T, n))
    dvec = np.zeros((T, n, 2))
    dist = np.zeros((T, n))
    link_clear = np.zeros((T, n))
    obj_clear = np.zeros(T)
    for t in range(T):
        pos, ang = forward_kinematics(char, (root[t, 0], root[t, 1]), root[t, 2], q[t])
        link_pos[t] = pos
        link_angle[t] = ang
        dvec[t], dist[t] = link_separations(pos, ang, char, obj_pose[t, :2], obj_pose[t, 2], obj)
        link_clear[t] = link_ground_clearance(pos, ang, char)
        obj_clear[t] = object_ground_clearance(obj_pose[t, :2], obj_pose[t, 2], obj)
    link_vel, link_angvel = _central_diff_links(link_pos, link_angle, fps)
    obj_vel = _central_diff_obj(obj_pose, fps)
    return ReferenceClip(
        fps=fps, root=root, joint_q=q, link_pos=link_pos, link_angle=link_angle,
        link_vel=link_vel, link_angvel=link_angvel, obj_pose=obj_pose, obj_vel=obj_vel,
        dvec=dvec, dist=dist, link_clearance=link_clear, obj_clearance=obj_clear,
        metadata=metadata)


def _central_diff_links(link_pos, link_angle, fps):
    T = link_pos.shape[0]
    vel = np.zeros_like(link_pos)
    angvel = np.zeros_like(link_angle)
    vel[1:-1] = (link_pos[2:] - link_pos[:-2]) * (fps / 2.0)
    vel[0] = (link_pos[1] - link_pos[0]) * fps
    vel[-1] = (link_pos[-1] - link_pos[-2]) * fps
    dang = np.vectorize(wrap_angle)(np.diff(link_angle, axis=0))
    angvel[1:-1] = (dang[1:] + dang[:-1]) * (fps / 2.0)
    angvel[0] = dang[0] * fps
    angvel[-1] = dang[-1] * fps
    return vel, angvel


def _central_diff_obj(obj_pose, fps):
    T = obj_pose.shape[0]
    vel = np.zeros((T, 3))
    vel[1:-1, :2] = (obj_pose[2:, :2] - obj_pose[:-2, :2]) * (fps / 2.0)
    vel[0, :2] = (obj_pose[1, :2] - obj_pose[0, :2]) * fps
    vel[-1, :2] = (obj_pose[-1, :2] - obj_pose[-2, :2]) * fps
    dang = np.array([wrap_angle(d) for d in np.diff(obj_pose[:, 2])])
    vel[1:-1, 2] = (dang[1:] + dang[:-1]) * (fps / 2.0)
    vel[0, 2] = dang[0] * fps
    vel[-1, 2] = dang[-1] * fps
    return vel


def contact_phase_frames(clip: ReferenceClip) -> np.ndarray:
    """Boolean mask of frames inside any scheduled contact phase."""
    mask = np.zeros(clip.frame_count, dtype=bool)
    for ranges in scripted_contact_frames(clip).values():
        for a, b in ranges:
            mask[a:b] = True
    return mask


# ---------------------------------------------------------------------------
# artifact injection


def inject_artifacts(clip: ReferenceClip, spec: ArtifactSpec, seed: int,
                     char: CharacterDef, obj: BodyDef) -> ReferenceClip:
    """Corrupted copy of the clip; the original is untouched.

    The float artifact lowers the object during contact phases, opening a
    vertical gap under the expected contact (and sinking grounded frames into
    the floor, the classic capture artifact). Jitter perturbs the root
    position (metres) and joint angles (radians) so frames stay kinematically
    consistent. Velocities and derived features are recomputed from the
    corrupted channels.
    """
    rng = np.random.default_rng(np.random.SeedSequence([0xA27F, seed]))
    out = clip.copy()
    mask = contact_phase_frames(clip)
    manifest = spec.to_dict() | {"seed": seed, "base_clip": clip.clip_id}

    root = out.root.copy()
    q = out.joint_q.copy()
    obj_pose = out.obj_pose.copy()

    if spec.float_offset > 0.0:
        obj_pose[mask, 1] -= spec.float_offset

    if spec.drop_rate > 0.0:
        frames = np.flatnonzero(mask)
        chosen = frames[rng.random(len(frames)) < spec.drop_rate]
        dropped = sorted(int(f) for f in chosen)
        manifest["dropped_frames"] = dropped
        for a, b in _runs(dropped):
            lo = max(a - 1, 0)
            hi = min(b + 1, clip.frame_count - 1)
            for t in range(a, b + 1):
                s = (t - lo) / (hi - lo) if hi > lo else 0.0
                obj_pose[t] = obj_pose[lo] * (1 - s) + obj_pose[hi] * s

    if spec.jitter_sigma > 0.0:
        root[:, 0] += rng.normal(0.0, spec.jitter_sigma, clip.frame_count)
        root[:, 1] += rng.normal(0.0, spec.jitter_sigma, clip.frame_count)
        q += rng.normal(0.0, spec.jitter_sigma, q.shape)

    if spec.flatten_hands:
        wrists = [k for k, j in enumerate(char.joints) if j.name.startswith("wrist")]
        for t in np.flatnonzero(mask):
            for k in wrists:
                q[t, k] = 0.0

    meta = json.loads(json.dumps(clip.metadata))
    meta["artifacts"] = manifest
    meta["clip_id"] = clip.clip_id + _artifact_tag(spec)
    return _assemble_clip(clip.fps, root, q, obj_pose, char, obj, meta)


def _artifact_tag(spec: ArtifactSpec) -> str:
    if spec.is_clean():
        return ""
    bits = []
    if spec.float_offset > 0:
        bits.append(f"f{spec.float_offset:g}")
    if spec.jitter_sigma > 0:
        bits.append(f"j{spec.jitter_sigma:g}")
    if spec.flatten_hands:
        bits.append("fh")
    if spec.drop_rate > 0:
        bits.append(f"d{spec.drop_rate:g}")
    return "+" + "-".join(bits)


def _runs(sorted_ints):
    runs = []
    for v in sorted_ints:
        if runs and v == runs[-1][1] + 1:
            runs[-1][1] = v
        else:
            runs.append([v, v])
    return [(a, b) for a, b in runs]


# ---------------------------------------------------------------------------
# contact-marker inference


def infer_contact_markers(clip: ReferenceClip, char: CharacterDef,
                          gravity: float = 9.81, friction: float = 0.9,
                          accel_tol: float = 1.0, proximity: float = 0.01,
                          sigma_pad: float = 0.005, penalty_distance: float = 0.1,
                          ground_tol: float = 0.01, speed_eps: float = 0.02) -> ReferenceClip:
    """Annotate the clip with tri-state contact markers inferred from kinematics.

    A frame is flagged as interacting when the object is airborne with
    non-gravitational acceleration, grounded but accelerating beyond what
    friction alone explains, or within the proximity distance of any link.
    On flagged frames the promotion threshold adapts to the closest link.
    """
    out = clip.copy()
    T = clip.frame_count
    n = clip.n_links
    accel = _object_accel(clip)
    g_vec = np.array([0.0, -gravity])

    gate = np.zeros(T, dtype=bool)
    sigma = np.zeros(T)
    c_b = np.zeros((T, n), dtype=int)
    c_p = np.zeros((T, n), dtype=int)
    c_g = (clip.link_clearance < ground_tol).astype(int)

    for t in range(T):
        airborne = clip.obj_clearance[t] >= ground_tol
        speed = float(np.hypot(clip.obj_vel[t, 0], clip.obj_vel[t, 1]))
        min_dist = float(clip.dist[t].min())
        if airborne:
            fired = float(np.hypot(*(accel[t] - g_vec))) > accel_tol
        elif speed > speed_eps:
            if abs(clip.obj_vel[t, 1]) > speed_eps:
                # friction cannot explain vertical motion of a grounded object
                fired = True
            else:
                v_hat = clip.obj_vel[t, :2] / speed
                expected = -friction * gravity * v_hat
                fired = float(np.hypot(*(accel[t] - expected))) > accel_tol
        else:
            fired = False
        if min_dist < proximity:
            fired = True
        gate[t] = fired
        if fired:
            sigma[t] = min_dist + sigma_pad
            c_b[t] = (clip.dist[t] < sigma[t]).astype(int)
        c_p[t] = ((clip.dist[t] > penalty_distance) & (c_g[t] == 0)).astype(int)

    out.gate = gate
    out.sigma = sigma
    out.contact_b = c_b
    out.contact_p = c_p
    out.contact_g = c_g
    out.hand_markers = _hand_discovery(clip, char, gate, sigma)
    # promotion wins over penalty; hand discovery promotes hand segments
    tri = np.zeros((T, n), dtype=int)
    tri[c_b == 1] = 1
    for h, link in enumerate(char.hand_links):
        tri[out.hand_markers[:, h] == 1, link] = 1
    tri[(tri == 0) & (c_p == 1)] = -1
    out.tri = tri
    out.markers_inferred = True
    return out


def _object_accel(clip: ReferenceClip) -> np.ndarray:
    """Central difference of the stored object velocity over one frame."""
    T = clip.frame_count
    acc = np.zeros((T, 2))
    v = clip.obj_vel[:, :2]
    if T > 2:
        acc[1:-1] = (v[2:] - v[:-2]) * (clip.fps / 2.0)
    acc[0] = (v[1] - v[0]) * clip.fps
    acc[-1] = (v[-1] - v[-2]) * clip.fps
    return acc


def _hand_discovery(clip: ReferenceClip, char: CharacterDef, gate, sigma) -> np.ndarray:
    """Hand-segment promotion: on interacting frames any hand link whose
    surface reaches within the adaptive threshold is promoted, regardless of
    the scripted hand pose."""
    T = clip.frame_count
    out = np.zeros((T, len(char.hand_links)), dtype=int)
    for t in range(T):
        if not gate[t]:
            continue
        for h, link in enumerate(char.hand_links):
            if clip.dist[t, link] < sigma[t]:
                out[t, h] = 1
    return out


def end_effector_discovery_markers(clip: ReferenceClip, char: CharacterDef) -> np.ndarray:
    """Per-frame hand promotion markers (frames, hand links)."""
    if not clip.markers_inferred:
        raise ClipError("infer_contact_markers must run before hand discovery")
    return _hand_discovery(clip, char, clip.gate, clip.sigma)


def physical_consistency_max_dwell(clip: ReferenceClip, gravity: float = 9.81,
                                   accel_tol: float = 1.0, ground_tol: float = 0.01) -> int:
    """Longest run of frames where the object hangs mid-air with neither an
    inferred interaction nor ballistic acceleration: impossible data."""
    if not clip.markers_inferred:
        raise ClipError("infer_contact_markers must run first")
    accel = _object_accel(clip)
    g_vec = np.array([0.0, -gravity])
    worst = run = 0
    for t in range(clip.frame_count):
        airborne = clip.obj_clearance[t] >= ground_tol
        ballistic = float(np.hypot(*(accel[t] - g_vec))) <= accel_tol
        if airborne and not clip.gate[t] and not ballistic:
            run += 1
            worst = max(worst, run)
        else:
            run = 0
    return worst


def marker_precision_recall(clip: ReferenceClip, char: CharacterDef) -> tuple[float, float]:
    """Promotion markers scored against the generating script's schedule."""
    if not clip.markers_inferred:
        raise ClipError("infer_contact_markers must run first")
    truth = np.zeros((clip.frame_count, clip.n_links), dtype=int)
    names = [l.name for l in char.links]
    for name, ranges in scripted_contact_frames(clip).items():
        i = names.index(name)
        for a, b in ranges:
            truth[a:b, i] = 1
    pred = clip.contact_b
    tp = int(((pred == 1) & (truth == 1)).sum())
    fp = int(((pred == 1) & (truth == 0)).sum())
    fn = int(((pred == 0) & (truth == 1)).sum())
    precision = tp / (tp + fp) if tp + fp else 1.0
    recall = tp / (tp + fn) if tp + fn else 1.0
    return precision, recall


# ---------------------------------------------------------------------------
# serialization


_ARRAY_FIELDS = [
    "root", "joint_q", "link_pos", "link_angle", "link_vel", "link_angvel",
    "obj_pose", "obj_vel", "dvec", "dist", "link_clearance", "obj_clearance",
]
_MARKER_FIELDS = ["gate", "sigma", "contact_b", "contact_p", "contact_g", "tri",
                  "hand_markers"]


def save_clip(clip: ReferenceClip, path) -> None:
    """Line-delimited JSON: one header record then one record per frame."""
    header = {
        "format": CLIP_FORMAT,
        "version": CLIP_VERSION,
        "fps": clip.fps,
        "frames": clip.frame_count,
        "n_links": clip.n_links,
        "n_joints": clip.n_joints,
        "markers_inferred": clip.markers_inferred,
        "metadata": clip.metadata,
    }
    with open(path, "w") as fh:
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for t in range(clip.frame_count):
            rec = {}
            for name in _ARRAY_FIELDS:
                rec[name] = np.asarray(getattr(clip, name))[t].tolist()
            if clip.markers_inferred:
                for name in _MARKER_FIELDS:
                    arr = getattr(clip, name)
                    v = arr[t]
                    rec[name] = v.tolist() if isinstance(v, np.ndarray) else (
                        bool(v) if name == "gate" else float(v))
            fh.write(json.dumps(rec) + "\n")


def load_clip(path, char: CharacterDef | None = None) -> ReferenceClip:
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ClipError(f"{path}: empty clip file")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as e:
        raise ClipError(f"{path}: malformed header at line 1: {e}") from e
    if header.get("format") != CLIP_FORMAT:
        raise ClipError(f"{path}: not a {CLIP_FORMAT} file")
    if header.get("version") != CLIP_VERSION:
        raise ClipError(f"{path}: unsupported clip version {header.get('version')!r} "
                        f"(expected {CLIP_VERSION})")
    frames = header["frames"]
    if len(lines) - 1 != frames:
        raise ClipError(f"{path}: truncated clip: header promises {frames} frames, "
                        f"found {len(lines) - 1} (file ends at line {len(lines)})")
    if char is not None:
        if header["n_links"] != char.n_links or header["n_joints"] != char.n_joints:
            raise ClipError(
                f"{path}: clip dimensions ({header['n_links']} links, "
                f"{header['n_joints']} joints) do not match character "
                f"'{char.name}' ({char.n_links} links, {char.n_joints} joints)")
    records = []
    for lineno, line in enumerate(lines[1:], start=2):
        try:
            records.append(json.loads(line))
        except json.JSONDecodeError as e:
            raise ClipError(f"{path}: malformed frame record at line {lineno}: {e}") from e
    arrays = {name: np.array([r[name] for r in records], dtype=float)
              for name in _ARRAY_FIELDS}
    clip = ReferenceClip(fps=header["fps"], metadata=header["metadata"], **arrays)
    if header.get("markers_inferred"):
        clip.gate = np.array([r["gate"] for r in records], dtype=bool)
        clip.sigma = np.array([r["sigma"] for r in records], dtype=float)
        for name in ("contact_b", "contact_p", "contact_g", "tri", "hand_markers"):
            setattr(clip, name, np.array([r[name] for r in records], dtype=int))
        clip.markers_inferred = True
    return clip
