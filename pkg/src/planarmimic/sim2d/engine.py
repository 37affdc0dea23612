"""Impulse-based planar dynamics for one articulated character and one free object.

Solver layout per control step: two substeps, each integrating PD and gravity
forces, solving velocity constraints (joints, joint limits, contacts with
Coulomb friction), integrating positions, then running a positional
correction pass (anchor coincidence, limit projection, penetration push-out).
Everything is evaluated in a fixed order so identical inputs produce
bit-identical outputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bodies import BodyDef, Capsule, CharacterDef, Polygon
from .geometry import (
    capsule_polygon_separation,
    nearest_vector as _nearest_vector_poly,
    polygon_world,
    rotate,
    wrap_angle,
)


class SimulationError(ValueError):
    """Invalid state, action, or solver input."""


@dataclass(frozen=True)
class SimParams:
    dt: float = 1.0 / 60.0  # integration substep, s
    substeps: int = 2  # substeps per control step
    velocity_iterations: int = 4
    position_iterations: int = 4
    gravity: float = 9.81  # m/s^2, downward
    contact_offset: float = 0.02  # m, speculative contact margin
    rest_offset: float = 0.0
    contact_slop: float = 0.005  # m, allowed penetration before push-out
    baumgarte: float = 0.2
    max_depenetration_velocity: float = 100.0  # m/s
    restitution_threshold: float = 1.0  # m/s, impacts slower than this do not bounce
    ground_friction: float = 0.9
    ground_restitution: float = 0.7
    force_epsilon: float = 1.0  # N, contact flag threshold

    @property
    def control_dt(self) -> float:
        return self.dt * self.substeps


@dataclass(frozen=True)
class ContactReport:
    """Per-link contact summary for the last control step."""

    object_contact: np.ndarray  # (n,) int, 1 iff object contact force > force_epsilon
    ground_contact: np.ndarray  # (n,) int
    force: np.ndarray  # (n,) N, total contact force magnitude
    impulse: np.ndarray  # (n,2) N s, total contact impulse vector
    object_force: np.ndarray  # (n,) N
    ground_force: np.ndarray  # (n,) N
    object_ground_force: float = 0.0  # N, on the object from the ground

    @staticmethod
    def empty(n_links: int) -> "ContactReport":
        z = np.zeros(n_links)
        return ContactReport(z.astype(int), z.astype(int), z.copy(), np.zeros((n_links, 2)),
                             z.copy(), z.copy(), 0.0)


@dataclass(frozen=True)
class SimState:
    link_pos: np.ndarray  # (n,2) m
    link_angle: np.ndarray  # (n,) rad
    link_vel: np.ndarray  # (n,2) m/s
    link_angvel: np.ndarray  # (n,) rad/s
    obj_pos: np.ndarray  # (2,) m
    obj_angle: float
    obj_vel: np.ndarray  # (2,) m/s
    obj_angvel: float
    time: float
    report: ContactReport

    def copy(self) -> "SimState":
        return SimState(self.link_pos.copy(), self.link_angle.copy(), self.link_vel.copy(),
                        self.link_angvel.copy(), self.obj_pos.copy(), self.obj_angle,
                        self.obj_vel.copy(), self.obj_angvel, self.time, self.report)

    def all_finite(self) -> bool:
        return bool(
            np.isfinite(self.link_pos).all() and np.isfinite(self.link_angle).all()
            and np.isfinite(self.link_vel).all() and np.isfinite(self.link_angvel).all()
            and np.isfinite(self.obj_pos).all() and math.isfinite(self.obj_angle)
            and np.isfinite(self.obj_vel).all() and math.isfinite(self.obj_angvel)
            and math.isfinite(self.time)
        )


@dataclass
class StepDiagnostics:
    """Momentum bookkeeping for the last control step (test oracle support)."""

    object_impulse_from_links: tuple[float, float] = (0.0, 0.0)
    object_impulse_from_ground: tuple[float, float] = (0.0, 0.0)


class _WorkBody:
    __slots__ = ("px", "py", "ang", "vx", "vy", "w", "inv_m", "inv_i",
                 "shape", "friction", "restitution", "touched", "pre_vx", "pre_vy", "pre_w")

    def __init__(self, body: BodyDef):
        self.inv_m = 1.0 / body.mass
        self.inv_i = 1.0 / body.inertia
        self.shape = body.shape
        self.friction = body.friction
        self.restitution = body.restitution
        self.px = self.py = self.ang = 0.0
        self.vx = self.vy = self.w = 0.0
        self.touched = False
        self.pre_vx = self.pre_vy = self.pre_w = 0.0


class _Contact:
    __slots__ = ("a", "b", "nx", "ny", "px", "py", "sep", "mu", "e", "v_approach",
                 "jn", "jt", "inv_kn", "inv_kt", "target", "link", "kind", "key",
                 "app_jx", "app_jy")

    def __init__(self):
        self.jn = 0.0
        self.jt = 0.0
        self.app_jx = 0.0
        self.app_jy = 0.0


def _capsule_endpoints(b: _WorkBody) -> tuple[tuple[float, float], tuple[float, float]]:
    hl = b.shape.half_length
    c, s = math.cos(b.ang), math.sin(b.ang)
    return (b.px - c * hl, b.py - s * hl), (b.px + c * hl, b.py + s * hl)


def nearest_vector(point, obj_pos, obj_angle: float, obj: BodyDef):
    """Vector from a world point to the closest point on the object boundary."""
    if not isinstance(obj.shape, Polygon):
        raise SimulationError("nearest_vector requires a polygon object")
    verts = polygon_world(list(obj.shape.vertices), (float(obj_pos[0]), float(obj_pos[1])),
                          float(obj_angle))
    return np.array(_nearest_vector_poly((float(point[0]), float(point[1])), verts))


def link_separations(link_pos: np.ndarray, link_angle: np.ndarray, char: CharacterDef,
                     obj_pos: np.ndarray, obj_angle: float, obj: BodyDef) -> tuple[np.ndarray, np.ndarray]:
    """Surface separation vectors from each link to the object.

    Returns (vectors (n,2), distances (n,)); vectors are zero for touching or
    penetrating links so that contact implies zero distance.
    """
    verts = polygon_world(list(obj.shape.vertices), (float(obj_pos[0]), float(obj_pos[1])),
                          float(obj_angle))
    n = char.n_links
    vecs = np.zeros((n, 2))
    dists = np.zeros(n)
    for i in range(n):
        shape = char.links[i].shape
        hl = shape.half_length
        c, s = math.cos(link_angle[i]), math.sin(link_angle[i])
        a = (link_pos[i, 0] - c * hl, link_pos[i, 1] - s * hl)
        b = (link_pos[i, 0] + c * hl, link_pos[i, 1] + s * hl)
        sep, nrm, _ = capsule_polygon_separation(a, b, shape.radius, verts)
        if sep > 0.0:
            vecs[i, 0] = -nrm[0] * sep
            vecs[i, 1] = -nrm[1] * sep
            dists[i] = sep
    return vecs, dists


def link_ground_clearance(link_pos: np.ndarray, link_angle: np.ndarray,
                          char: CharacterDef) -> np.ndarray:
    """Per-link clearance between the link surface and the ground plane."""
    n = char.n_links
    out = np.zeros(n)
    for i in range(n):
        shape = char.links[i].shape
        hl, r = shape.half_length, shape.radius
        s = math.sin(link_angle[i])
        out[i] = link_pos[i, 1] - abs(s) * hl - r
    return out


def object_ground_clearance(obj_pos: np.ndarray, obj_angle: float, obj: BodyDef) -> float:
    verts = polygon_world(list(obj.shape.vertices), (float(obj_pos[0]), float(obj_pos[1])),
                          float(obj_angle))
    return min(v[1] for v in verts)


class Simulator:
    """Deterministic stepping of one character plus one dynamic convex object.

    Single-threaded; instances may be used from different threads only when
    idle between calls.
    """

    def __init__(self, character: CharacterDef, obj: BodyDef, params: SimParams | None = None):
        if not isinstance(obj.shape, Polygon):
            raise SimulationError("the dynamic object must be a convex polygon")
        self.char = character
        self.obj = obj
        self.params = params or SimParams()
        self._bodies = [_WorkBody(l) for l in character.links] + [_WorkBody(obj)]
        self._obj_idx = character.n_links
        self._obj_radius = max(math.hypot(*v) for v in obj.shape.vertices)
        self._state: SimState | None = None
        self._warm: dict[tuple, tuple[float, float]] = {}
        self._warm_joints: list[tuple[float, float]] = [(0.0, 0.0)] * character.n_joints
        self._warm_pd: list[float] = [0.0] * character.n_joints
        self.last_diagnostics = StepDiagnostics()

    # -- state plumbing -------------------------------------------------

    @property
    def state(self) -> SimState:
        if self._state is None:
            raise SimulationError("simulator state is unset; call set_state first")
        return self._state

    def set_state(self, state: SimState) -> None:
        if not state.all_finite():
            raise SimulationError("set_state rejected: non-finite values in state")
        self._check_kinematic_consistency(state)
        n = self.char.n_links
        for i in range(n):
            b = self._bodies[i]
            b.px, b.py = float(state.link_pos[i, 0]), float(state.link_pos[i, 1])
            b.ang = float(state.link_angle[i])
            b.vx, b.vy = float(state.link_vel[i, 0]), float(state.link_vel[i, 1])
            b.w = float(state.link_angvel[i])
        o = self._bodies[self._obj_idx]
        o.px, o.py = float(state.obj_pos[0]), float(state.obj_pos[1])
        o.ang = float(state.obj_angle)
        o.vx, o.vy = float(state.obj_vel[0]), float(state.obj_vel[1])
        o.w = float(state.obj_angvel)
        self._warm.clear()
        self._warm_joints = [(0.0, 0.0)] * self.char.n_joints
        self._warm_pd = [0.0] * self.char.n_joints
        self._state = state.copy()

    def _check_kinematic_consistency(self, state: SimState, tol: float = 1e-3) -> None:
        for j in self.char.joints:
            pa = _anchor_world(state.link_pos[j.parent], state.link_angle[j.parent], j.parent_anchor)
            pc = _anchor_world(state.link_pos[j.child], state.link_angle[j.child], j.child_anchor)
            err = math.hypot(pa[0] - pc[0], pa[1] - pc[1])
            if err > tol:
                raise SimulationError(
                    f"set_state rejected: joint '{j.name}' anchors disagree by {err:.4g} m "
                    f"(tolerance {tol:g} m)")

    def _snapshot(self, report: ContactReport) -> SimState:
        n = self.char.n_links
        link_pos = np.empty((n, 2))
        link_angle = np.empty(n)
        link_vel = np.empty((n, 2))
        link_angvel = np.empty(n)
        for i in range(n):
            b = self._bodies[i]
            link_pos[i] = (b.px, b.py)
            link_angle[i] = b.ang
            link_vel[i] = (b.vx, b.vy)
            link_angvel[i] = b.w
        o = self._bodies[self._obj_idx]
        t = self._state.time + self.params.control_dt if self._state is not None else 0.0
        return SimState(link_pos, link_angle, link_vel, link_angvel,
                        np.array((o.px, o.py)), o.ang, np.array((o.vx, o.vy)), o.w, t, report)

    # -- stepping --------------------------------------------------------

    def step(self, action: np.ndarray) -> SimState:
        """Advance one control step (params.substeps integration substeps)."""
        action = np.asarray(action, dtype=float)
        if action.shape != (self.char.n_joints,):
            raise SimulationError(
                f"action has shape {action.shape}, expected ({self.char.n_joints},)")
        if not np.isfinite(action).all():
            raise SimulationError("step rejected: non-finite action")
        if self._state is None or not self.state.all_finite():
            raise SimulationError("step rejected: non-finite simulator state")
        targets = self.char.clamp_action(action)

        n = self.char.n_links
        imp_obj = np.zeros((n, 2))
        imp_gnd = np.zeros((n, 2))
        obj_from_links = [0.0, 0.0]
        obj_from_ground = [0.0, 0.0]
        for _ in range(self.params.substeps):
            self._substep(targets, imp_obj, imp_gnd, obj_from_links, obj_from_ground)

        cdt = self.params.control_dt
        obj_force = np.hypot(imp_obj[:, 0], imp_obj[:, 1]) / cdt
        gnd_force = np.hypot(imp_gnd[:, 0], imp_gnd[:, 1]) / cdt
        eps = self.params.force_epsilon
        report = ContactReport(
            object_contact=(obj_force > eps).astype(int),
            ground_contact=(gnd_force > eps).astype(int),
            force=np.hypot(imp_obj[:, 0] + imp_gnd[:, 0], imp_obj[:, 1] + imp_gnd[:, 1]) / cdt,
            impulse=imp_obj + imp_gnd,
            object_force=obj_force,
            ground_force=gnd_force,
            object_ground_force=math.hypot(obj_from_ground[0], obj_from_ground[1]) / cdt,
        )
        self.last_diagnostics = StepDiagnostics(
            object_impulse_from_links=(obj_from_links[0], obj_from_links[1]),
            object_impulse_from_ground=(obj_from_ground[0], obj_from_ground[1]),
        )
        state = self._snapshot(report)
        if not state.all_finite():
            raise SimulationError("simulation diverged: non-finite state after step")
        self._state = state
        return state

    def _substep(self, targets, imp_obj, imp_gnd, obj_from_links, obj_from_ground) -> None:
        p = self.params
        dt = p.dt
        bodies = self._bodies
        n_links = self.char.n_links

        for b in bodies:
            b.pre_vx, b.pre_vy, b.pre_w = b.vx, b.vy, b.w
            b.vy -= p.gravity * dt
            b.touched = False

        joints = self._build_joint_constraints()
        contacts = self._build_contacts()
        self._warm_start(joints, contacts)

        for _ in range(p.velocity_iterations):
            for k, jc in enumerate(joints):
                self._solve_pd_velocity(jc, float(targets[k]), dt)
            for jc in joints:
                self._solve_joint_velocity(jc)
            for jc in joints:
                self._solve_limit_velocity(jc)
            for c in contacts:
                self._solve_contact_velocity(c)
        self._warm = {c.key: (c.jn, c.jt) for c in contacts}
        self._warm_joints = [(jc.acc_jx, jc.acc_jy) for jc in joints]
        self._warm_pd = [jc.pd_lam for jc in joints]

        # positions: trapezoid for constraint-free bodies (exact ballistics),
        # standard semi-implicit update for bodies the solver touched
        for b in bodies:
            if b.touched:
                b.px += b.vx * dt
                b.py += b.vy * dt
                b.ang += b.w * dt
            else:
                b.px += 0.5 * (b.pre_vx + b.vx) * dt
                b.py += 0.5 * (b.pre_vy + b.vy) * dt
                b.ang += 0.5 * (b.pre_w + b.w) * dt

        self._solve_positions(contacts)

        # contact impulse bookkeeping
        for c in contacts:
            jx = c.app_jx
            jy = c.app_jy
            if c.kind == "link-object":
                imp_obj[c.link, 0] += jx
                imp_obj[c.link, 1] += jy
                obj_from_links[0] -= jx
                obj_from_links[1] -= jy
            elif c.kind == "link-ground":
                imp_gnd[c.link, 0] += jx
                imp_gnd[c.link, 1] += jy
            else:  # object-ground
                obj_from_ground[0] += jx
                obj_from_ground[1] += jy

    # -- constraint setup -------------------------------------------------

    def _build_joint_constraints(self):
        out = []
        for j in self.char.joints:
            bp = self._bodies[j.parent]
            bc = self._bodies[j.child]
            out.append(_JointWork(j, bp, bc))
        return out

    def _build_contacts(self):
        p = self.params
        contacts: list[_Contact] = []
        obj = self._bodies[self._obj_idx]
        overts = polygon_world(list(obj.shape.vertices), (obj.px, obj.py), obj.ang)

        # character links vs object, then links vs ground, then object vs ground
        for i in range(self.char.n_links):
            b = self._bodies[i]
            reach = b.shape.half_length + b.shape.radius + self._obj_radius + p.contact_offset
            if (b.px - obj.px) ** 2 + (b.py - obj.py) ** 2 > reach * reach:
                continue
            a0, a1 = _capsule_endpoints(b)
            sep, nrm, pt = capsule_polygon_separation(a0, a1, b.shape.radius, overts)
            if sep < p.contact_offset:
                contacts.append(self._make_contact(b, obj, nrm, pt, sep, i, "link-object",
                                                   ("lo", i)))
        for i in range(self.char.n_links):
            b = self._bodies[i]
            a0, a1 = _capsule_endpoints(b)
            r = b.shape.radius
            for k, e in enumerate((a0, a1)):
                sep = e[1] - r - p.rest_offset
                if sep < p.contact_offset:
                    contacts.append(self._make_contact(
                        b, None, (0.0, 1.0), (e[0], e[1] - r), sep, i, "link-ground",
                        ("lg", i, k)))
        for k, v in enumerate(overts):
            sep = v[1] - p.rest_offset
            if sep < p.contact_offset:
                contacts.append(self._make_contact(obj, None, (0.0, 1.0), v, sep,
                                                   -1, "object-ground", ("og", k)))
        return contacts

    def _warm_start(self, joints: list["_JointWork"], contacts: list[_Contact]) -> None:
        """Seed constraints with the previous substep's impulses."""
        for k, jc in enumerate(joints):
            jx, jy = self._warm_joints[k]
            if jx != 0.0 or jy != 0.0:
                jc.acc_jx, jc.acc_jy = jx, jy
                self._apply_joint_impulse(jc, jx, jy)
            lam = self._warm_pd[k]
            if lam != 0.0:
                jc.pd_lam = lam
                jc.bc.w += lam * jc.bc.inv_i
                jc.bp.w -= lam * jc.bp.inv_i
                jc.bc.touched = True
                jc.bp.touched = True
        for c in contacts:
            jn, jt = self._warm.get(c.key, (0.0, 0.0))
            if jn != 0.0 or jt != 0.0:
                c.jn, c.jt = jn, jt
                jx = jn * c.nx + jt * (-c.ny)
                jy = jn * c.ny + jt * c.nx
                c.app_jx += jx
                c.app_jy += jy
                self._apply_impulse(c.a, jx, jy, c.px, c.py, 1.0)
                if c.b is not None:
                    self._apply_impulse(c.b, jx, jy, c.px, c.py, -1.0)

    def _make_contact(self, a: _WorkBody, b: _WorkBody | None, nrm, pt, sep,
                      link: int, kind: str, key: tuple) -> _Contact:
        p = self.params
        c = _Contact()
        c.a, c.b = a, b
        c.nx, c.ny = nrm
        c.px, c.py = pt
        c.sep = sep
        c.link = link
        c.kind = kind
        c.key = key
        if b is None:
            c.mu = math.sqrt(a.friction * p.ground_friction)
            c.e = max(a.restitution, p.ground_restitution) if kind == "object-ground" else a.restitution
        else:
            c.mu = math.sqrt(a.friction * b.friction)
            c.e = max(a.restitution, b.restitution)

        rax, ray = c.px - a.px, c.py - a.py
        rn_a = rax * c.ny - ray * c.nx
        kn = a.inv_m + a.inv_i * rn_a * rn_a
        tx, ty = -c.ny, c.nx
        rt_a = rax * ty - ray * tx
        kt = a.inv_m + a.inv_i * rt_a * rt_a
        if b is not None:
            rbx, rby = c.px - b.px, c.py - b.py
            rn_b = rbx * c.ny - rby * c.nx
            kn += b.inv_m + b.inv_i * rn_b * rn_b
            rt_b = rbx * ty - rby * tx
            kt += b.inv_m + b.inv_i * rt_b * rt_b
        c.inv_kn = 1.0 / kn
        c.inv_kt = 1.0 / kt

        c.v_approach = self._rel_normal_velocity(c)
        dt = p.dt
        if sep > 0.0:
            c.target = -sep / dt  # speculative: may close the gap, not tunnel through
        else:
            c.target = 0.0
        if c.v_approach < -p.restitution_threshold:
            c.target = max(c.target, -c.e * c.v_approach)
        return c

    def _rel_normal_velocity(self, c: _Contact) -> float:
        a = c.a
        rax, ray = c.px - a.px, c.py - a.py
        vx = a.vx - a.w * ray
        vy = a.vy + a.w * rax
        if c.b is not None:
            b = c.b
            rbx, rby = c.px - b.px, c.py - b.py
            vx -= b.vx - b.w * rby
            vy -= b.vy + b.w * rbx
        return vx * c.nx + vy * c.ny

    def _rel_tangent_velocity(self, c: _Contact) -> float:
        a = c.a
        tx, ty = -c.ny, c.nx
        rax, ray = c.px - a.px, c.py - a.py
        vx = a.vx - a.w * ray
        vy = a.vy + a.w * rax
        if c.b is not None:
            b = c.b
            rbx, rby = c.px - b.px, c.py - b.py
            vx -= b.vx - b.w * rby
            vy -= b.vy + b.w * rbx
        return vx * tx + vy * ty

    # -- velocity solve ----------------------------------------------------

    def _apply_impulse(self, body: _WorkBody, jx: float, jy: float, px: float, py: float,
                       sign: float) -> None:
        body.vx += sign * jx * body.inv_m
        body.vy += sign * jy * body.inv_m
        body.w += sign * ((px - body.px) * jy - (py - body.py) * jx) * body.inv_i
        body.touched = True

    def _solve_contact_velocity(self, c: _Contact) -> None:
        vn = self._rel_normal_velocity(c)
        lam = -(vn - c.target) * c.inv_kn
        new_acc = max(0.0, c.jn + lam)
        dj = new_acc - c.jn
        if dj != 0.0:
            c.jn = new_acc
            c.app_jx += dj * c.nx
            c.app_jy += dj * c.ny
            self._apply_impulse(c.a, dj * c.nx, dj * c.ny, c.px, c.py, 1.0)
            if c.b is not None:
                self._apply_impulse(c.b, dj * c.nx, dj * c.ny, c.px, c.py, -1.0)
        if c.mu <= 0.0 or c.jn <= 0.0:
            return
        vt = self._rel_tangent_velocity(c)
        lam_t = -vt * c.inv_kt
        max_f = c.mu * c.jn
        new_t = min(max_f, max(-max_f, c.jt + lam_t))
        djt = new_t - c.jt
        if djt != 0.0:
            c.jt = new_t
            tx, ty = -c.ny, c.nx
            c.app_jx += djt * tx
            c.app_jy += djt * ty
            self._apply_impulse(c.a, djt * tx, djt * ty, c.px, c.py, 1.0)
            if c.b is not None:
                self._apply_impulse(c.b, djt * tx, djt * ty, c.px, c.py, -1.0)

    def _solve_pd_velocity(self, jc: "_JointWork", target: float, dt: float) -> None:
        """PD actuation as an implicit spring-damper impulse, iterated as a soft
        constraint so articulation coupling sets the effective stiffness."""
        j = jc.jdef
        damp = j.kp * dt + j.kd
        if damp <= 0.0:
            return
        bp, bc = jc.bp, jc.bc
        w_rel = bc.w - bp.w
        compliance = 1.0 / (dt * damp)
        c_err = w_rel + jc.pd_lam * compliance - j.kp * (target - jc.theta) / damp
        k_eff = bp.inv_i + bc.inv_i + compliance
        lam = -c_err / k_eff
        if lam == 0.0:
            return
        jc.pd_lam += lam
        bc.w += lam * bc.inv_i
        bp.w -= lam * bp.inv_i
        bc.touched = True
        bp.touched = True

    def _solve_joint_velocity(self, jc: "_JointWork") -> None:
        bp, bc = jc.bp, jc.bc
        # relative anchor velocity: child minus parent
        vrx = (bc.vx - bc.w * jc.rcy) - (bp.vx - bp.w * jc.rpy)
        vry = (bc.vy + bc.w * jc.rcx) - (bp.vy + bp.w * jc.rpx)
        jx = -(jc.im22 * vrx - jc.im12 * vry)
        jy = -(-jc.im12 * vrx + jc.im11 * vry)
        jc.acc_jx += jx
        jc.acc_jy += jy
        self._apply_joint_impulse(jc, jx, jy)

    def _apply_joint_impulse(self, jc: "_JointWork", jx: float, jy: float) -> None:
        bp, bc = jc.bp, jc.bc
        bc.vx += jx * bc.inv_m
        bc.vy += jy * bc.inv_m
        bc.w += (jc.rcx * jy - jc.rcy * jx) * bc.inv_i
        bp.vx -= jx * bp.inv_m
        bp.vy -= jy * bp.inv_m
        bp.w -= (jc.rpx * jy - jc.rpy * jx) * bp.inv_i
        bc.touched = True
        bp.touched = True

    def _solve_limit_velocity(self, jc: "_JointWork") -> None:
        j = jc.jdef
        bp, bc = jc.bp, jc.bc
        theta = wrap_angle(bc.ang - bp.ang - j.rest_offset)
        w_rel = bc.w - bp.w
        k = bp.inv_i + bc.inv_i
        if theta <= j.lo and w_rel < 0.0:
            lam = -w_rel / k
        elif theta >= j.hi and w_rel > 0.0:
            lam = -w_rel / k
        else:
            return
        bc.w += lam * bc.inv_i
        bp.w -= lam * bp.inv_i
        bc.touched = True
        bp.touched = True

    # -- position solve ----------------------------------------------------

    def _solve_positions(self, contacts: list[_Contact]) -> None:
        p = self.params
        max_corr = min(0.2, p.max_depenetration_velocity * p.dt)
        joints = [(_JointWork(j, self._bodies[j.parent], self._bodies[j.child]))
                  for j in self.char.joints]
        for _ in range(p.position_iterations):
            for c in contacts:
                self._push_out(c, max_corr)
            for jc in joints:
                self._solve_joint_position(jc)
            for jc in joints:
                self._project_limit(jc)
        # limit projections on a chain perturb each other; extra sweeps drive
        # the worst violation below the 1e-4 rad solver tolerance
        for _ in range(8):
            changed = False
            for jc in joints:
                changed = self._project_limit(jc) or changed
            if not changed:
                break

    def _push_out(self, c: _Contact, max_corr: float) -> None:
        p = self.params
        sep = self._current_separation(c)
        if sep is None or sep >= -p.contact_slop:
            return
        corr = min(p.baumgarte * (-sep - p.contact_slop), max_corr)
        a, b = c.a, c.b
        rax, ray = c.px - a.px, c.py - a.py
        rn_a = rax * c.ny - ray * c.nx
        k = a.inv_m + a.inv_i * rn_a * rn_a
        if b is not None:
            rbx, rby = c.px - b.px, c.py - b.py
            rn_b = rbx * c.ny - rby * c.nx
            k += b.inv_m + b.inv_i * rn_b * rn_b
        if k == 0.0:
            return
        lam = corr / k
        a.px += lam * c.nx * a.inv_m
        a.py += lam * c.ny * a.inv_m
        a.ang += rn_a * lam * a.inv_i
        if b is not None:
            b.px -= lam * c.nx * b.inv_m
            b.py -= lam * c.ny * b.inv_m
            b.ang -= rn_b * lam * b.inv_i

    def _current_separation(self, c: _Contact) -> float | None:
        p = self.params
        if c.kind == "object-ground":
            verts = polygon_world(list(c.a.shape.vertices), (c.a.px, c.a.py), c.a.ang)
            return min(v[1] for v in verts) - p.rest_offset
        if c.kind == "link-ground":
            a0, a1 = _capsule_endpoints(c.a)
            return min(a0[1], a1[1]) - c.a.shape.radius - p.rest_offset
        obj = c.b
        verts = polygon_world(list(obj.shape.vertices), (obj.px, obj.py), obj.ang)
        a0, a1 = _capsule_endpoints(c.a)
        sep, nrm, pt = capsule_polygon_separation(a0, a1, c.a.shape.radius, verts)
        c.nx, c.ny = nrm
        c.px, c.py = pt
        return sep

    def _solve_joint_position(self, jc: "_JointWork") -> None:
        bp, bc = jc.bp, jc.bc
        pax, pay = jc.anchor_p()
        pcx, pcy = jc.anchor_c()
        cx, cy = pcx - pax, pcy - pay  # child anchor minus parent anchor
        rpx, rpy = pax - bp.px, pay - bp.py
        rcx, rcy = pcx - bc.px, pcy - bc.py
        k11 = bp.inv_m + bc.inv_m + bp.inv_i * rpy * rpy + bc.inv_i * rcy * rcy
        k12 = -bp.inv_i * rpx * rpy - bc.inv_i * rcx * rcy
        k22 = bp.inv_m + bc.inv_m + bp.inv_i * rpx * rpx + bc.inv_i * rcx * rcx
        det = k11 * k22 - k12 * k12
        if det == 0.0:
            return
        inv = 1.0 / det
        jx = -(k22 * cx - k12 * cy) * inv
        jy = -(-k12 * cx + k11 * cy) * inv
        bc.px += jx * bc.inv_m
        bc.py += jy * bc.inv_m
        bc.ang += (rcx * jy - rcy * jx) * bc.inv_i
        bp.px -= jx * bp.inv_m
        bp.py -= jy * bp.inv_m
        bp.ang -= (rpx * jy - rpy * jx) * bp.inv_i

    def _project_limit(self, jc: "_JointWork") -> bool:
        j = jc.jdef
        bp, bc = jc.bp, jc.bc
        theta = wrap_angle(bc.ang - bp.ang - j.rest_offset)
        if theta < j.lo - 1e-9:
            delta = j.lo - theta
        elif theta > j.hi + 1e-9:
            delta = j.hi - theta
        else:
            return False
        k = bp.inv_i + bc.inv_i
        bc.ang += delta * bc.inv_i / k
        bp.ang -= delta * bp.inv_i / k
        return True


class _JointWork:
    __slots__ = ("jdef", "bp", "bc", "theta", "pd_lam", "acc_jx", "acc_jy",
                 "rpx", "rpy", "rcx", "rcy", "im11", "im12", "im22")

    def __init__(self, jdef, bp: _WorkBody, bc: _WorkBody):
        self.jdef = jdef
        self.bp = bp
        self.bc = bc
        self.theta = wrap_angle(bc.ang - bp.ang - jdef.rest_offset)
        self.pd_lam = 0.0
        self.acc_jx = 0.0
        self.acc_jy = 0.0
        # anchor offsets and effective-mass inverse are constant over the
        # velocity phase (positions do not move until integration)
        pax, pay = self.anchor_p()
        pcx, pcy = self.anchor_c()
        self.rpx, self.rpy = pax - bp.px, pay - bp.py
        self.rcx, self.rcy = pcx - bc.px, pcy - bc.py
        k11 = bp.inv_m + bc.inv_m + bp.inv_i * self.rpy ** 2 + bc.inv_i * self.rcy ** 2
        k12 = -bp.inv_i * self.rpx * self.rpy - bc.inv_i * self.rcx * self.rcy
        k22 = bp.inv_m + bc.inv_m + bp.inv_i * self.rpx ** 2 + bc.inv_i * self.rcx ** 2
        det = k11 * k22 - k12 * k12
        inv = 1.0 / det if det != 0.0 else 0.0
        self.im11 = k11 * inv
        self.im12 = k12 * inv
        self.im22 = k22 * inv

    def anchor_p(self):
        j = self.jdef
        c, s = math.cos(self.bp.ang), math.sin(self.bp.ang)
        ax, ay = j.parent_anchor
        return (self.bp.px + c * ax - s * ay, self.bp.py + s * ax + c * ay)

    def anchor_c(self):
        j = self.jdef
        c, s = math.cos(self.bc.ang), math.sin(self.bc.ang)
        ax, ay = j.child_anchor
        return (self.bc.px + c * ax - s * ay, self.bc.py + s * ax + c * ay)


def _anchor_world(pos, angle: float, local) -> tuple[float, float]:
    c, s = math.cos(float(angle)), math.sin(float(angle))
    return (float(pos[0]) + c * local[0] - s * local[1],
            float(pos[1]) + s * local[0] + c * local[1])


def state_from_kinematics(char: CharacterDef, link_pos: np.ndarray, link_angle: np.ndarray,
                          link_vel: np.ndarray, link_angvel: np.ndarray,
                          obj_pose: np.ndarray, obj_vel: np.ndarray, time: float = 0.0) -> SimState:
    """Assemble a SimState from kinematic arrays (reference frames, FK output)."""
    return SimState(
        link_pos=np.array(link_pos, dtype=float),
        link_angle=np.array(link_angle, dtype=float),
        link_vel=np.array(link_vel, dtype=float),
        link_angvel=np.array(link_angvel, dtype=float),
        obj_pos=np.array(obj_pose[:2], dtype=float),
        obj_angle=float(obj_pose[2]),
        obj_vel=np.array(obj_vel[:2], dtype=float),
        obj_angvel=float(obj_vel[2]),
        time=float(time),
        report=ContactReport.empty(char.n_links),
    )
