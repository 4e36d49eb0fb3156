"""Fixed-step microgravity dynamics with compliant gripper contacts.

The joints are position-servoed toward the open-loop reference timeline
(critically damped second-order servo, bounded acceleration) while the
free-floating base is advanced at the momentum level: external wrenches
(gravity plus the gripper spring-dampers) integrate the total system momentum,
and the base twist is recovered from

    H_b xdot_b = L_total - sum_i H_bm,i phidot_i

each step. Reaction forces therefore emerge from the dynamics: whatever the
limbs do, the base and the contact springs absorb the momentum balance.

Grippers are 3-D point springs anchored where they grasped. A gripper
detaches when the spring force component extracting it along the outward
terrain normal exceeds the holding limit; a swing limb re-attaches at its
commanded grasp time only if it is within the capture distance of the target.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateGeometry, NumericalDivergence
from .gait import regression_plane
from .geometry import quat_integrate, quat_to_rot
from .model import RobotModel, system_snapshot
from .motion import Timeline
from .terrain import TerrainMap, surface_normal

G0 = 9.80665


@dataclass
class ContactModel:
    stiffness: float = 4000.0       # N/m
    damping: float = 1.0            # N s/m
    hold_force: float = 0.9         # N, pull-off limit
    capture_distance: float = 0.005 # grasp succeeds within this of the target

    def __post_init__(self):
        if self.stiffness <= 0.0 or self.damping < 0.0 or self.hold_force <= 0.0:
            raise ValueError("contact model needs k > 0, c >= 0, F_hold > 0")


def contact_force(
    contact: ContactModel, anchor, normal, position, velocity
) -> tuple[np.ndarray, float, bool]:
    """Spring-damper force on the gripper plus the pull-off check.

    Returns (force, pulling force along the outward normal, detach flag).
    """
    p = np.asarray(position, dtype=float)
    v = np.asarray(velocity, dtype=float)
    f = -contact.stiffness * (p - np.asarray(anchor)) - contact.damping * v
    pull = max(0.0, -float(f @ np.asarray(normal)))
    return f, pull, pull > contact.hold_force


@dataclass
class SimConfig:
    gravity_g: float = 1e-6         # gravity magnitude in units of G0
    step: float = 0.001
    servo_frequency: float = 20.0   # Hz, joint tracking bandwidth
    servo_damping: float = 1.0
    max_joint_accel: float = 400.0  # rad/s^2 bound on commanded accelerations
    abort_on_detach: bool = True
    divergence_position: float = 50.0
    divergence_speed: float = 50.0

    def __post_init__(self):
        if self.step <= 0.0 or self.gravity_g < 0.0:
            raise ValueError("need step > 0 and gravity >= 0")

    @property
    def gravity_vec(self) -> np.ndarray:
        return np.array([0.0, 0.0, -self.gravity_g * G0])


# ----------------------------------------------------------------- GIA margin


def _convex_hull_2d(pts: np.ndarray) -> np.ndarray:
    """Monotone-chain hull, CCW, no duplicate endpoint."""
    pts = np.unique(np.round(pts, 12), axis=0)
    if len(pts) <= 2:
        return pts
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    pts = pts[order]

    def turn(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    def half(points):
        out = []
        for p in points:
            while len(out) >= 2 and turn(out[-2], out[-1], p) <= 0:
                out.pop()
            out.append(p)
        return out

    lower = half(pts)
    upper = half(pts[::-1])
    return np.array(lower[:-1] + upper[:-1])


def _polygon_signed_distance(point: np.ndarray, hull: np.ndarray) -> float:
    """Min signed perpendicular distance to the hull edges (positive inside)."""
    n = len(hull)
    if n == 1:
        return -float(np.linalg.norm(point - hull[0]))
    if n == 2:
        u = hull[1] - hull[0]
        L = np.linalg.norm(u)
        t = float((point - hull[0]) @ u) / (L * L)
        return float(min(t, 1.0 - t) * L)
    best = np.inf
    for i in range(n):
        a = hull[i]
        b = hull[(i + 1) % n]
        e = b - a
        # signed perpendicular distance, positive on the inside of a CCW hull
        d = (e[0] * (point[1] - a[1]) - e[1] * (point[0] - a[0])) / np.linalg.norm(e)
        best = min(best, d)
    return float(best)


def gia_margin(
    contact_points: np.ndarray,
    com: np.ndarray,
    a_gi: np.ndarray,
    hold_floor: float = 0.0,
    hold_force: float = 0.0,
    total_mass: float = 1.0,
) -> tuple[float, bool]:
    """Signed distance (m) of the gravito-inertial tipping point inside the support.

    The line through the CoM along the gravito-inertial acceleration
    a_gi = g - a_com is intersected with the support plane of the contact
    points; the margin is the signed in-plane distance from that intersection
    to the support boundary (positive inside). Two contact points use the
    along-line coordinate instead of a polygon. With the default parameters
    this is the pure geometric rule and reduces to the classical static
    stability margin for a static robot under vertical gravity.

    Two optional terms make the margin adhesion-aware for gripping robots:

    * hold_floor (m/s^2) regularizes the intersection, modelling how much
      gravito-inertial acceleration the attached grippers can absorb, so
      near-zero accelerations in microgravity produce small tipping-point
      excursions instead of an unbounded intersection;
    * hold_force/total_mass extend each support edge outward by the moment
      capacity of the off-edge grippers (each can resist pull-off up to
      hold_force) divided by the pressing force, i.e. the boundary where
      equilibrium would actually be lost for point-adhesion contacts.

    With hold_floor = 0 and a_gi parallel to the plane the projected-CoM rule
    is used and flagged (second return value True).
    """
    pts = np.asarray(contact_points, dtype=float)
    com = np.asarray(com, dtype=float)
    a_gi = np.asarray(a_gi, dtype=float)
    if len(pts) < 2:
        raise ValueError("need at least two contact points")

    try:
        plane = regression_plane(pts)
    except DegenerateGeometry:
        plane = regression_plane(np.array([pts[0], pts[-1]]))
    normal = plane.normal
    centroid = plane.centroid

    if normal @ (com - centroid) < 0.0:
        normal = -normal
    h = float(normal @ (com - centroid))
    com_proj = com - h * normal

    a_n = -float(normal @ a_gi)                  # pressing toward the plane
    a_t = a_gi + float(normal @ a_gi) * normal   # in-plane component
    press = a_n + hold_floor
    degenerate = False
    if press <= 1e-12:
        if hold_floor == 0.0 and abs(a_n) <= 1e-12:
            tip = com_proj                       # projected-CoM rule
            degenerate = True
            press = np.inf                       # no adhesion extension
        else:
            # resultant pulls away harder than the grippers can hold
            spread = float(np.max(np.linalg.norm(pts - centroid, axis=1)))
            return -(spread + abs(h)), False
    else:
        tip = com_proj + h * a_t / press

    adh = hold_force / (total_mass * press) if np.isfinite(press) else 0.0

    # in-plane coordinates
    R = quat_to_rot(plane.orientation)
    ex, ey = R[:, 0], R[:, 1]
    to2d = lambda p: np.array([(p - centroid) @ ex, (p - centroid) @ ey])
    tip2d = to2d(tip)
    pts2d = np.array([to2d(p) for p in pts])
    if len(pts) == 2:
        a2, b2 = pts2d
        u = b2 - a2
        L = float(np.linalg.norm(u))
        t = float((tip2d - a2) @ u) / (L * L)
        # tipping about one anchor is resisted by the other at distance L
        return float(min(t, 1.0 - t) * L + adh * L), degenerate

    hull = _convex_hull_2d(pts2d)
    n_edges = len(hull)
    best = np.inf
    for i in range(n_edges):
        a2 = hull[i]
        b2 = hull[(i + 1) % n_edges]
        e = b2 - a2
        ne = float(np.linalg.norm(e))
        d_tip = (e[0] * (tip2d[1] - a2[1]) - e[1] * (tip2d[0] - a2[0])) / ne
        capacity = 0.0
        for p2 in pts2d:
            d_p = (e[0] * (p2[1] - a2[1]) - e[1] * (p2[0] - a2[0])) / ne
            if d_p > 1e-9:
                capacity += adh * d_p
        best = min(best, d_tip + capacity)
    return float(best), degenerate


# ------------------------------------------------------------------ simulator


@dataclass
class SimEvent:
    time: float
    kind: str                       # "detach" | "grasp" | "release" | "missed_grasp"
    limb: int
    detail: float = 0.0


@dataclass
class SimTrace:
    t: np.ndarray
    forces: np.ndarray              # (K, n, 3)
    pulls: np.ndarray               # (K, n)
    max_force: np.ndarray           # (K,)
    max_pull: np.ndarray
    gia: np.ndarray                 # (K,), NaN when undefined
    gia_flagged: np.ndarray         # (K,) bool
    base_pos: np.ndarray
    base_quat: np.ndarray
    base_vel: np.ndarray            # (K, 6)
    momentum: np.ndarray            # (K, 6), about the instantaneous CoM
    attached: np.ndarray            # (K, n) bool
    events: list[SimEvent]
    n_recorded: int

    def truncated(self) -> "SimTrace":
        """View limited to the recorded steps (runs can end early)."""
        k = self.n_recorded
        return SimTrace(
            t=self.t[:k],
            forces=self.forces[:k],
            pulls=self.pulls[:k],
            max_force=self.max_force[:k],
            max_pull=self.max_pull[:k],
            gia=self.gia[:k],
            gia_flagged=self.gia_flagged[:k],
            base_pos=self.base_pos[:k],
            base_quat=self.base_quat[:k],
            base_vel=self.base_vel[:k],
            momentum=self.momentum[:k],
            attached=self.attached[:k],
            events=self.events,
            n_recorded=k,
        )


class Simulator:
    """Steps a robot along a reference timeline with compliant contacts."""

    def __init__(
        self,
        model: RobotModel,
        timeline: Timeline,
        contact: ContactModel,
        config: SimConfig,
        terrain: TerrainMap | None = None,
    ):
        if abs(config.step - timeline.dt) > 1e-12:
            raise ValueError("simulation step must equal the timeline step")
        self.model = model
        self.timeline = timeline
        self.contact = contact
        self.config = config
        self.terrain = terrain

        n = model.n_limbs
        self.joint_pos = [timeline.joints[i][0].copy() for i in range(n)]
        self.joint_vel = [np.zeros(l.n_joints) for l in model.limbs]
        self.base_pos = timeline.base_pos[0].copy()
        self.base_quat = timeline.base_quat[0].copy()
        self.base_twist = np.zeros(6)
        self.momentum6 = np.zeros(6)    # about the world origin
        self.attached = np.ones(n, dtype=bool)
        # initial grasp: the grippers hold exactly where the feet start, so the
        # rest state carries no spring preload
        snap0 = system_snapshot(model, self.base_pos, self.base_quat, self.joint_pos)
        self.anchors = np.array([snap0.gripper_position(i) for i in range(n)])
        self.normals = np.array(
            [self._terrain_normal(a) for a in timeline.initial_footholds]
        )
        self.step_index = 0
        self.events: list[SimEvent] = []
        self._event_map: dict[int, list] = {}
        for ev in timeline.events:
            self._event_map.setdefault(ev.step, []).append(ev)

    def _terrain_normal(self, point) -> np.ndarray:
        if self.terrain is None:
            return np.array([0.0, 0.0, 1.0])
        return surface_normal(self.terrain, point[0], point[1])

    def run(self) -> tuple[SimTrace, dict]:
        cfg = self.config
        tl = self.timeline
        model = self.model
        n = model.n_limbs
        K = tl.n_steps
        dt = cfg.step
        g_vec = cfg.gravity_vec
        m_tot = model.total_mass
        w_n = 2.0 * np.pi * cfg.servo_frequency
        zeta = cfg.servo_damping

        trace = SimTrace(
            t=tl.t.copy(),
            forces=np.zeros((K, n, 3)),
            pulls=np.zeros((K, n)),
            max_force=np.zeros(K),
            max_pull=np.zeros(K),
            gia=np.full(K, np.nan),
            gia_flagged=np.zeros(K, dtype=bool),
            base_pos=np.zeros((K, 3)),
            base_quat=np.zeros((K, 4)),
            base_vel=np.zeros((K, 6)),
            momentum=np.zeros((K, 6)),
            attached=np.zeros((K, n), dtype=bool),
            events=self.events,
            n_recorded=0,
        )

        terminated = None
        for k in range(K):
            t_now = tl.t[k]
            # timeline-commanded grasp/release
            for ev in self._event_map.get(k, ()):
                if ev.kind == "release":
                    self.attached[ev.limb] = False
                elif ev.kind == "grasp":
                    snap_probe = system_snapshot(
                        model, self.base_pos, self.base_quat, self.joint_pos
                    )
                    foot = snap_probe.gripper_position(ev.limb)
                    dist = float(np.linalg.norm(foot - ev.target))
                    if dist <= self.contact.capture_distance:
                        self.attached[ev.limb] = True
                        self.anchors[ev.limb] = ev.target.copy()
                        self.normals[ev.limb] = self._terrain_normal(ev.target)
                        self.events.append(SimEvent(t_now, "grasp", ev.limb, dist))
                    else:
                        self.events.append(SimEvent(t_now, "missed_grasp", ev.limb, dist))

            snap = system_snapshot(
                model, self.base_pos, self.base_quat, self.joint_pos,
                reference_point=np.zeros(3),
            )

            # contact forces at the current state
            F_tot = m_tot * g_vec
            tau_tot = np.cross(snap.com, m_tot * g_vec)
            detach_now: list[int] = []
            load_accel: dict[int, np.ndarray] = {}
            for i in range(n):
                if not self.attached[i]:
                    continue
                J_m, J_b = snap.jacobians(i)
                p_g = snap.gripper_position(i)
                v_g = J_b[:3] @ self.base_twist + J_m[:3] @ self.joint_vel[i]
                f, pull, detach = contact_force(
                    self.contact, self.anchors[i], self.normals[i], p_g, v_g
                )
                trace.forces[k, i] = f
                trace.pulls[k, i] = pull
                F_tot = F_tot + f
                tau_tot = tau_tot + np.cross(p_g, f)
                # contact load deflects the servoed joints (finite actuator
                # stiffness), which is what lets reaction forces build up
                inertia = np.maximum(snap.joint_inertia_diag(i), 1e-6)
                load_accel[i] = (J_m[:3].T @ f) / inertia
                if detach:
                    detach_now.append(i)

            att_idx = np.flatnonzero(self.attached)
            norms = np.linalg.norm(trace.forces[k, att_idx], axis=1) if len(att_idx) else []
            trace.max_force[k] = float(np.max(norms)) if len(att_idx) else 0.0
            trace.max_pull[k] = float(np.max(trace.pulls[k, att_idx])) if len(att_idx) else 0.0

            if len(att_idx) >= 2:
                a_com = F_tot / m_tot
                a_gi = g_vec - a_com
                floor = len(att_idx) * self.contact.hold_force / m_tot
                try:
                    margin, flagged = gia_margin(
                        self.anchors[att_idx],
                        snap.com,
                        a_gi,
                        hold_floor=floor,
                        hold_force=self.contact.hold_force,
                        total_mass=m_tot,
                    )
                    trace.gia[k] = margin
                    trace.gia_flagged[k] = flagged
                except (DegenerateGeometry, ValueError):
                    pass

            trace.base_pos[k] = self.base_pos
            trace.base_quat[k] = self.base_quat
            trace.base_vel[k] = self.base_twist
            mom_com = self.momentum6.copy()
            mom_com[3:] -= np.cross(snap.com, mom_com[:3])
            trace.momentum[k] = mom_com
            trace.attached[k] = self.attached
            trace.n_recorded = k + 1

            for i in detach_now:
                self.attached[i] = False
                self.events.append(SimEvent(t_now, "detach", i, trace.pulls[k, i]))
            if detach_now and cfg.abort_on_detach:
                terminated = "detachment"
                break
            if k == K - 1:
                break

            # momentum update from external wrenches (about the world origin)
            self.momentum6[:3] += dt * F_tot
            self.momentum6[3:] += dt * tau_tot

            # joint servos toward the reference, plus load-induced deflection
            for i in range(n):
                q_ref = tl.joints[i][k + 1]
                qd_ref = tl.joint_rates[i][k + 1]
                acc = w_n**2 * (q_ref - self.joint_pos[i]) + 2.0 * zeta * w_n * (
                    qd_ref - self.joint_vel[i]
                )
                if i in load_accel:
                    acc = acc + load_accel[i]
                np.clip(acc, -cfg.max_joint_accel, cfg.max_joint_accel, out=acc)
                self.joint_vel[i] = self.joint_vel[i] + dt * acc
                self.joint_pos[i] = self.joint_pos[i] + dt * self.joint_vel[i]

            # base twist from the momentum balance, then positions
            residual = self.momentum6 - snap.joint_momentum(self.joint_vel)
            self.base_twist = np.linalg.solve(snap.H_b, residual)
            self.base_pos = self.base_pos + dt * self.base_twist[:3]
            self.base_quat = quat_integrate(self.base_quat, self.base_twist[3:], dt)

            if (
                not np.all(np.isfinite(self.base_pos))
                or np.linalg.norm(self.base_pos) > cfg.divergence_position
                or np.linalg.norm(self.base_twist[:3]) > cfg.divergence_speed
            ):
                raise NumericalDivergence(
                    f"state left sanity bounds at t={t_now:.3f}s: pos={self.base_pos}"
                )
            self.step_index = k + 1

        out = trace.truncated()
        summary = summarize(out, self.timeline, terminated)
        return out, summary


def summarize(trace: SimTrace, timeline: Timeline, terminated: str | None) -> dict:
    detach = [e for e in trace.events if e.kind == "detach"]
    missed = [e for e in trace.events if e.kind == "missed_grasp"]
    finite_gia = trace.gia[np.isfinite(trace.gia)]
    elapsed = float(trace.t[-1] - trace.t[0]) if len(trace.t) > 1 else 0.0
    disp = trace.base_pos[-1] - trace.base_pos[0]
    return {
        "completed": terminated is None,
        "termination": terminated or "completed",
        "strategy": timeline.strategy,
        "duration": elapsed,
        "detachments": [(e.time, e.limb) for e in detach],
        "missed_grasps": [(e.time, e.limb, e.detail) for e in missed],
        "first_failure_time": detach[0].time if detach else (missed[0].time if missed else None),
        "max_contact_force": float(np.max(trace.max_force)) if len(trace.t) else 0.0,
        "max_pull_force": float(np.max(trace.max_pull)) if len(trace.t) else 0.0,
        "min_gia_margin": float(np.min(finite_gia)) if len(finite_gia) else float("nan"),
        "mean_velocity": (np.linalg.norm(disp[:2]) / elapsed) if elapsed > 0 else 0.0,
        "displacement": disp.tolist(),
    }


def export_trace_csv(trace: SimTrace, path) -> None:
    n = trace.forces.shape[1]
    cols = ["t"]
    for i in range(n):
        cols += [f"fx_{i}", f"fy_{i}", f"fz_{i}", f"pull_{i}"]
    cols += [
        "max_force", "max_pull", "gia_margin", "gia_flagged",
        "base_x", "base_y", "base_z", "base_qw", "base_qx", "base_qy", "base_qz",
        "px", "py", "pz", "lx", "ly", "lz", "events",
    ]
    ev_by_time: dict[float, list[str]] = {}
    for e in trace.events:
        ev_by_time.setdefault(round(e.time, 9), []).append(f"{e.kind}:{e.limb}")
    with open(path, "w", encoding="utf-8") as f:
        f.write(",".join(cols) + "\n")
        for k in range(trace.n_recorded):
            row = [repr(float(trace.t[k]))]
            for i in range(n):
                row += [repr(float(v)) for v in trace.forces[k, i]]
                row.append(repr(float(trace.pulls[k, i])))
            row += [
                repr(float(trace.max_force[k])),
                repr(float(trace.max_pull[k])),
                repr(float(trace.gia[k])),
                str(int(trace.gia_flagged[k])),
            ]
            row += [repr(float(v)) for v in trace.base_pos[k]]
            row += [repr(float(v)) for v in trace.base_quat[k]]
            row += [repr(float(v)) for v in trace.momentum[k]]
            row.append(";".join(ev_by_time.get(round(float(trace.t[k]), 9), [])))
            f.write(",".join(row) + "\n")


@dataclass
class RunResult:
    scenario: "Scenario"
    terrain: TerrainMap
    plan: "GaitPlan"
    timeline: Timeline
    trace: SimTrace
    summary: dict


def run_scenario(
    scenario,
    seed_override: int | None = None,
    strategy_override: str | None = None,
    duration_override: float | None = None,
) -> RunResult:
    """Plan, assemble and simulate one scenario end to end.

    The baseline strategy swings limbs along the conventional quintic path,
    keeps the base still during swings and skips the collision-avoidance
    height adjustment; the proposed strategy enables all three.
    """
    from .gait import build_gait_plan
    from .motion import assemble_motion
    from .robots import default_quadruped, planar_biped
    from .terrain import generate_fractal

    scn = scenario.copy() if hasattr(scenario, "copy") else scenario
    values = {k: dict(v) for k, v in scn.values.items()}
    if seed_override is not None:
        values["terrain"]["seed"] = int(seed_override)
    if strategy_override is not None:
        values["run"]["strategy"] = strategy_override
    if duration_override is not None:
        values["sim"]["duration"] = float(duration_override)
    from .scenario import Scenario

    scn = Scenario(values=values, defaulted=list(scenario.defaulted), source=scenario.source)

    model = default_quadruped() if values["robot"]["model"] == "quadruped" else planar_biped()
    t = values["terrain"]
    terrain = generate_fractal(
        int(t["seed"]),
        (t["extent_x"], t["extent_y"]),
        t["resolution"],
        t["sigma"],
        origin=(t["origin_x"], t["origin_y"]),
    )
    gait = scn.gait_config()
    strategy = scn.strategy
    plan = build_gait_plan(
        model,
        gait,
        terrain,
        n_cycles=scn.cycles,
        start_xy=(values["run"]["start_x"], values["run"]["start_y"]),
        adjust_base=(strategy == "proposed"),
    )
    timeline = assemble_motion(
        model,
        plan,
        scn.lrst_config(),
        scn.md_config(),
        dt=values["sim"]["step"],
        strategy=strategy,
        optimizer_seed=int(t["seed"]),
    )
    sim = Simulator(model, timeline, scn.contact_model(), scn.sim_config(), terrain=terrain)
    trace, summary = sim.run()
    summary["scenario"] = scn.source
    summary["terrain_seed"] = int(t["seed"])
    heading = gait.heading_vec
    disp = trace.base_pos[-1] - trace.base_pos[0]
    summary["mean_velocity"] = (
        float(disp[:2] @ heading[:2]) / summary["duration"] if summary["duration"] > 0 else 0.0
    )
    return RunResult(
        scenario=scn, terrain=terrain, plan=plan, timeline=timeline, trace=trace, summary=summary
    )


def write_summary(summary: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for key in sorted(summary):
            f.write(f"{key}: {summary[key]}\n")
