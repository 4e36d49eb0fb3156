"""Reaction-aware motion planning.

Two cooperating strategies shape each step so the grippers see as little
reaction force as possible:

* the swing foot follows a degree-7 Bezier curve whose two free control
  points are optimized to minimize the peak linear/angular momentum rates of
  the swinging limb while holding a target ground clearance;
* a fraction alpha of the swinging momentum is absorbed by moving the base,
  with the supporting limbs following the contact constraint, so the total
  momentum change (and hence the reaction at the grippers) shrinks. Alpha is
  scheduled from the minimum limb manipulability unless overridden.

The assembler turns a gait plan into a dense per-timestep reference timeline
(base pose, joint angles, attach/release events) ready for simulation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .errors import InfeasiblePlan, NearSingular, NoFeasibleTrajectory
from .gait import GaitPlan, SupportPhase, SwingPhase
from .geometry import PoseCurve, quat_integrate, quat_to_rot
from .model import (
    RobotModel,
    RobotState,
    base_inertia_map,
    coupling_inertia,
    inverse_kinematics,
    limb_chain,
    manipulability,
    rest_state,
    system_com,
    system_snapshot,
    truncated_pinv,
)
from .model import _fast_coupling, _jacobians_from_chain  # shared internals

BINOM7 = np.array([1.0, 7.0, 21.0, 35.0, 35.0, 21.0, 7.0, 1.0])
BINOM6 = np.array([1.0, 6.0, 15.0, 20.0, 15.0, 6.0, 1.0])
BINOM5 = np.array([1.0, 5.0, 10.0, 10.0, 5.0, 1.0])


def _bernstein(binom: np.ndarray, tau) -> np.ndarray:
    n = len(binom) - 1
    tau = np.asarray(tau, dtype=float)
    j = np.arange(n + 1)
    t = tau[..., None]
    return binom * t**j * (1.0 - t) ** (n - j)


@dataclass
class SwingTrajectory:
    """Degree-7 Bezier swing path with zero end velocity and acceleration.

    Control points 0-2 coincide with the start and 5-7 with the goal, which
    pins the boundary derivatives; points 3 and 4 are the free coordinates.
    """

    control_points: np.ndarray         # (8, 3)
    t_start: float
    t_end: float

    @classmethod
    def from_free_points(cls, start, goal, a3, a4, t_start, t_end) -> "SwingTrajectory":
        start = np.asarray(start, dtype=float)
        goal = np.asarray(goal, dtype=float)
        pts = np.vstack([start, start, start, np.asarray(a3), np.asarray(a4), goal, goal, goal])
        return cls(control_points=pts, t_start=float(t_start), t_end=float(t_end))

    @property
    def duration(self) -> float:
        return self.t_end - self.t_start

    def _tau(self, t):
        return np.clip((np.asarray(t, dtype=float) - self.t_start) / self.duration, 0.0, 1.0)

    def position(self, t) -> np.ndarray:
        return _bernstein(BINOM7, self._tau(t)) @ self.control_points

    def velocity(self, t) -> np.ndarray:
        d1 = np.diff(self.control_points, axis=0)
        return 7.0 * (_bernstein(BINOM6, self._tau(t)) @ d1) / self.duration

    def acceleration(self, t) -> np.ndarray:
        d2 = np.diff(self.control_points, axis=0, n=2)
        return 42.0 * (_bernstein(BINOM5, self._tau(t)) @ d2) / self.duration**2


def baseline_swing_path(start, goal, normal, step_height: float, t_start: float, t_end: float):
    """Conventional point-to-point swing used for comparison and seeding.

    A quintic time scaling moves the foot along the chord while the clearance
    along the support normal rises to step_height and back in two quintic
    halves (a smoothed triangular profile).
    """
    start = np.asarray(start, dtype=float)
    goal = np.asarray(goal, dtype=float)
    normal = np.asarray(normal, dtype=float)
    chord = goal - start
    T = t_end - t_start

    def position(t):
        tau = np.clip((t - t_start) / T, 0.0, 1.0)
        from .geometry import quintic_scale

        s, _, _ = quintic_scale(tau)
        if tau < 0.5:
            b, _, _ = quintic_scale(2.0 * tau)
        else:
            b, _, _ = quintic_scale(2.0 * (1.0 - tau))
        return start + s * chord + step_height * b * normal

    def velocity(t):
        tau = np.clip((t - t_start) / T, 0.0, 1.0)
        from .geometry import quintic_scale

        _, ds, _ = quintic_scale(tau)
        if tau < 0.5:
            _, db, _ = quintic_scale(2.0 * tau)
            db *= 2.0
        else:
            _, db, _ = quintic_scale(2.0 * (1.0 - tau))
            db *= -2.0
        return (ds * chord + step_height * db * normal) / T

    return position, velocity


def chord_clearance_normal(start, goal) -> np.ndarray:
    """Unit clearance direction: perpendicular to the chord, in its vertical plane."""
    u = np.asarray(goal, dtype=float) - np.asarray(start, dtype=float)
    nu = np.linalg.norm(u)
    z = np.array([0.0, 0.0, 1.0])
    if nu < 1e-12:
        return z
    u = u / nu
    n = z - np.dot(z, u) * u
    nn = np.linalg.norm(n)
    return z if nn < 1e-9 else n / nn


@dataclass
class LrstConfig:
    """Weights and optimizer settings for the low-reaction swing objective."""

    c1: float = 7.0                 # peak linear momentum rate weight
    c2: float = 1.75                # peak angular momentum rate weight
    c3: float = 30.0                # step-height tracking weight
    step_height: float = 0.04
    n_samples: int = 64
    restarts: int = 8
    max_iter: int = 2000
    tolerance: float = 1e-8

    def __post_init__(self):
        if min(self.c1, self.c2, self.c3) < 0.0:
            raise ValueError("objective weights must be >= 0")
        if self.n_samples < 16:
            raise ValueError("need at least 16 trajectory samples")


@dataclass
class MdConfig:
    """Momentum-distribution factor schedule."""

    w_min: float = 1.2e-3
    w_max: float = 2.5e-3
    fixed_alpha: float | None = None

    def __post_init__(self):
        if self.w_min >= self.w_max:
            raise ValueError("w_min must be < w_max")
        if self.fixed_alpha is not None and not (0.0 <= self.fixed_alpha <= 1.0):
            raise ValueError("fixed alpha must lie in [0, 1]")


@dataclass
class SwingProblem:
    """Frozen context for evaluating swing candidates: robot at swing start."""

    model: RobotModel
    state: RobotState               # base pose and joint angles at swing start
    limb: int
    start: np.ndarray
    goal: np.ndarray
    t_start: float
    t_end: float
    config: LrstConfig
    clearance_normal: np.ndarray = None

    def __post_init__(self):
        self.start = np.asarray(self.start, dtype=float)
        self.goal = np.asarray(self.goal, dtype=float)
        if self.clearance_normal is None:
            self.clearance_normal = chord_clearance_normal(self.start, self.goal)


def path_reaction_cost(problem: SwingProblem, position_fn) -> tuple[float, dict]:
    """Objective value of an arbitrary swing path.

    Samples the path, solves the swing-limb IK with the base frozen at the
    swing-start pose, differentiates joint angles and the resulting swing-limb
    momentum numerically, and combines peak momentum rates with the clearance
    error. Raises InfeasiblePlan when any sample is unreachable.
    """
    cfg = problem.config
    model = problem.model
    state = problem.state
    limb = problem.limb
    base_pos = state.base_pos
    base_rot = quat_to_rot(state.base_quat)
    ref = system_com(model, state)

    times = np.linspace(problem.t_start, problem.t_end, cfg.n_samples)
    dt = times[1] - times[0]
    k = model.limbs[limb].n_joints

    phis = np.empty((cfg.n_samples, k))
    seed = state.joint_angles[limb]
    positions = np.empty((cfg.n_samples, 3))
    for idx, t in enumerate(times):
        p = position_fn(t)
        positions[idx] = p
        try:
            phis[idx] = inverse_kinematics(
                model, base_pos, state.base_quat, limb, p, seed=seed, max_iter=60
            )
        except Exception as exc:
            raise InfeasiblePlan(f"swing sample {idx} unreachable: {exc}") from exc
        seed = phis[idx]

    phidot = np.gradient(phis, dt, axis=0)
    L = np.empty((cfg.n_samples, 6))
    for idx in range(cfg.n_samples):
        chain = limb_chain(model, base_pos, base_rot, limb, phis[idx])
        H = _fast_coupling(model.limbs[limb], chain, ref)
        L[idx] = H @ phidot[idx]
    Ldot = np.gradient(L, dt, axis=0)

    peak_lin = float(np.max(np.abs(Ldot[:, :3])))
    peak_ang = float(np.max(np.abs(Ldot[:, 3:])))

    chord = problem.goal - problem.start
    chord_len2 = float(np.dot(chord, chord))
    rel = positions - problem.start
    if chord_len2 > 1e-16:
        s = np.clip(rel @ chord / chord_len2, 0.0, 1.0)
        heights = (rel - s[:, None] * chord) @ problem.clearance_normal
    else:
        heights = rel @ problem.clearance_normal
    apex = float(np.max(heights))

    cost = cfg.c1 * peak_lin + cfg.c2 * peak_ang + cfg.c3 * abs(cfg.step_height - apex)
    details = {
        "peak_lin_rate": peak_lin,
        "peak_ang_rate": peak_ang,
        "apex": apex,
        "joint_samples": phis,
    }
    return cost, details


def lrst_objective(problem: SwingProblem, a3, a4) -> float:
    """Cost of the Bezier candidate with free control points a3, a4."""
    traj = SwingTrajectory.from_free_points(
        problem.start, problem.goal, a3, a4, problem.t_start, problem.t_end
    )
    cost, _ = path_reaction_cost(problem, traj.position)
    return cost


@dataclass
class SwingResult:
    trajectory: SwingTrajectory
    cost: float
    baseline_cost: float
    apex: float
    peak_lin_rate: float
    peak_ang_rate: float
    baseline_peak_lin_rate: float
    baseline_peak_ang_rate: float
    cost_history: list[float] = field(default_factory=list)


def optimize_swing(
    model: RobotModel,
    state: RobotState,
    limb: int,
    start,
    goal,
    t_start: float,
    t_end: float,
    config: LrstConfig,
    clearance_normal=None,
    seed: int = 0,
) -> SwingResult:
    """Optimize the two free Bezier control points of a swing.

    Derivative-free simplex search over the 6 free coordinates, restarted
    around a lifted straight-line seed; the best feasible candidate ever
    evaluated is returned. Raises NoFeasibleTrajectory when every restart
    fails feasibility.
    """
    if t_end <= t_start:
        raise ValueError("swing needs t_end > t_start")
    problem = SwingProblem(
        model=model,
        state=state,
        limb=limb,
        start=start,
        goal=goal,
        t_start=t_start,
        t_end=t_end,
        config=config,
        clearance_normal=clearance_normal,
    )
    cfg = config
    n = problem.clearance_normal
    chord = problem.goal - problem.start

    base_pos_fn, _ = baseline_swing_path(
        problem.start, problem.goal, n, cfg.step_height, t_start, t_end
    )
    baseline_cost, base_details = path_reaction_cost(problem, base_pos_fn)

    # lifting both free points by ~1.83 h_sw puts the curve apex near h_sw
    lift = 1.83 * cfg.step_height
    seed0 = np.concatenate(
        [problem.start + 0.45 * chord + lift * n, problem.start + 0.55 * chord + lift * n]
    )

    best: dict = {"cost": np.inf, "x": None, "details": None}
    history: list[float] = []

    def objective(x):
        try:
            traj = SwingTrajectory.from_free_points(
                problem.start, problem.goal, x[:3], x[3:], t_start, t_end
            )
            cost, details = path_reaction_cost(problem, traj.position)
        except InfeasiblePlan:
            history.append(min(best["cost"], np.inf))
            return 1e6
        if cost < best["cost"]:
            best.update(cost=cost, x=x.copy(), details=details)
        history.append(best["cost"])
        return cost

    rng = np.random.default_rng(seed)
    scale = 0.3 * (0.5 * np.linalg.norm(chord) + cfg.step_height)
    per_restart = max(20, cfg.max_iter // max(cfg.restarts, 1))
    for r in range(cfg.restarts):
        x0 = seed0 if r == 0 else seed0 + rng.normal(0.0, scale, 6)
        minimize(
            objective,
            x0,
            method="Nelder-Mead",
            options={
                "maxiter": per_restart,
                "fatol": cfg.tolerance,
                "xatol": 1e-6,
                "adaptive": False,
            },
        )
        if best["cost"] <= baseline_cost * 0.25:
            break  # already far below the comparison bar

    if best["x"] is None:
        raise NoFeasibleTrajectory(
            f"limb {limb}: no feasible swing candidate in {cfg.restarts} restarts"
        )
    traj = SwingTrajectory.from_free_points(
        problem.start, problem.goal, best["x"][:3], best["x"][3:], t_start, t_end
    )
    d = best["details"]
    return SwingResult(
        trajectory=traj,
        cost=best["cost"],
        baseline_cost=baseline_cost,
        apex=d["apex"],
        peak_lin_rate=d["peak_lin_rate"],
        peak_ang_rate=d["peak_ang_rate"],
        baseline_peak_lin_rate=base_details["peak_lin_rate"],
        baseline_peak_ang_rate=base_details["peak_ang_rate"],
        cost_history=history,
    )


def distribution_factor(model: RobotModel, state: RobotState, config: MdConfig) -> float:
    """Momentum distribution factor from the minimum manipulability over limbs.

    Linear between w_min and w_max, clamped to [0, 1]; the fixed override
    wins when set.
    """
    if config.fixed_alpha is not None:
        return float(config.fixed_alpha)
    w_min_now = min(manipulability(model, state, i) for i in range(model.n_limbs))
    alpha = (w_min_now - config.w_min) / (config.w_max - config.w_min)
    return float(np.clip(alpha, 0.0, 1.0))


def md_base_velocity(
    model: RobotModel,
    state: RobotState,
    swing: list[int],
    support: list[int],
    alpha: float,
    cond_limit: float = 1e8,
) -> np.ndarray:
    """Base twist that absorbs a fraction alpha of the swing-limb momentum.

        xdot_b = -alpha (H_b - sum_sup H_bm,i J_m,i+ J_b,i)^-1 sum_sw H_bm,i phidot_i

    using translational contact Jacobians for the supporting limbs. Raises
    NearSingular when the distribution matrix condition number exceeds
    cond_limit; callers should retry with a reduced alpha.
    """
    if not support:
        raise ValueError("support set must be non-empty")
    ref = system_com(model, state)
    M = base_inertia_map(model, state, ref).copy()
    base_rot = quat_to_rot(state.base_quat)
    for i in support:
        chain = limb_chain(model, state.base_pos, base_rot, i, state.joint_angles[i])
        H = _fast_coupling(model.limbs[i], chain, ref)
        J_m, J_b = _jacobians_from_chain(chain, state.base_pos)
        M -= H @ (truncated_pinv(J_m[:3]) @ J_b[:3])
    L_sw = np.zeros(6)
    for i in swing:
        L_sw += coupling_inertia(model, state, i, ref) @ state.joint_rates[i]
    cond = np.linalg.cond(M)
    if not np.isfinite(cond) or cond >= cond_limit:
        raise NearSingular(f"distribution matrix condition {cond:.3e} exceeds {cond_limit:.1e}")
    return -alpha * np.linalg.solve(M, L_sw)


def support_phase_base_trajectory(current_pose, desired_pose, t_start: float, t_end: float) -> PoseCurve:
    """Quintic point-to-point base pose curve with zero boundary rates."""
    return PoseCurve(
        current_pose[0], current_pose[1], desired_pose[0], desired_pose[1], t_start, t_end
    )


@dataclass
class TimelineEvent:
    step: int                       # timeline index at which the event fires
    kind: str                       # "release" | "grasp"
    limb: int
    target: np.ndarray | None = None


@dataclass
class Timeline:
    """Dense per-timestep open-loop reference for the simulator."""

    dt: float
    t: np.ndarray                   # (K,)
    base_pos: np.ndarray            # (K, 3)
    base_quat: np.ndarray           # (K, 4)
    joints: list[np.ndarray]        # per limb (K, k_i)
    joint_rates: list[np.ndarray]
    alpha: np.ndarray               # (K,)
    phase_id: np.ndarray            # (K,) index into the plan, -1 before start
    events: list[TimelineEvent]
    swing_results: list[SwingResult]
    initial_footholds: np.ndarray
    strategy: str

    @property
    def n_steps(self) -> int:
        return len(self.t)

    @property
    def duration(self) -> float:
        return float(self.t[-1])


def assemble_motion(
    model: RobotModel,
    plan: GaitPlan,
    lrst: LrstConfig,
    md: MdConfig,
    dt: float,
    strategy: str = "proposed",
    optimizer_seed: int = 0,
) -> Timeline:
    """Integrate the gait plan into a dense joint/base reference timeline.

    Swing phases combine the swing trajectory (optimized for the proposed
    strategy, the conventional quintic for the baseline) with the
    momentum-distribution base velocity integrated trapezoidally at the
    simulation step; supporting limbs follow their anchors through IK. Support
    phases move the base along the quintic pose curve with all limbs attached.
    """
    if strategy not in ("proposed", "baseline"):
        raise ValueError("strategy must be 'proposed' or 'baseline'")
    if dt <= 0.0:
        raise ValueError("dt must be > 0")

    K = int(round(plan.duration / dt)) + 1
    t_grid = np.arange(K) * dt
    base_pos = np.zeros((K, 3))
    base_quat = np.zeros((K, 4))
    joints = [np.zeros((K, l.n_joints)) for l in model.limbs]
    alpha_arr = np.zeros(K)
    phase_id = np.full(K, -1, dtype=int)
    events: list[TimelineEvent] = []
    swing_results: list[SwingResult] = []

    footholds = plan.initial_footholds.copy()
    cur_pos, cur_quat = plan.initial_base[0].copy(), plan.initial_base[1].copy()

    def ik_or_fail(limb, target, pos, quat, seed, phase_idx):
        try:
            return inverse_kinematics(model, pos, quat, limb, target, seed=seed)
        except Exception as exc:
            raise InfeasiblePlan(
                f"phase {phase_idx}: limb {limb} reference IK failed ({exc})",
                phase_index=phase_idx,
            ) from exc

    cur_joints = [
        ik_or_fail(i, footholds[i], cur_pos, cur_quat, None, 0) for i in range(model.n_limbs)
    ]

    def write(k, phase_idx, alpha_val):
        base_pos[k] = cur_pos
        base_quat[k] = cur_quat
        for i in range(model.n_limbs):
            joints[i][k] = cur_joints[i]
        alpha_arr[k] = alpha_val
        phase_id[k] = phase_idx

    write(0, -1, 0.0)

    for phase_idx, phase in enumerate(plan.phases):
        k0 = int(round(phase.t_start / dt))
        k1 = int(round(phase.t_end / dt))
        if isinstance(phase, SwingPhase):
            limb = phase.limb
            k_rel = int(round(phase.release_end / dt))
            for k in range(k0 + 1, k_rel + 1):
                write(k, phase_idx, 0.0)
            events.append(TimelineEvent(step=k_rel, kind="release", limb=limb))

            t_move0, t_move1 = k_rel * dt, k1 * dt
            support = [i for i in range(model.n_limbs) if i != limb]
            state = rest_state(model, cur_pos, cur_quat, cur_joints)
            state.attached = np.array([i != limb for i in range(model.n_limbs)])
            state.anchors = footholds.copy()
            normal = chord_clearance_normal(phase.start_foothold, phase.target_foothold)
            if strategy == "proposed":
                result = optimize_swing(
                    model,
                    state,
                    limb,
                    phase.start_foothold,
                    phase.target_foothold,
                    t_move0,
                    t_move1,
                    lrst,
                    clearance_normal=normal,
                    seed=optimizer_seed + phase_idx,
                )
                swing_results.append(result)
                path_pos, path_vel = result.trajectory.position, result.trajectory.velocity
            else:
                path_pos, path_vel = baseline_swing_path(
                    phase.start_foothold,
                    phase.target_foothold,
                    normal,
                    lrst.step_height,
                    t_move0,
                    t_move1,
                )

            prev_twist = np.zeros(6)
            for k in range(k_rel, k1):
                t_now = k * dt
                if strategy == "proposed":
                    snap = system_snapshot(model, cur_pos, cur_quat, cur_joints)
                    J_m_sw, _ = snap.jacobians(limb)
                    phidot_sw = truncated_pinv(J_m_sw[:3]) @ path_vel(t_now)
                    if md.fixed_alpha is not None:
                        a = float(md.fixed_alpha)
                    else:
                        w_now = min(snap.manipulability(i) for i in range(model.n_limbs))
                        a = float(np.clip((w_now - md.w_min) / (md.w_max - md.w_min), 0.0, 1.0))
                    M = snap.H_b.copy()
                    for i in support:
                        J_m, J_b = snap.jacobians(i)
                        M -= snap.H_bm[i] @ (truncated_pinv(J_m[:3]) @ J_b[:3])
                    L_sw = snap.H_bm[limb] @ phidot_sw
                    twist = np.zeros(6)
                    if a > 0.0:
                        cond = np.linalg.cond(M)
                        if not np.isfinite(cond) or cond >= 1e8:
                            a = 0.0           # ill-conditioned support set: no distribution
                        else:
                            twist = -a * np.linalg.solve(M, L_sw)
                else:
                    a = 0.0
                    twist = np.zeros(6)

                # trapezoidal integration of the base pose
                avg = 0.5 * (prev_twist + twist)
                cur_pos = cur_pos + dt * avg[:3]
                cur_quat = quat_integrate(cur_quat, avg[3:], dt)
                prev_twist = twist

                t_next = (k + 1) * dt
                cur_joints[limb] = ik_or_fail(
                    limb, path_pos(t_next), cur_pos, cur_quat, cur_joints[limb], phase_idx
                )
                for i in support:
                    cur_joints[i] = ik_or_fail(
                        i, footholds[i], cur_pos, cur_quat, cur_joints[i], phase_idx
                    )
                write(k + 1, phase_idx, a)
            footholds[limb] = phase.target_foothold.copy()
        else:  # SupportPhase
            k_grasp = int(round(phase.grasp_end / dt))
            for k in range(k0 + 1, k_grasp + 1):
                write(k, phase_idx, 0.0)
            events.append(
                TimelineEvent(
                    step=k_grasp,
                    kind="grasp",
                    limb=phase.grasped_limb,
                    target=footholds[phase.grasped_limb].copy(),
                )
            )
            curve = support_phase_base_trajectory(
                (cur_pos, cur_quat), phase.base_to, k_grasp * dt, k1 * dt
            )
            for k in range(k_grasp, k1):
                t_next = (k + 1) * dt
                cur_pos, cur_quat = curve.pose(t_next)
                cur_pos = np.asarray(cur_pos).copy()
                for i in range(model.n_limbs):
                    cur_joints[i] = ik_or_fail(
                        i, footholds[i], cur_pos, cur_quat, cur_joints[i], phase_idx
                    )
                write(k + 1, phase_idx, 0.0)

    joint_rates = []
    for i in range(model.n_limbs):
        rates = np.gradient(joints[i], dt, axis=0) if K > 1 else np.zeros_like(joints[i])
        joint_rates.append(rates)

    return Timeline(
        dt=dt,
        t=t_grid,
        base_pos=base_pos,
        base_quat=base_quat,
        joints=joints,
        joint_rates=joint_rates,
        alpha=alpha_arr,
        phase_id=phase_id,
        events=events,
        swing_results=swing_results,
        initial_footholds=plan.initial_footholds.copy(),
        strategy=strategy,
    )


def export_timeline_csv(timeline: Timeline, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        cols = ["t", "base_x", "base_y", "base_z", "base_qw", "base_qx", "base_qy", "base_qz"]
        for i, arr in enumerate(timeline.joints):
            cols += [f"limb{i}_q{j}" for j in range(arr.shape[1])]
        cols += ["phase_id", "alpha"]
        f.write(",".join(cols) + "\n")
        for k in range(timeline.n_steps):
            row = [timeline.t[k], *timeline.base_pos[k], *timeline.base_quat[k]]
            for arr in timeline.joints:
                row.extend(arr[k])
            row.append(int(timeline.phase_id[k]))
            row.append(timeline.alpha[k])
            f.write(",".join(repr(float(v)) if not isinstance(v, int) else str(v) for v in row) + "\n")
