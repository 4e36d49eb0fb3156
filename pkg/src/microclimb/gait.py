"""Periodic gait sequencing and base posing from the contact regression plane.

The desired base pose for each supporting phase comes from the least-squares
plane through the current contact points: the centroid fixes the horizontal
position, the plane frame fixes the attitude, and the height is the nominal
stance height plus a collision-avoidance bump

    z' = p_cz + h_n + max|d_coll| + h_add - b_low

applied only when the nominal pose (or the base path toward it) intersects
the terrain.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateGeometry, InfeasiblePlan, OutOfBounds
from .geometry import PoseCurve, quat_normalize, rot_to_quat
from .model import RobotModel, RobotState, inverse_kinematics
from .terrain import TerrainMap, base_collision_depth, elevation, footprint_points


@dataclass
class GaitConfig:
    n_limbs: int
    swing_period: float                 # T_sw; total period T = 2 n T_sw
    stride: float
    step_height: float
    stance_height: float                # h_n
    clearance_margin: float = 0.02      # h_add
    limb_order: tuple[int, ...] | None = None
    release_time: float = 0.0           # dwell at the start of a swing phase
    grasp_time: float = 0.0             # dwell at the start of a support phase
    heading: float = 0.0                # walk direction, radians from +x

    def __post_init__(self):
        if self.swing_period <= 0.0:
            raise ValueError("swing_period must be > 0")
        if self.stride < 0.0 or self.step_height <= 0.0:
            raise ValueError("stride must be >= 0 and step_height > 0")
        if self.release_time < 0.0 or self.grasp_time < 0.0:
            raise ValueError("dwell times must be >= 0")
        if self.release_time >= self.swing_period or self.grasp_time >= self.swing_period:
            raise ValueError("dwell times must leave room for motion within a phase")
        if self.limb_order is None:
            # rear limbs first, then the front ones (quadruped indexing: FL FR HL HR)
            self.limb_order = (2, 3, 0, 1) if self.n_limbs == 4 else tuple(range(self.n_limbs))

    @property
    def total_period(self) -> float:
        return 2.0 * self.n_limbs * self.swing_period

    @property
    def heading_vec(self) -> np.ndarray:
        return np.array([np.cos(self.heading), np.sin(self.heading), 0.0])


@dataclass
class SupportPlane:
    centroid: np.ndarray
    normal: np.ndarray                  # unit, world z component > 0
    orientation: np.ndarray             # quaternion of the plane frame
    residual: float                     # rms vertical fit residual

    def height_at(self, x: float, y: float) -> float:
        """z of the plane surface at horizontal position (x, y)."""
        n = self.normal
        return self.centroid[2] - (n[0] * (x - self.centroid[0]) + n[1] * (y - self.centroid[1])) / n[2]


def regression_plane(points: np.ndarray, x_hint: np.ndarray | None = None) -> SupportPlane:
    """Least-squares (vertical residual) plane through the contact points.

    With two points the plane degenerates to the line through them; the frame
    keeps the line as its x axis. Raises DegenerateGeometry for collinear
    3-D point sets.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 3 or len(pts) < 2:
        raise DegenerateGeometry("need at least two 3-D contact points")
    centroid = pts.mean(axis=0)

    if len(pts) == 2:
        u = pts[1] - pts[0]
        nu = np.linalg.norm(u)
        if nu < 1e-12:
            raise DegenerateGeometry("coincident contact points")
        u = u / nu
        z = np.array([0.0, 0.0, 1.0])
        normal = z - np.dot(z, u) * u
        nn = np.linalg.norm(normal)
        normal = z if nn < 1e-12 else normal / nn
        x_axis = u if u[2] <= 0.999 else np.array([1.0, 0.0, 0.0])
        x_axis = x_axis - np.dot(x_axis, normal) * normal
        x_axis /= np.linalg.norm(x_axis)
        if x_axis[0] < 0:
            x_axis = -x_axis
        y_axis = np.cross(normal, x_axis)
        R = np.column_stack([x_axis, y_axis, normal])
        return SupportPlane(centroid, normal, rot_to_quat(R), residual=0.0)

    # z = a x + b y + c by normal equations on centered coordinates
    d = pts - centroid
    A = np.column_stack([d[:, 0], d[:, 1]])
    AtA = A.T @ A
    if np.linalg.matrix_rank(AtA, tol=1e-12) < 2:
        raise DegenerateGeometry("contact points are collinear")
    ab = np.linalg.solve(AtA, A.T @ d[:, 2])
    normal = np.array([-ab[0], -ab[1], 1.0])
    normal /= np.linalg.norm(normal)
    fit = A @ ab
    residual = float(np.sqrt(np.mean((d[:, 2] - fit) ** 2)))

    hint = np.array([1.0, 0.0, 0.0]) if x_hint is None else np.asarray(x_hint, dtype=float)
    x_axis = hint - np.dot(hint, normal) * normal
    nx = np.linalg.norm(x_axis)
    if nx < 1e-9:
        x_axis = np.array([0.0, 1.0, 0.0]) - normal[1] * normal
        nx = np.linalg.norm(x_axis)
    x_axis /= nx
    y_axis = np.cross(normal, x_axis)
    R = np.column_stack([x_axis, y_axis, normal])
    return SupportPlane(centroid, normal, rot_to_quat(R), residual=residual)


def desired_base_pose(
    plane: SupportPlane,
    config: GaitConfig,
    model: RobotModel,
    terrain: TerrainMap,
    path_from: tuple[np.ndarray, np.ndarray] | None = None,
    footprint_samples: int = 5,
    path_waypoints: int = 5,
) -> tuple[np.ndarray, np.ndarray]:
    """Desired base (position, quaternion) over a support plane.

    The height starts at centroid + h_n; if that pose or any sampled waypoint
    of the base path toward it collides with the terrain, the height is raised
    by the worst penetration plus the clearance margin minus b_low.
    """
    pos = np.array([plane.centroid[0], plane.centroid[1], plane.centroid[2] + config.stance_height])
    quat = quat_normalize(plane.orientation)
    fp = footprint_points(model.footprint_half_extents, footprint_samples)

    poses = [(pos, quat)]
    if path_from is not None:
        curve = PoseCurve(path_from[0], path_from[1], pos, quat, 0.0, 1.0)
        for tau in np.linspace(0.0, 1.0, path_waypoints + 2)[1:-1]:
            poses.append(curve.pose(tau))

    worst = 0.0
    for p, q in poses:
        _, pen = base_collision_depth(terrain, p, q, fp, model.b_low)
        worst = max(worst, pen)
    if worst > 0.0:
        pos = pos.copy()
        pos[2] = (
            plane.centroid[2]
            + config.stance_height
            + worst
            + config.clearance_margin
            - model.b_low
        )
    return pos, quat


def next_foothold(current, heading: np.ndarray, stride: float, terrain: TerrainMap) -> np.ndarray:
    """Advance a foothold by stride along the horizontal heading, z from the map."""
    cur = np.asarray(current, dtype=float)
    h = np.asarray(heading, dtype=float)
    target_xy = cur[:2] + stride * h[:2]
    return np.array([target_xy[0], target_xy[1], elevation(terrain, target_xy[0], target_xy[1])])


@dataclass
class SwingPhase:
    limb: int
    start_foothold: np.ndarray
    target_foothold: np.ndarray
    t_start: float
    t_end: float
    release_end: float                  # gripper opens at this time

    kind: str = field(default="swing", init=False)

    @property
    def duration(self) -> float:
        return self.t_end - self.t_start


@dataclass
class SupportPhase:
    base_from: tuple[np.ndarray, np.ndarray]
    base_to: tuple[np.ndarray, np.ndarray]
    t_start: float
    t_end: float
    grasp_end: float                    # gripper of the just-landed limb closes here
    grasped_limb: int

    kind: str = field(default="base", init=False)

    @property
    def duration(self) -> float:
        return self.t_end - self.t_start


@dataclass
class GaitPlan:
    phases: list
    config: GaitConfig
    initial_footholds: np.ndarray
    initial_base: tuple[np.ndarray, np.ndarray]

    @property
    def duration(self) -> float:
        return self.phases[-1].t_end if self.phases else 0.0


def initial_stance(
    model: RobotModel,
    config: GaitConfig,
    terrain: TerrainMap,
    start_xy=(0.0, 0.0),
) -> tuple[np.ndarray, tuple[np.ndarray, np.ndarray]]:
    """Initial footholds from the nominal pattern plus the matching base pose."""
    if model.nominal_foot_offsets is None:
        raise InfeasiblePlan("robot model lacks a nominal stance pattern")
    c, s = np.cos(config.heading), np.sin(config.heading)
    R2 = np.array([[c, -s], [s, c]])
    feet = []
    for off in model.nominal_foot_offsets:
        xy = np.asarray(start_xy) + R2 @ off
        feet.append([xy[0], xy[1], elevation(terrain, xy[0], xy[1])])
    feet = np.array(feet)
    plane = regression_plane(feet, x_hint=config.heading_vec) if len(feet) >= 3 else regression_plane(feet)
    base = desired_base_pose(plane, config, model, terrain)
    return feet, base


def build_gait_plan(
    model: RobotModel,
    config: GaitConfig,
    terrain: TerrainMap,
    n_cycles: int,
    start_xy=(0.0, 0.0),
    adjust_base: bool = True,
) -> GaitPlan:
    """Alternating swing/support phases for n_cycles of the periodic gait.

    Every planned foothold and base pose is validated by IK; failures raise
    InfeasiblePlan with the offending phase index. With adjust_base False the
    base keeps nominal height and level attitude (no collision avoidance),
    which is the baseline-strategy behaviour.
    """
    feet, base0 = initial_stance(model, config, terrain, start_xy)
    footholds = feet.copy()
    base_pose = base0
    phases: list = []
    t = 0.0
    heading = config.heading_vec

    def check_ik(pose, targets, phase_index):
        for limb, target in targets:
            try:
                inverse_kinematics(model, pose[0], pose[1], limb, target)
            except Exception as exc:
                raise InfeasiblePlan(
                    f"phase {phase_index}: limb {limb} cannot reach {np.round(target, 3)} ({exc})",
                    phase_index=phase_index,
                ) from exc

    check_ik(base0, [(i, footholds[i]) for i in range(model.n_limbs)], 0)

    for _ in range(n_cycles):
        for limb in config.limb_order:
            try:
                target = next_foothold(footholds[limb], heading, config.stride, terrain)
            except OutOfBounds as exc:
                raise InfeasiblePlan(
                    f"phase {len(phases)}: foothold for limb {limb} leaves the map",
                    phase_index=len(phases),
                ) from exc
            swing = SwingPhase(
                limb=limb,
                start_foothold=footholds[limb].copy(),
                target_foothold=target,
                t_start=t,
                t_end=t + config.swing_period,
                release_end=t + config.release_time,
            )
            check_ik(base_pose, [(limb, target)], len(phases))
            phases.append(swing)
            t += config.swing_period

            footholds[limb] = target
            if adjust_base:
                plane = (
                    regression_plane(footholds, x_hint=heading)
                    if model.n_limbs >= 3
                    else regression_plane(footholds)
                )
                new_base = desired_base_pose(
                    plane, config, model, terrain, path_from=base_pose
                )
            else:
                centroid = footholds.mean(axis=0)
                new_base = (
                    np.array([centroid[0], centroid[1], centroid[2] + config.stance_height]),
                    np.array([1.0, 0.0, 0.0, 0.0]),
                )
            support = SupportPhase(
                base_from=(base_pose[0].copy(), base_pose[1].copy()),
                base_to=(new_base[0].copy(), new_base[1].copy()),
                t_start=t,
                t_end=t + config.swing_period,
                grasp_end=t + config.grasp_time,
                grasped_limb=limb,
            )
            check_ik(new_base, [(i, footholds[i]) for i in range(model.n_limbs)], len(phases))
            phases.append(support)
            t += config.swing_period
            base_pose = new_base

    return GaitPlan(phases=phases, config=config, initial_footholds=feet, initial_base=base0)


def export_plan_csv(plan: GaitPlan, path) -> None:
    """Human-readable phase table."""
    with open(path, "w", encoding="utf-8") as f:
        f.write("index,kind,limb,t_start,t_end,target_x,target_y,target_z\n")
        for idx, ph in enumerate(plan.phases):
            if ph.kind == "swing":
                tgt = ph.target_foothold
                limb = ph.limb
            else:
                tgt = ph.base_to[0]
                limb = ph.grasped_limb
            f.write(
                f"{idx},{ph.kind},{limb},{ph.t_start!r},{ph.t_end!r},"
                f"{tgt[0]!r},{tgt[1]!r},{tgt[2]!r}\n"
            )
