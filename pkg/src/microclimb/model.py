"""Floating-base robot model: kinematics, Jacobians, momentum algebra, IK.

The robot is a single rigid base with n serial-chain limbs. Each limb joint
is revolute; its axis is fixed in the frame left by the previous link. Limb
twists and momenta are linear in the stacked velocities, which is what the
planner exploits: the 6x6 base inertia map H_b and the 6xk coupling maps
H_bm,i assemble the total momentum

    L = H_b * xdot_b + sum_i H_bm,i * phidot_i

with the angular part taken about a declared reference point (the whole-robot
center of mass unless stated otherwise).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import JointLimitViolation, UnreachableTarget
from .geometry import quat_normalize, quat_to_rot, rotation_about_axis, skew


@dataclass
class LimbModel:
    """One serial-chain limb: mount frame on the base plus per-joint geometry."""

    attach_pos: np.ndarray          # mount point in base frame (3,)
    attach_rot: np.ndarray          # mount orientation in base frame (3,3)
    axes: np.ndarray                # joint axes in parent frames (k,3), unit
    link_offsets: np.ndarray        # translation after each joint, local frame (k,3)
    link_masses: np.ndarray         # (k,)
    link_inertias: np.ndarray       # about link CoM, local frame (k,3,3)
    link_coms: np.ndarray           # CoM of each link, local frame (k,3)
    lower: np.ndarray               # joint limits (k,)
    upper: np.ndarray

    @property
    def n_joints(self) -> int:
        return len(self.axes)

    @property
    def reach(self) -> float:
        return float(np.sum(np.linalg.norm(self.link_offsets, axis=1)))

    def validate(self) -> None:
        k = self.n_joints
        if not (self.link_offsets.shape == (k, 3) and self.link_masses.shape == (k,)):
            raise ValueError("limb arrays disagree on joint count")
        if np.any(self.link_masses < 0.0):
            raise ValueError("link masses must be >= 0")
        if np.any(self.lower >= self.upper):
            raise ValueError("joint limits require lower < upper")
        for I in self.link_inertias:
            if not np.allclose(I, I.T, atol=1e-12):
                raise ValueError("link inertia tensors must be symmetric")


@dataclass
class RobotModel:
    """Base body plus limbs. The base frame origin coincides with the base CoM."""

    base_mass: float
    base_inertia: np.ndarray        # about base CoM, base frame (3,3)
    limbs: list[LimbModel]
    b_low: float = 0.0              # drop from base origin to the inferior base plane
    footprint_half_extents: tuple[float, float] = (0.1, 0.1)
    nominal_foot_offsets: np.ndarray | None = None  # horizontal stance pattern, base frame (n,2)
    name: str = "robot"

    def __post_init__(self):
        if self.base_mass <= 0.0:
            raise ValueError("base mass must be > 0")
        if len(self.limbs) < 2:
            raise ValueError("need at least 2 limbs")
        for limb in self.limbs:
            limb.validate()

    @property
    def n_limbs(self) -> int:
        return len(self.limbs)

    @property
    def total_mass(self) -> float:
        return self.base_mass + sum(float(np.sum(l.link_masses)) for l in self.limbs)


@dataclass
class RobotState:
    """Base pose/twist, joint states and per-limb contact attachment."""

    base_pos: np.ndarray
    base_quat: np.ndarray           # (w, x, y, z), unit
    base_lin_vel: np.ndarray = field(default_factory=lambda: np.zeros(3))
    base_ang_vel: np.ndarray = field(default_factory=lambda: np.zeros(3))
    joint_angles: list[np.ndarray] = field(default_factory=list)
    joint_rates: list[np.ndarray] = field(default_factory=list)
    attached: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))
    anchors: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))

    def copy(self) -> "RobotState":
        return RobotState(
            base_pos=self.base_pos.copy(),
            base_quat=self.base_quat.copy(),
            base_lin_vel=self.base_lin_vel.copy(),
            base_ang_vel=self.base_ang_vel.copy(),
            joint_angles=[q.copy() for q in self.joint_angles],
            joint_rates=[qd.copy() for qd in self.joint_rates],
            attached=self.attached.copy(),
            anchors=self.anchors.copy(),
        )

    @property
    def base_twist(self) -> np.ndarray:
        return np.concatenate([self.base_lin_vel, self.base_ang_vel])


def rest_state(model: RobotModel, base_pos, base_quat, joint_angles) -> RobotState:
    """State at rest with all grippers detached."""
    return RobotState(
        base_pos=np.asarray(base_pos, dtype=float),
        base_quat=quat_normalize(base_quat),
        joint_angles=[np.asarray(q, dtype=float).copy() for q in joint_angles],
        joint_rates=[np.zeros(l.n_joints) for l in model.limbs],
        attached=np.zeros(model.n_limbs, dtype=bool),
        anchors=np.full((model.n_limbs, 3), np.nan),
    )


@dataclass
class LimbChain:
    """World-frame kinematic data for one limb at a given configuration."""

    joint_pos: np.ndarray           # (k,3)
    joint_axis: np.ndarray          # (k,3), world frame
    link_com: np.ndarray            # (k,3)
    link_rot: np.ndarray            # (k,3,3)
    ee_pos: np.ndarray
    ee_rot: np.ndarray


def limb_chain(model: RobotModel, base_pos, base_rot, limb: int, phi) -> LimbChain:
    lm = model.limbs[limb]
    k = lm.n_joints
    R = base_rot @ lm.attach_rot
    p = base_pos + base_rot @ lm.attach_pos
    joint_pos = np.empty((k, 3))
    joint_axis = np.empty((k, 3))
    link_com = np.empty((k, 3))
    link_rot = np.empty((k, 3, 3))
    for j in range(k):
        joint_pos[j] = p
        joint_axis[j] = R @ lm.axes[j]
        R = R @ rotation_about_axis(lm.axes[j], phi[j])
        link_rot[j] = R
        link_com[j] = p + R @ lm.link_coms[j]
        p = p + R @ lm.link_offsets[j]
    return LimbChain(joint_pos, joint_axis, link_com, link_rot, ee_pos=p, ee_rot=R)


def _chains(model: RobotModel, state: RobotState) -> list[LimbChain]:
    R_b = quat_to_rot(state.base_quat)
    return [
        limb_chain(model, state.base_pos, R_b, i, state.joint_angles[i])
        for i in range(model.n_limbs)
    ]


def forward_kinematics(model: RobotModel, state: RobotState, limb: int):
    """World-frame end-effector (position, quaternion) of one limb."""
    chain = limb_chain(
        model, state.base_pos, quat_to_rot(state.base_quat), limb, state.joint_angles[limb]
    )
    from .geometry import rot_to_quat

    return chain.ee_pos, rot_to_quat(chain.ee_rot)


def limb_jacobians(model: RobotModel, state: RobotState, limb: int):
    """(J_m, J_b): joint-rate and base-twist maps to the end-effector twist.

    J_m is 6xk (linear rows first), J_b is 6x6 with the twist ordered
    (linear, angular) and referenced to the base frame origin.
    """
    chain = limb_chain(
        model, state.base_pos, quat_to_rot(state.base_quat), limb, state.joint_angles[limb]
    )
    return _jacobians_from_chain(chain, state.base_pos)


def _jacobians_from_chain(chain: LimbChain, base_pos: np.ndarray):
    J_m = np.empty((6, len(chain.joint_axis)))
    J_m[:3] = _cross_last(chain.joint_axis, chain.ee_pos[None, :] - chain.joint_pos).T
    J_m[3:] = chain.joint_axis.T
    J_b = np.eye(6)
    J_b[:3, 3:] = -skew(chain.ee_pos - base_pos)
    return J_m, J_b


def system_com(model: RobotModel, state: RobotState) -> np.ndarray:
    chains = _chains(model, state)
    return _com_from_chains(model, state, chains)


def _com_from_chains(model, state, chains) -> np.ndarray:
    acc = model.base_mass * state.base_pos
    for i, chain in enumerate(chains):
        m = model.limbs[i].link_masses
        acc = acc + m @ chain.link_com
    return acc / model.total_mass


@dataclass
class MomentumState:
    """Total momentum split by source, angular part about reference_point.

    The closure  total = base + support + swing  holds by construction.
    """

    linear: np.ndarray
    angular: np.ndarray
    base: np.ndarray                # 6-vector (lin, ang)
    support: np.ndarray
    swing: np.ndarray
    reference_point: np.ndarray

    @property
    def total(self) -> np.ndarray:
        return np.concatenate([self.linear, self.angular])


def base_inertia_map(model: RobotModel, state: RobotState, reference_point=None) -> np.ndarray:
    """H_b: 6x6 map from base twist to system momentum with joints frozen."""
    chains = _chains(model, state)
    ref = _com_from_chains(model, state, chains) if reference_point is None else reference_point
    return _base_inertia_from_chains(model, state, chains, np.asarray(ref, dtype=float))


def _base_inertia_from_chains(model, state, chains, ref) -> np.ndarray:
    R_b = quat_to_rot(state.base_quat)
    p_b = state.base_pos
    H = np.zeros((6, 6))
    m_tot = model.total_mass
    H[:3, :3] = m_tot * np.eye(3)

    # base body: CoM at the base origin
    I_base_w = R_b @ model.base_inertia @ R_b.T
    S_ref_b = skew(p_b - ref)
    H[3:, :3] += model.base_mass * S_ref_b
    H[3:, 3:] += I_base_w

    for i, chain in enumerate(chains):
        lm = model.limbs[i]
        for j in range(lm.n_joints):
            m = lm.link_masses[j]
            c = chain.link_com[j]
            Rl = chain.link_rot[j]
            I_w = Rl @ lm.link_inertias[j] @ Rl.T
            S_cb = skew(c - p_b)
            S_cr = skew(c - ref)
            H[:3, 3:] += -m * S_cb
            H[3:, :3] += m * S_cr
            H[3:, 3:] += I_w - m * S_cr @ S_cb
    return H


def coupling_inertia(model: RobotModel, state: RobotState, limb: int, reference_point=None) -> np.ndarray:
    """H_bm,i: 6xk map from limb joint rates to system momentum (base frozen)."""
    chains = _chains(model, state)
    ref = _com_from_chains(model, state, chains) if reference_point is None else reference_point
    return _coupling_from_chain(model.limbs[limb], chains[limb], np.asarray(ref, dtype=float))


def _coupling_from_chain(lm: LimbModel, chain: LimbChain, ref) -> np.ndarray:
    k = lm.n_joints
    H = np.zeros((6, k))
    for j in range(k):
        a = chain.joint_axis[j]
        p_ax = chain.joint_pos[j]
        lin = np.zeros(3)
        ang = np.zeros(3)
        for l in range(j, k):
            m = lm.link_masses[l]
            c = chain.link_com[l]
            Rl = chain.link_rot[l]
            I_w = Rl @ lm.link_inertias[l] @ Rl.T
            v = np.cross(a, c - p_ax)
            lin += m * v
            ang += I_w @ a + m * np.cross(c - ref, v)
        H[:3, j] = lin
        H[3:, j] = ang
    return H


def momentum(
    model: RobotModel,
    state: RobotState,
    support: list[int] | None = None,
    swing: list[int] | None = None,
    reference_point=None,
) -> MomentumState:
    """Total linear/angular momentum split into base, support and swing parts.

    The partition defaults to the state's contact flags (attached limbs are
    support). Each part is computed by direct per-body velocity summation,
    so coupling_inertia/base_inertia_map reproduce it exactly by linearity.
    """
    chains = _chains(model, state)
    ref = _com_from_chains(model, state, chains) if reference_point is None else np.asarray(
        reference_point, dtype=float
    )
    if support is None:
        support = [i for i in range(model.n_limbs) if state.attached[i]]
    if swing is None:
        swing = [i for i in range(model.n_limbs) if i not in support]

    p_b = state.base_pos
    v_b = state.base_lin_vel
    w_b = state.base_ang_vel
    R_b = quat_to_rot(state.base_quat)

    # base part: base body plus the base-twist-induced motion of every link
    lin_b = model.base_mass * v_b
    ang_b = (R_b @ model.base_inertia @ R_b.T) @ w_b + model.base_mass * np.cross(p_b - ref, v_b)
    for i, chain in enumerate(chains):
        lm = model.limbs[i]
        for j in range(lm.n_joints):
            m = lm.link_masses[j]
            c = chain.link_com[j]
            Rl = chain.link_rot[j]
            I_w = Rl @ lm.link_inertias[j] @ Rl.T
            v = v_b + np.cross(w_b, c - p_b)
            lin_b += m * v
            ang_b += I_w @ w_b + m * np.cross(c - ref, v)

    def limb_part(indices):
        lin = np.zeros(3)
        ang = np.zeros(3)
        for i in indices:
            lm = model.limbs[i]
            chain = chains[i]
            qd = state.joint_rates[i]
            for l in range(lm.n_joints):
                m = lm.link_masses[l]
                c = chain.link_com[l]
                Rl = chain.link_rot[l]
                I_w = Rl @ lm.link_inertias[l] @ Rl.T
                v = np.zeros(3)
                w = np.zeros(3)
                for j in range(l + 1):
                    a = chain.joint_axis[j]
                    v += qd[j] * np.cross(a, c - chain.joint_pos[j])
                    w += qd[j] * a
                lin += m * v
                ang += I_w @ w + m * np.cross(c - ref, v)
        return np.concatenate([lin, ang])

    part_sup = limb_part(support)
    part_sw = limb_part(swing)
    part_b = np.concatenate([lin_b, ang_b])
    total = part_b + part_sup + part_sw
    return MomentumState(
        linear=total[:3],
        angular=total[3:],
        base=part_b,
        support=part_sup,
        swing=part_sw,
        reference_point=ref,
    )


def _cross_last(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Cross product over the last axis without np.cross's axis bookkeeping."""
    out = np.empty(np.broadcast_shapes(a.shape, b.shape))
    a0, a1, a2 = a[..., 0], a[..., 1], a[..., 2]
    b0, b1, b2 = b[..., 0], b[..., 1], b[..., 2]
    out[..., 0] = a1 * b2 - a2 * b1
    out[..., 1] = a2 * b0 - a0 * b2
    out[..., 2] = a0 * b1 - a1 * b0
    return out


def _fast_coupling(lm: LimbModel, chain: LimbChain, ref: np.ndarray) -> np.ndarray:
    """Vectorized H_bm,i assembly (identical values to _coupling_from_chain)."""
    k = lm.n_joints
    a = chain.joint_axis
    p = chain.joint_pos
    c = chain.link_com
    m = lm.link_masses
    Iw = np.einsum("lab,lbc,ldc->lad", chain.link_rot, lm.link_inertias, chain.link_rot)
    rel = c[None, :, :] - p[:, None, :]            # (joint j, link l, 3)
    v = _cross_last(a[:, None, :], rel)
    mask = np.arange(k)[None, :] >= np.arange(k)[:, None]
    wm = mask * m[None, :]
    lin = np.einsum("jl,jlx->jx", wm, v)
    cr = _cross_last((c - ref)[None, :, :], v)
    ang = np.einsum("jl,jlx->jx", wm, cr) + np.einsum("lab,jb,jl->ja", Iw, a, mask)
    H = np.empty((6, k))
    H[:3] = lin.T
    H[3:] = ang.T
    return H


@dataclass
class SystemSnapshot:
    """All per-step kinematic/inertial aggregates computed in one pass.

    Momentum reference point is configurable (the simulator uses a fixed
    world point, planners use the instantaneous CoM).
    """

    model: RobotModel
    base_pos: np.ndarray
    base_rot: np.ndarray
    chains: list[LimbChain]
    com: np.ndarray
    reference_point: np.ndarray
    H_b: np.ndarray
    H_bm: list[np.ndarray]

    def gripper_position(self, limb: int) -> np.ndarray:
        return self.chains[limb].ee_pos

    def jacobians(self, limb: int):
        return _jacobians_from_chain(self.chains[limb], self.base_pos)

    def manipulability(self, limb: int) -> float:
        J_m, _ = self.jacobians(limb)
        Jt = J_m[:3]
        G = Jt @ Jt.T if Jt.shape[1] >= 3 else Jt.T @ Jt
        return float(np.sqrt(max(np.linalg.det(G), 0.0)))

    def joint_momentum(self, joint_rates: list[np.ndarray]) -> np.ndarray:
        """sum_i H_bm,i * phidot_i for the given rates."""
        out = np.zeros(6)
        for H, qd in zip(self.H_bm, joint_rates):
            out += H @ qd
        return out

    def joint_inertia_diag(self, limb: int) -> np.ndarray:
        """Diagonal of the limb joint-space inertia (base frozen), kg m^2."""
        lm = self.model.limbs[limb]
        chain = self.chains[limb]
        k = lm.n_joints
        a = chain.joint_axis
        rel = chain.link_com[None, :, :] - chain.joint_pos[:, None, :]
        v = _cross_last(a[:, None, :], rel)       # (j,l,3) com velocity per unit rate
        mask = np.arange(k)[None, :] >= np.arange(k)[:, None]
        Iw = np.einsum("lab,lbc,ldc->lad", chain.link_rot, lm.link_inertias, chain.link_rot)
        trans = np.einsum("jl,jlx,jlx->j", mask * lm.link_masses[None, :], v, v)
        rot = np.einsum("lab,ja,jb,jl->j", Iw, a, a, mask)
        return trans + rot


def system_snapshot(
    model: RobotModel, base_pos, base_quat, joint_angles, reference_point=None
) -> SystemSnapshot:
    base_pos = np.asarray(base_pos, dtype=float)
    base_rot = quat_to_rot(quat_normalize(base_quat))
    chains = [
        limb_chain(model, base_pos, base_rot, i, joint_angles[i]) for i in range(model.n_limbs)
    ]

    coms = [base_pos]
    masses = [model.base_mass]
    Iws = [base_rot @ model.base_inertia @ base_rot.T]
    for i, chain in enumerate(chains):
        lm = model.limbs[i]
        coms.append(chain.link_com)
        masses.append(lm.link_masses)
        Iws.append(np.einsum("lab,lbc,ldc->lad", chain.link_rot, lm.link_inertias, chain.link_rot))
    c = np.vstack([np.atleast_2d(x) for x in coms])
    m = np.concatenate([np.atleast_1d(x) for x in masses])
    Iw = np.vstack([x.reshape(-1, 3, 3) for x in Iws])
    m_tot = m.sum()
    com = (m @ c) / m_tot
    ref = com if reference_point is None else np.asarray(reference_point, dtype=float)

    u = c - ref                                    # lever about the reference
    v = c - base_pos                               # lever about the base origin
    H = np.zeros((6, 6))
    H[:3, :3] = m_tot * np.eye(3)
    H[:3, 3:] = -skew(m @ v)
    H[3:, :3] = skew(m @ u)
    # sum_l m S(u)S(v) = sum_l m (v u^T - (u.v) I)
    Svu = np.einsum("l,lx,ly->xy", m, v, u) - np.einsum("l,lx,lx->", m, u, v) * np.eye(3)
    H[3:, 3:] = Iw.sum(axis=0) - Svu
    H_bm = [_fast_coupling(model.limbs[i], chains[i], ref) for i in range(model.n_limbs)]
    return SystemSnapshot(
        model=model,
        base_pos=base_pos,
        base_rot=base_rot,
        chains=chains,
        com=com,
        reference_point=ref,
        H_b=H,
        H_bm=H_bm,
    )


def manipulability(model: RobotModel, state: RobotState, limb: int) -> float:
    """sqrt of the Gram determinant of the translational limb Jacobian.

    For limbs with 3+ joints this is sqrt(det(J Jt)); for shorter chains the
    Gram matrix Jt J is used so a planar 2-link arm yields l1*l2*|sin(elbow)|.
    Returns 0 at singular configurations.
    """
    J_m, _ = limb_jacobians(model, state, limb)
    Jt = J_m[:3]
    k = Jt.shape[1]
    G = Jt @ Jt.T if k >= 3 else Jt.T @ Jt
    det = np.linalg.det(G)
    return float(np.sqrt(max(det, 0.0)))


def truncated_pinv(J: np.ndarray, sv_cutoff: float = 1e-8) -> np.ndarray:
    """Moore-Penrose pseudoinverse with singular values below sv_cutoff dropped."""
    U, s, Vt = np.linalg.svd(J, full_matrices=False)
    s_inv = np.where(s > sv_cutoff, 1.0 / np.where(s > sv_cutoff, s, 1.0), 0.0)
    return Vt.T @ (s_inv[:, None] * U.T)


def support_rates_for_base_twist(
    model: RobotModel, state: RobotState, limb: int, base_twist: np.ndarray
) -> np.ndarray:
    """Joint rates that keep the limb's contact point fixed under a base twist.

    Solves the translational contact constraint  J_m qd = -J_b xdot_b  with the
    truncated pseudoinverse, matching the momentum-distribution formula.
    """
    J_m, J_b = limb_jacobians(model, state, limb)
    return -truncated_pinv(J_m[:3]) @ (J_b[:3] @ base_twist)


def inverse_kinematics(
    model: RobotModel,
    base_pos,
    base_quat,
    limb: int,
    target,
    seed=None,
    tol: float = 1e-9,
    max_iter: int = 200,
    damping: float = 1e-3,
) -> np.ndarray:
    """Position IK for one limb via damped least squares with limit clamping.

    Raises UnreachableTarget when the target is outside the workspace and
    JointLimitViolation when only limit-violating solutions exist.
    """
    target = np.asarray(target, dtype=float)
    if not np.all(np.isfinite(target)):
        raise UnreachableTarget("target is not finite")
    base_pos = np.asarray(base_pos, dtype=float)
    base_rot = quat_to_rot(quat_normalize(base_quat))
    lm = model.limbs[limb]
    root = base_pos + base_rot @ lm.attach_pos
    if np.linalg.norm(target - root) > lm.reach + 1e-9:
        raise UnreachableTarget(
            f"target {np.linalg.norm(target - root):.4f} m from limb root exceeds reach {lm.reach:.4f} m"
        )

    damping2 = damping * damping
    eye3 = np.eye(3)
    tol2 = tol * tol

    def solve_from(phi0, clamp: bool) -> np.ndarray | None:
        phi = np.asarray(phi0, dtype=float).copy()
        for _ in range(max_iter):
            chain = limb_chain(model, base_pos, base_rot, limb, phi)
            err = target - chain.ee_pos
            if err @ err < tol2:
                return phi
            Jt = _cross_last(chain.joint_axis, chain.ee_pos[None, :] - chain.joint_pos).T
            A = Jt @ Jt.T + damping2 * eye3
            step = Jt.T @ np.linalg.solve(A, err)
            n2 = step @ step
            if n2 > 0.25:
                step *= 0.5 / np.sqrt(n2)
            phi = phi + step
            if clamp:
                np.clip(phi, lm.lower, lm.upper, out=phi)
        chain = limb_chain(model, base_pos, base_rot, limb, phi)
        err = target - chain.ee_pos
        return phi if err @ err < tol2 else None

    if seed is not None:
        sol = solve_from(seed, clamp=True)
        if sol is not None:
            return sol

    def fallback_seeds():
        yield 0.5 * (lm.lower + lm.upper)
        rng = np.random.default_rng(12345)
        span = lm.upper - lm.lower
        for _ in range(4):
            yield lm.lower + rng.uniform(0.15, 0.85, lm.n_joints) * span

    tried = [np.asarray(seed, dtype=float)] if seed is not None else []
    for s in fallback_seeds():
        tried.append(s)
        sol = solve_from(s, clamp=True)
        if sol is not None:
            return sol
    for s in tried:
        sol = solve_from(s, clamp=False)
        if sol is not None:
            raise JointLimitViolation(
                f"limb {limb}: target reachable only outside joint limits"
            )
    raise UnreachableTarget(f"limb {limb}: no IK solution found for target {target}")
