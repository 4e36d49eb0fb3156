"""Kinematics, Jacobian, momentum and IK checks against independent oracles."""

import numpy as np
import pytest

from conftest import posed_state
from microclimb.errors import UnreachableTarget
from microclimb.geometry import quat_to_rot, rotation_about_axis, rot_to_quat
from microclimb.model import (
    base_inertia_map,
    coupling_inertia,
    forward_kinematics,
    inverse_kinematics,
    limb_jacobians,
    manipulability,
    momentum,
    rest_state,
    support_rates_for_base_twist,
    system_com,
)
from microclimb.robots import default_quadruped, planar_biped


def zero_state(model, base_pos=(0.0, 0.0, 0.0)):
    return rest_state(model, base_pos, (1, 0, 0, 0), [np.zeros(l.n_joints) for l in model.limbs])


# ---------------------------------------------------------------- kinematics


def test_fk_zero_angles_home_position(quadruped):
    state = zero_state(quadruped)
    for i, limb in enumerate(quadruped.limbs):
        pos, _ = forward_kinematics(quadruped, state, i)
        home = limb.attach_pos + limb.attach_rot @ limb.link_offsets.sum(axis=0)
        np.testing.assert_allclose(pos, home, atol=1e-12)


def test_fk_base_translation_equivariance(quadruped):
    rng = np.random.default_rng(3)
    state = posed_state(quadruped, rng)
    v = np.array([0.3, -0.2, 0.65])
    moved = state.copy()
    moved.base_pos = state.base_pos + v
    for i in range(quadruped.n_limbs):
        p0, q0 = forward_kinematics(quadruped, state, i)
        p1, q1 = forward_kinematics(quadruped, moved, i)
        np.testing.assert_allclose(p1, p0 + v, atol=1e-12)
        np.testing.assert_allclose(q1, q0, atol=1e-12)


def test_fk_matches_stepwise_transform_composition(quadruped):
    # oracle: compose individual joint transforms one by one with 4x4 matrices
    rng = np.random.default_rng(7)
    state = posed_state(quadruped, rng)
    state.base_quat = rot_to_quat(rotation_about_axis(np.array([0.3, 0.5, 0.81]) / np.linalg.norm([0.3, 0.5, 0.81]), 0.7))
    for i, limb in enumerate(quadruped.limbs):
        T = np.eye(4)
        T[:3, :3] = quat_to_rot(state.base_quat)
        T[:3, 3] = state.base_pos
        mount = np.eye(4)
        mount[:3, :3] = limb.attach_rot
        mount[:3, 3] = limb.attach_pos
        T = T @ mount
        for j in range(limb.n_joints):
            rot = np.eye(4)
            rot[:3, :3] = rotation_about_axis(limb.axes[j], state.joint_angles[i][j])
            trans = np.eye(4)
            trans[:3, 3] = limb.link_offsets[j]
            T = T @ rot @ trans
        pos, _ = forward_kinematics(quadruped, state, i)
        np.testing.assert_allclose(pos, T[:3, 3], atol=1e-12)


def test_jacobian_finite_difference_100_random_configs(quadruped):
    rng = np.random.default_rng(11)
    eps = 1e-7
    for _ in range(100):
        state = posed_state(quadruped, rng)
        limb = int(rng.integers(quadruped.n_limbs))
        J_m, _ = limb_jacobians(quadruped, state, limb)
        k = quadruped.limbs[limb].n_joints
        for j in range(k):
            plus = state.copy()
            minus = state.copy()
            plus.joint_angles[limb][j] += eps
            minus.joint_angles[limb][j] -= eps
            p_plus, q_plus = forward_kinematics(quadruped, plus, limb)
            p_minus, q_minus = forward_kinematics(quadruped, minus, limb)
            v_fd = (p_plus - p_minus) / (2 * eps)
            assert np.linalg.norm(v_fd - J_m[:3, j]) <= 1e-5
            # angular rows against the relative-rotation rate
            R_rel = quat_to_rot(q_plus) @ quat_to_rot(q_minus).T
            w_fd = (
                np.array([R_rel[2, 1] - R_rel[1, 2], R_rel[0, 2] - R_rel[2, 0], R_rel[1, 0] - R_rel[0, 1]])
                / (4 * eps)
            )
            assert np.linalg.norm(w_fd - J_m[3:, j]) <= 1e-5


def test_base_jacobian_pure_translation(quadruped):
    rng = np.random.default_rng(5)
    state = posed_state(quadruped, rng)
    _, J_b = limb_jacobians(quadruped, state, 0)
    np.testing.assert_allclose(J_b[:3, :3], np.eye(3), atol=1e-14)
    v = np.array([0.1, 0.2, -0.3, 0.0, 0.0, 0.0])
    np.testing.assert_allclose((J_b @ v)[:3], v[:3], atol=1e-14)


def test_stretched_limb_translational_rank_deficiency(quadruped):
    state = zero_state(quadruped)  # all joints zero = fully stretched
    J_m, _ = limb_jacobians(quadruped, state, 0)
    svals = np.linalg.svd(J_m[:3], compute_uv=False)
    assert svals[-1] < 1e-10


# ------------------------------------------------------------------ momentum


def test_momentum_zero_at_rest(quadruped):
    state = posed_state(quadruped)
    mom = momentum(quadruped, state)
    np.testing.assert_allclose(mom.total, np.zeros(6), atol=1e-15)


def test_momentum_linear_in_rates(quadruped):
    rng = np.random.default_rng(19)
    state = posed_state(quadruped, rng, with_rates=True)
    doubled = state.copy()
    doubled.base_lin_vel *= 2
    doubled.base_ang_vel *= 2
    for i in range(quadruped.n_limbs):
        doubled.joint_rates[i] *= 2
    m1 = momentum(quadruped, state, reference_point=np.zeros(3))
    m2 = momentum(quadruped, doubled, reference_point=np.zeros(3))
    np.testing.assert_allclose(m2.total, 2 * m1.total, rtol=1e-12, atol=1e-15)


def test_momentum_scaling_property(quadruped):
    rng = np.random.default_rng(23)
    for c in (-1.5, 0.25, 3.0):
        state = posed_state(quadruped, rng, with_rates=True)
        scaled = state.copy()
        scaled.base_lin_vel *= c
        scaled.base_ang_vel *= c
        for i in range(quadruped.n_limbs):
            scaled.joint_rates[i] *= c
        m1 = momentum(quadruped, state, reference_point=np.zeros(3)).total
        m2 = momentum(quadruped, scaled, reference_point=np.zeros(3)).total
        assert np.linalg.norm(m2 - c * m1) <= 1e-12 * max(np.linalg.norm(m1), 1.0)


def test_momentum_single_point_mass_oracle():
    # shrink everything except one distal link; linear momentum ~= m * v_com
    model = default_quadruped(
        base_mass=1e-9, link_masses=(1e-12, 1e-12, 0.4)
    )
    rng = np.random.default_rng(31)
    state = posed_state(model, rng)
    state.joint_rates[2] = np.array([0.0, 0.0, 1.3])
    mom = momentum(model, state)

    # oracle: velocity of that link's CoM from a tiny time step of FK
    def com_of_link(st):
        from microclimb.model import limb_chain

        chain = limb_chain(model, st.base_pos, quat_to_rot(st.base_quat), 2, st.joint_angles[2])
        return chain.link_com[2]

    eps = 1e-8
    plus = state.copy()
    plus.joint_angles[2] = state.joint_angles[2] + eps * state.joint_rates[2]
    v_com = (com_of_link(plus) - com_of_link(state)) / eps
    np.testing.assert_allclose(mom.linear, 0.4 * v_com, rtol=1e-6, atol=1e-12)


def test_coupling_inertia_massless_limb():
    model = default_quadruped(link_masses=(0.0, 0.0, 0.0))
    state = posed_state(model)
    H = coupling_inertia(model, state, 1)
    np.testing.assert_allclose(H, np.zeros_like(H), atol=1e-15)


def test_coupling_blocks_reassemble_momentum(quadruped):
    rng = np.random.default_rng(41)
    for _ in range(10):
        state = posed_state(quadruped, rng, with_rates=True)
        ref = system_com(quadruped, state)
        H_b = base_inertia_map(quadruped, state, ref)
        total = H_b @ state.base_twist
        for i in range(quadruped.n_limbs):
            total = total + coupling_inertia(quadruped, state, i, ref) @ state.joint_rates[i]
        mom = momentum(quadruped, state, reference_point=ref)
        assert np.linalg.norm(total - mom.total) <= 1e-12 * max(np.linalg.norm(mom.total), 1e-9)


def test_coupling_column_equals_unit_rate_probe(quadruped):
    rng = np.random.default_rng(43)
    state = posed_state(quadruped, rng)
    ref = system_com(quadruped, state)
    limb = 3
    H = coupling_inertia(quadruped, state, limb, ref)
    for j in range(quadruped.limbs[limb].n_joints):
        probe = state.copy()
        probe.joint_rates[limb] = np.zeros(quadruped.limbs[limb].n_joints)
        probe.joint_rates[limb][j] = 1.0
        mom = momentum(quadruped, probe, reference_point=ref)
        np.testing.assert_allclose(H[:, j], mom.total, rtol=1e-12, atol=1e-15)


def test_momentum_decomposition_closure(quadruped):
    rng = np.random.default_rng(47)
    state = posed_state(quadruped, rng, with_rates=True)
    state.attached = np.array([True, True, False, True])
    mom = momentum(quadruped, state)
    np.testing.assert_allclose(mom.base + mom.support + mom.swing, mom.total, atol=1e-15)


# -------------------------------------------------------------- manipulability


def test_manipulability_zero_when_stretched(quadruped):
    state = zero_state(quadruped)
    assert manipulability(quadruped, state, 0) <= 1e-9


def test_manipulability_world_rotation_invariance(quadruped):
    rng = np.random.default_rng(53)
    state = posed_state(quadruped, rng)
    w0 = manipulability(quadruped, state, 2)
    rotated = state.copy()
    axis = np.array([0.2, -0.7, 0.4])
    axis /= np.linalg.norm(axis)
    rotated.base_quat = rot_to_quat(rotation_about_axis(axis, 1.1) @ quat_to_rot(state.base_quat))
    w1 = manipulability(quadruped, rotated, 2)
    assert abs(w1 - w0) <= 1e-9


def test_manipulability_planar_two_link_closed_form(planar):
    # oracle: w = l1 * l2 * |sin(elbow)|
    l1, l2 = 0.16, 0.18
    rng = np.random.default_rng(59)
    for _ in range(20):
        q1 = rng.uniform(-1.5, 1.5)
        q2 = rng.uniform(0.2, 2.8)
        state = rest_state(planar, (0, 0, 0.3), (1, 0, 0, 0), [[q1, q2], [0.3, 1.0]])
        w = manipulability(planar, state, 0)
        assert abs(w - l1 * l2 * abs(np.sin(q2))) <= 1e-9


def test_manipulability_nonnegative_and_rank_link(quadruped):
    rng = np.random.default_rng(61)
    for _ in range(50):
        state = posed_state(quadruped, rng)
        limb = int(rng.integers(4))
        w = manipulability(quadruped, state, limb)
        assert w >= 0.0
        J_m, _ = limb_jacobians(quadruped, state, limb)
        rank = np.sum(np.linalg.svd(J_m[:3], compute_uv=False) > 1e-10)
        if w == 0.0:
            assert rank < 3
        if rank == 3:
            assert w > 0.0


# ------------------------------------------------------------------------ IK


def test_ik_round_trip(quadruped):
    rng = np.random.default_rng(67)
    state = posed_state(quadruped, rng)
    for i in range(quadruped.n_limbs):
        target, _ = forward_kinematics(quadruped, state, i)
        phi = inverse_kinematics(
            quadruped, state.base_pos, state.base_quat, i, target, seed=state.joint_angles[i]
        )
        check = state.copy()
        check.joint_angles[i] = phi
        pos, _ = forward_kinematics(quadruped, check, i)
        assert np.linalg.norm(pos - target) <= 1e-6
        assert np.all(phi >= quadruped.limbs[i].lower - 1e-12)
        assert np.all(phi <= quadruped.limbs[i].upper + 1e-12)


def test_ik_unreachable(quadruped):
    state = posed_state(quadruped)
    with pytest.raises(UnreachableTarget):
        inverse_kinematics(quadruped, state.base_pos, state.base_quat, 0, (5.0, 5.0, 0.0))


def test_ik_grid_fk_residual(quadruped):
    # every reachable sample verified by FK round trip
    state = posed_state(quadruped)
    limb = 0
    lm = quadruped.limbs[limb]
    root = state.base_pos + lm.attach_pos
    solved = 0
    for dx in np.linspace(0.12, 0.24, 4):
        for dy in np.linspace(-0.08, 0.08, 4):
            for dz in np.linspace(-0.16, -0.05, 3):
                target = root + quadruped.limbs[limb].attach_rot @ np.array([dx, dy, dz])
                try:
                    phi = inverse_kinematics(
                        quadruped, state.base_pos, state.base_quat, limb, target
                    )
                except Exception:
                    continue
                check = state.copy()
                check.joint_angles[limb] = phi
                pos, _ = forward_kinematics(quadruped, check, limb)
                assert np.linalg.norm(pos - target) <= 1e-6
                solved += 1
    assert solved >= 30


def test_support_rates_hold_contact_point(quadruped):
    rng = np.random.default_rng(71)
    state = posed_state(quadruped, rng)
    xb = np.array([0.02, -0.01, 0.03, 0.05, -0.04, 0.02])
    limb = 1
    qd = support_rates_for_base_twist(quadruped, state, limb, xb)
    J_m, J_b = limb_jacobians(quadruped, state, limb)
    residual = J_m[:3] @ qd + J_b[:3] @ xb
    assert np.linalg.norm(residual) <= 1e-9
