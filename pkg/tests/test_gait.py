"""Regression-plane posing, foothold stepping and plan construction checks."""

import numpy as np
import pytest

from microclimb.errors import DegenerateGeometry, InfeasiblePlan
from microclimb.gait import (
    GaitConfig,
    build_gait_plan,
    desired_base_pose,
    export_plan_csv,
    next_foothold,
    regression_plane,
)
from microclimb.geometry import quat_to_rot
from microclimb.robots import default_quadruped, planar_biped
from microclimb.terrain import (
    TerrainMap,
    base_collision_depth,
    elevation,
    flat_map,
    footprint_points,
    generate_fractal,
)


def quad_config(**kw):
    defaults = dict(
        n_limbs=4,
        swing_period=1.75,
        stride=0.08,
        step_height=0.04,
        stance_height=0.11,
        clearance_margin=0.02,
    )
    defaults.update(kw)
    return GaitConfig(**defaults)


# ------------------------------------------------------------ regression plane


def test_coplanar_points_identity():
    pts = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [-1.0, 0.0, 0.0], [0.0, -1.0, 0.0]])
    plane = regression_plane(pts)
    np.testing.assert_allclose(plane.centroid, [0, 0, 0], atol=1e-12)
    np.testing.assert_allclose(plane.normal, [0, 0, 1], atol=1e-12)
    np.testing.assert_allclose(quat_to_rot(plane.orientation), np.eye(3), atol=1e-12)
    assert plane.residual <= 1e-12


def test_tilted_plane_analytic():
    rng = np.random.default_rng(2)
    xy = rng.uniform(-1, 1, (6, 2))
    pts = np.column_stack([xy, 0.1 * xy[:, 0]])  # z = 0.1 x
    plane = regression_plane(pts)
    expected = np.array([-0.1, 0.0, 1.0])
    expected /= np.linalg.norm(expected)
    assert np.linalg.norm(plane.normal - expected) <= 1e-9
    assert plane.residual <= 1e-9


def test_random_cloud_matches_normal_equations_oracle():
    rng = np.random.default_rng(5)
    for _ in range(20):
        pts = rng.uniform(-1, 1, (5, 3))
        plane = regression_plane(pts)
        # oracle: brute-force normal equations for z = a x + b y + c
        A = np.column_stack([pts[:, 0], pts[:, 1], np.ones(len(pts))])
        coef, *_ = np.linalg.lstsq(A, pts[:, 2], rcond=None)
        n = np.array([-coef[0], -coef[1], 1.0])
        n /= np.linalg.norm(n)
        assert np.linalg.norm(plane.normal - n) <= 1e-9
        # centroid is the arithmetic mean and lies on the fitted plane
        np.testing.assert_allclose(plane.centroid, pts.mean(axis=0), atol=1e-12)
        z_fit = coef[0] * plane.centroid[0] + coef[1] * plane.centroid[1] + coef[2]
        assert abs(z_fit - plane.centroid[2]) <= 1e-9


def test_degenerate_collinear_rejected():
    pts = np.array([[0.0, 0.0, 0.0], [1.0, 1.0, 0.1], [2.0, 2.0, 0.2], [3.0, 3.0, 0.3]])
    with pytest.raises(DegenerateGeometry):
        regression_plane(pts)


def test_two_point_planar_mode():
    plane = regression_plane(np.array([[0.0, 0.0, 0.0], [0.5, 0.0, 0.0]]))
    np.testing.assert_allclose(plane.normal, [0, 0, 1], atol=1e-12)
    np.testing.assert_allclose(plane.centroid, [0.25, 0, 0], atol=1e-12)


def test_plane_translation_invariance():
    rng = np.random.default_rng(11)
    pts = rng.uniform(-1, 1, (5, 3))
    v = np.array([3.0, -2.0, 0.7])
    a = regression_plane(pts)
    b = regression_plane(pts + v)
    assert np.linalg.norm(b.centroid - (a.centroid + v)) <= 1e-9
    assert np.linalg.norm(b.normal - a.normal) <= 1e-9
    assert np.linalg.norm(b.orientation - a.orientation) <= 1e-9


def test_plane_beats_random_candidates():
    rng = np.random.default_rng(13)
    pts = rng.uniform(-0.5, 0.5, (6, 3))
    plane = regression_plane(pts)

    def sq_residual(a, b, c):
        return np.sum((pts[:, 2] - (a * pts[:, 0] + b * pts[:, 1] + c)) ** 2)

    n = plane.normal
    a_fit, b_fit = -n[0] / n[2], -n[1] / n[2]
    c_fit = plane.centroid[2] - a_fit * plane.centroid[0] - b_fit * plane.centroid[1]
    best = sq_residual(a_fit, b_fit, c_fit)
    for _ in range(1000):
        cand = np.array([a_fit, b_fit, c_fit]) + rng.normal(0, 0.2, 3)
        assert best <= sq_residual(*cand) + 1e-12


# ------------------------------------------------------------ base pose / Eq 1


def test_nominal_height_flat():
    model = default_quadruped()
    tm = flat_map(extents=(4.0, 4.0), origin=(-2.0, -2.0))
    cfg = quad_config(stance_height=0.10)
    plane = regression_plane(np.array([[0.2, 0.2, 0], [0.2, -0.2, 0], [-0.2, 0.2, 0], [-0.2, -0.2, 0]]))
    pos, quat = desired_base_pose(plane, cfg, model, tm)
    assert abs(pos[2] - 0.10) <= 1e-12
    np.testing.assert_allclose(pos[:2], [0, 0], atol=1e-12)
    np.testing.assert_allclose(quat, [1, 0, 0, 0], atol=1e-12)


def test_collision_bump_height_arithmetic():
    # bump penetrating 0.02 under the nominal pose: 0 + 0.10 + 0.02 + 0.02 - 0.01 = 0.13
    model = default_quadruped(b_low=0.01)
    res = 0.06
    n = 21
    heights = np.zeros((n, n))
    heights[10, 10] = 0.11  # node at world (0, 0)
    tm = TerrainMap(heights=heights, resolution=res, origin=(-0.6, -0.6), seed=0, sigma=0.0)
    cfg = quad_config(stance_height=0.10, clearance_margin=0.02)
    plane = regression_plane(
        np.array([[0.3, 0.3, 0], [0.3, -0.3, 0], [-0.3, 0.3, 0], [-0.3, -0.3, 0]])
    )
    pos, _ = desired_base_pose(plane, cfg, model, tm)
    assert abs(pos[2] - 0.13) <= 1e-12


def test_no_collision_keeps_nominal_formula():
    # with zero penetration the height reduces to centroid z + h_n exactly
    model = default_quadruped()
    tm = flat_map(extents=(4.0, 4.0), origin=(-2.0, -2.0))
    cfg = quad_config(stance_height=0.123)
    plane = regression_plane(
        np.array([[0.2, 0.2, 0.01], [0.2, -0.2, -0.01], [-0.2, 0.2, 0.01], [-0.2, -0.2, -0.01]])
    )
    pos, _ = desired_base_pose(plane, cfg, model, tm)
    assert abs(pos[2] - (plane.centroid[2] + 0.123)) <= 1e-12


@pytest.mark.parametrize("seed", [3, 17, 29])
def test_post_hoc_collision_recheck_on_bumpy_maps(seed):
    model = default_quadruped()
    tm = generate_fractal(seed, (2.0, 2.0), 0.05, 0.03, origin=(-1.0, -1.0))
    cfg = quad_config()
    rng = np.random.default_rng(seed)
    fp = footprint_points(model.footprint_half_extents, 5)
    for _ in range(5):
        center = rng.uniform(-0.4, 0.4, 2)
        feet = []
        for off in model.nominal_foot_offsets:
            xy = center + off
            feet.append([xy[0], xy[1], elevation(tm, xy[0], xy[1])])
        plane = regression_plane(np.array(feet))
        pos, quat = desired_base_pose(plane, cfg, model, tm)
        _, pen = base_collision_depth(tm, pos, quat, fp, model.b_low)
        assert pen == 0.0


# ----------------------------------------------------------------- footholds


def test_next_foothold_zero_stride():
    tm = flat_map()
    cur = np.array([0.5, 0.5, 0.0])
    np.testing.assert_allclose(next_foothold(cur, [1, 0, 0], 0.0, tm), cur, atol=1e-12)


def test_next_foothold_stride_8cm():
    tm = flat_map()
    target = next_foothold([0.5, 0.5, 0.0], [1, 0, 0], 0.08, tm)
    np.testing.assert_allclose(target, [0.58, 0.5, 0.0], atol=1e-12)


def test_next_foothold_follows_surface():
    heights = np.outer(np.ones(11), np.arange(11) * 0.01)  # z = 0.1 x over res 0.1
    tm = TerrainMap(heights=heights, resolution=0.1, origin=(0.0, 0.0), seed=0, sigma=0.0)
    target = next_foothold([0.2, 0.5, 0.02], [1, 0, 0], 0.3, tm)
    assert abs(target[2] - elevation(tm, 0.5, 0.5)) <= 1e-12


# ---------------------------------------------------------------------- plans


def test_quadruped_one_cycle_phase_structure():
    model = default_quadruped()
    tm = flat_map(extents=(3.0, 3.0), origin=(-1.5, -1.5))
    plan = build_gait_plan(model, quad_config(), tm, n_cycles=1)
    assert len(plan.phases) == 8
    assert abs(plan.duration - 14.0) <= 1e-12
    kinds = [p.kind for p in plan.phases]
    assert kinds == ["swing", "base"] * 4
    for p in plan.phases:
        assert abs(p.duration - 1.75) <= 1e-12


def test_planar_one_cycle_40s_with_5s_motion_segments():
    model = planar_biped()
    tm = flat_map(extents=(3.0, 1.0), origin=(-1.0, -0.5))
    cfg = GaitConfig(
        n_limbs=2,
        swing_period=10.0,
        stride=0.10,
        step_height=0.04,
        stance_height=0.16,
        release_time=5.0,
        grasp_time=5.0,
    )
    plan = build_gait_plan(model, cfg, tm, n_cycles=1, adjust_base=False)
    assert abs(plan.duration - 40.0) <= 1e-12
    assert len(plan.phases) == 4
    for p in plan.phases:
        if p.kind == "swing":
            assert abs((p.t_end - p.release_end) - 5.0) <= 1e-12
        else:
            assert abs((p.t_end - p.grasp_end) - 5.0) <= 1e-12


def test_zero_cycles_empty_plan():
    model = default_quadruped()
    tm = flat_map(extents=(3.0, 3.0), origin=(-1.5, -1.5))
    plan = build_gait_plan(model, quad_config(), tm, n_cycles=0)
    assert plan.phases == []
    assert plan.duration == 0.0


def test_plan_time_tiling_exact():
    model = default_quadruped()
    tm = flat_map(extents=(4.0, 4.0), origin=(-2.0, -2.0))
    plan = build_gait_plan(model, quad_config(), tm, n_cycles=3)
    total = sum(p.duration for p in plan.phases)
    assert total == 3 * plan.config.total_period
    for a, b in zip(plan.phases, plan.phases[1:]):
        assert a.t_end == b.t_start
        assert a.kind != b.kind


def test_infeasible_stride_reported_with_phase_index():
    model = default_quadruped()
    tm = flat_map(extents=(3.0, 3.0), origin=(-1.5, -1.5))
    cfg = quad_config(stride=0.8)  # beyond limb reach
    with pytest.raises(InfeasiblePlan) as err:
        build_gait_plan(model, cfg, tm, n_cycles=1)
    assert err.value.phase_index is not None


def test_plan_csv_export(tmp_path):
    model = default_quadruped()
    tm = flat_map(extents=(3.0, 3.0), origin=(-1.5, -1.5))
    plan = build_gait_plan(model, quad_config(), tm, n_cycles=1)
    path = tmp_path / "plan.csv"
    export_plan_csv(plan, path)
    lines = path.read_text().strip().splitlines()
    assert lines[0].startswith("index,kind,limb")
    assert len(lines) == 9
