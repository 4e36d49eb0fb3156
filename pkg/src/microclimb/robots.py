"""Reference robot factories.

The shipped scenarios use two desk-scale robots: a 3-kg quadruped with three
revolute joints per limb (yaw at the hip, two pitches) and a planar two-limb
machine whose joints all share the y axis, confining its motion to the x-z
plane. Dimensions and masses are tunable through the factory arguments; the
defaults are what the canonical scenarios assume.
"""

from __future__ import annotations

import numpy as np

from .geometry import rotation_about_axis
from .model import LimbModel, RobotModel

X = np.array([1.0, 0.0, 0.0])
Y = np.array([0.0, 1.0, 0.0])
Z = np.array([0.0, 0.0, 1.0])


def _rod_inertia(mass: float, length: float, radius: float = 0.012) -> np.ndarray:
    """Slender-rod tensor for a link extending along its local x axis."""
    trans = mass * (3.0 * radius**2 + length**2) / 12.0
    axial = 0.5 * mass * radius**2
    return np.diag([axial, trans, trans])


def _box_inertia(mass: float, lx: float, ly: float, lz: float) -> np.ndarray:
    return (
        mass
        / 12.0
        * np.diag([ly**2 + lz**2, lx**2 + lz**2, lx**2 + ly**2])
    )


def default_quadruped(
    base_mass: float = 0.6,
    base_size: tuple[float, float, float] = (0.24, 0.24, 0.02),
    link_lengths: tuple[float, float, float] = (0.055, 0.14, 0.16),
    link_masses: tuple[float, float, float] = (0.20, 0.25, 0.15),
    mount_radius: float = 0.12,
    stance_radius: float = 0.17,
    b_low: float = 0.01,
) -> RobotModel:
    """Four-limbed climber, one yaw plus two pitch joints per limb.

    Limbs mount at the base corners pointing diagonally outward. Positive
    pitch angles rotate the link tip downward.
    """
    l1, l2, l3 = link_lengths
    m1, m2, m3 = link_masses
    limbs = []
    offsets = []
    # order: front-left, front-right, hind-left, hind-right
    for theta in (np.pi / 4, -np.pi / 4, 3 * np.pi / 4, -3 * np.pi / 4):
        attach_rot = rotation_about_axis(Z, theta)
        attach_pos = attach_rot @ (mount_radius * X)
        limbs.append(
            LimbModel(
                attach_pos=attach_pos,
                attach_rot=attach_rot,
                axes=np.array([Z, Y, Y]),
                link_offsets=np.array([l1 * X, l2 * X, l3 * X]),
                link_masses=np.array([m1, m2, m3]),
                link_inertias=np.array(
                    [_rod_inertia(m1, l1), _rod_inertia(m2, l2), _rod_inertia(m3, l3)]
                ),
                link_coms=np.array([0.5 * l1 * X, 0.5 * l2 * X, 0.5 * l3 * X]),
                lower=np.array([-1.0, -1.2, 0.1]),
                upper=np.array([1.0, 1.2, 2.75]),
            )
        )
        radial = mount_radius + stance_radius
        offsets.append([radial * np.cos(theta), radial * np.sin(theta)])
    return RobotModel(
        base_mass=base_mass,
        base_inertia=_box_inertia(base_mass, *base_size),
        limbs=limbs,
        b_low=b_low,
        footprint_half_extents=(0.5 * base_size[0], 0.5 * base_size[1]),
        nominal_foot_offsets=np.array(offsets),
        name="quadruped",
    )


def planar_biped(
    base_mass: float = 2.2,
    base_size: tuple[float, float, float] = (0.30, 0.12, 0.04),
    link_lengths: tuple[float, float] = (0.16, 0.18),
    link_masses: tuple[float, float] = (0.22, 0.18),
    mount_half_spacing: float = 0.15,
    b_low: float = 0.02,
) -> RobotModel:
    """Two-limb planar machine; all joint axes along y, motion in the x-z plane.

    Models an air-bearing platform with two arms grasping a line of targets.
    The rear limb mount is yawed by pi so both limbs share one geometry.
    """
    l1, l2 = link_lengths
    m1, m2 = link_masses
    limbs = []
    for sign in (+1.0, -1.0):
        attach_rot = np.eye(3) if sign > 0 else rotation_about_axis(Z, np.pi)
        limbs.append(
            LimbModel(
                attach_pos=np.array([sign * mount_half_spacing, 0.0, -0.01]),
                attach_rot=attach_rot,
                axes=np.array([Y, Y]),
                link_offsets=np.array([l1 * X, l2 * X]),
                link_masses=np.array([m1, m2]),
                link_inertias=np.array([_rod_inertia(m1, l1), _rod_inertia(m2, l2)]),
                link_coms=np.array([0.5 * l1 * X, 0.5 * l2 * X]),
                lower=np.array([-2.6, 0.15]),
                upper=np.array([2.6, 2.9]),
            )
        )
    offsets = np.array([[mount_half_spacing, 0.0], [-mount_half_spacing, 0.0]])
    return RobotModel(
        base_mass=base_mass,
        base_inertia=_box_inertia(base_mass, *base_size),
        limbs=limbs,
        b_low=b_low,
        footprint_half_extents=(0.5 * base_size[0], 0.5 * base_size[1]),
        nominal_foot_offsets=offsets,
        name="planar",
    )
