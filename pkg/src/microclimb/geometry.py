"""Small rotation/quaternion/spline helpers shared across the package.

Quaternions are unit, Hamilton convention, stored as (w, x, y, z).
Rotation matrices map body-frame vectors into the world frame.
"""

from __future__ import annotations

import numpy as np

IDENTITY_QUAT = np.array([1.0, 0.0, 0.0, 0.0])


def skew(v: np.ndarray) -> np.ndarray:
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def quat_normalize(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    n = np.linalg.norm(q)
    if n < 1e-12:
        return IDENTITY_QUAT.copy()
    q = q / n
    # fix the double-cover sign for reproducible output
    if q[0] < 0.0:
        q = -q
    return q


def quat_multiply(q1: np.ndarray, q2: np.ndarray) -> np.ndarray:
    w1, x1, y1, z1 = q1
    w2, x2, y2, z2 = q2
    return np.array(
        [
            w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
            w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
            w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
            w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
        ]
    )


def quat_to_rot(q: np.ndarray) -> np.ndarray:
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
            [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
            [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
        ]
    )


def rot_to_quat(R: np.ndarray) -> np.ndarray:
    """Shepperd's method; returns the w >= 0 representative."""
    m00, m11, m22 = R[0, 0], R[1, 1], R[2, 2]
    tr = m00 + m11 + m22
    if tr > 0.0:
        s = np.sqrt(tr + 1.0) * 2.0
        q = np.array(
            [0.25 * s, (R[2, 1] - R[1, 2]) / s, (R[0, 2] - R[2, 0]) / s, (R[1, 0] - R[0, 1]) / s]
        )
    elif m00 >= m11 and m00 >= m22:
        s = np.sqrt(1.0 + m00 - m11 - m22) * 2.0
        q = np.array(
            [(R[2, 1] - R[1, 2]) / s, 0.25 * s, (R[0, 1] + R[1, 0]) / s, (R[0, 2] + R[2, 0]) / s]
        )
    elif m11 >= m22:
        s = np.sqrt(1.0 + m11 - m00 - m22) * 2.0
        q = np.array(
            [(R[0, 2] - R[2, 0]) / s, (R[0, 1] + R[1, 0]) / s, 0.25 * s, (R[1, 2] + R[2, 1]) / s]
        )
    else:
        s = np.sqrt(1.0 + m22 - m00 - m11) * 2.0
        q = np.array(
            [(R[1, 0] - R[0, 1]) / s, (R[0, 2] + R[2, 0]) / s, (R[1, 2] + R[2, 1]) / s, 0.25 * s]
        )
    return quat_normalize(q)


def rotation_about_axis(axis: np.ndarray, angle: float) -> np.ndarray:
    """Rodrigues rotation matrix about a unit axis.

    Coordinate-axis rotations take a closed-form fast path; the generic
    branch covers arbitrary unit axes.
    """
    c = np.cos(angle)
    s = np.sin(angle)
    ax, ay, az = axis
    if ax == 0.0 and ay == 0.0:
        if az == 1.0:
            return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
        if az == -1.0:
            return np.array([[c, s, 0.0], [-s, c, 0.0], [0.0, 0.0, 1.0]])
    if ax == 0.0 and az == 0.0:
        if ay == 1.0:
            return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])
        if ay == -1.0:
            return np.array([[c, 0.0, -s], [0.0, 1.0, 0.0], [s, 0.0, c]])
    if ay == 0.0 and az == 0.0 and abs(ax) == 1.0:
        s_ = s if ax > 0 else -s
        return np.array([[1.0, 0.0, 0.0], [0.0, c, -s_], [0.0, s_, c]])
    K = skew(axis)
    return np.eye(3) + s * K + (1.0 - c) * (K @ K)


def quat_from_rotvec(rv: np.ndarray) -> np.ndarray:
    angle = np.linalg.norm(rv)
    if angle < 1e-12:
        # first-order for tiny rotations keeps integration smooth
        return quat_normalize(np.array([1.0, 0.5 * rv[0], 0.5 * rv[1], 0.5 * rv[2]]))
    axis = rv / angle
    half = 0.5 * angle
    return np.concatenate(([np.cos(half)], np.sin(half) * axis))


def rotvec_from_quat(q: np.ndarray) -> np.ndarray:
    q = quat_normalize(q)
    w = np.clip(q[0], -1.0, 1.0)
    v = q[1:]
    s = np.linalg.norm(v)
    if s < 1e-12:
        return 2.0 * v
    angle = 2.0 * np.arctan2(s, w)
    return angle * v / s


def quat_integrate(q: np.ndarray, omega_world: np.ndarray, dt: float) -> np.ndarray:
    """Advance orientation by a world-frame angular velocity over dt."""
    dq = quat_from_rotvec(np.asarray(omega_world) * dt)
    return quat_normalize(quat_multiply(dq, q))


def quintic_scale(tau: float) -> tuple[float, float, float]:
    """Minimum-jerk time scaling s(tau) on [0, 1] with zero end velocity/acceleration.

    Returns (s, ds/dtau, d2s/dtau2).
    """
    t2 = tau * tau
    t3 = t2 * tau
    s = 10.0 * t3 - 15.0 * t2 * t2 + 6.0 * t3 * t2
    ds = 30.0 * t2 - 60.0 * t3 + 30.0 * t2 * t2
    dds = 60.0 * tau - 180.0 * t2 + 120.0 * t3
    return s, ds, dds


class PoseCurve:
    """Quintic point-to-point pose trajectory with zero boundary rates.

    Position is interpolated per coordinate; orientation follows the geodesic
    between the two quaternions with the same quintic time scaling.
    """

    def __init__(self, p0, q0, p1, q1, t0: float, t1: float):
        if t1 <= t0:
            raise ValueError("PoseCurve requires t1 > t0")
        self.p0 = np.asarray(p0, dtype=float)
        self.p1 = np.asarray(p1, dtype=float)
        self.q0 = quat_normalize(q0)
        self.q1 = quat_normalize(q1)
        self.t0 = float(t0)
        self.t1 = float(t1)
        R0 = quat_to_rot(self.q0)
        R1 = quat_to_rot(self.q1)
        self._rel_rotvec = rotvec_from_quat(rot_to_quat(R0.T @ R1))
        self._axis_world = R0 @ self._rel_rotvec

    @property
    def duration(self) -> float:
        return self.t1 - self.t0

    def _tau(self, t: float) -> float:
        return np.clip((t - self.t0) / self.duration, 0.0, 1.0)

    def pose(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        s, _, _ = quintic_scale(self._tau(t))
        p = self.p0 + s * (self.p1 - self.p0)
        q = quat_multiply(self.q0, quat_from_rotvec(s * self._rel_rotvec))
        return p, quat_normalize(q)

    def twist(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        """World-frame (linear, angular) velocity at time t."""
        _, ds, _ = quintic_scale(self._tau(t))
        rate = ds / self.duration
        return rate * (self.p1 - self.p0), rate * self._axis_world

    def accel(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        _, _, dds = quintic_scale(self._tau(t))
        rate = dds / self.duration**2
        return rate * (self.p1 - self.p0), rate * self._axis_world
