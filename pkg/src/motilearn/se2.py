"""SE(2) poses, exponential/logarithm maps, and trajectory reconstruction.

A pose is (x, y, theta) with theta kept unwrapped (continuous) along a
trajectory, so heading differences over a stride can exceed pi.
"""

from dataclasses import dataclass

import numpy as np

from .validation import ValidationError, check_vector

# below this |angle| the V(theta) blocks switch to their series limits
_SMALL_ANGLE = 1e-8


@dataclass(frozen=True)
class PoseSE2:
    """Planar pose: position in meters, heading in radians (unwrapped)."""

    x: float
    y: float
    theta: float

    def as_array(self):
        return np.array([self.x, self.y, self.theta])

    @staticmethod
    def from_array(a):
        a = check_vector(a, dim=3, name="pose")
        return PoseSE2(float(a[0]), float(a[1]), float(a[2]))

    @staticmethod
    def identity():
        return PoseSE2(0.0, 0.0, 0.0)


def rot2(theta):
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def _v_coeffs(theta):
    # V(theta) = [[a, -b], [b, a]] with a = sin(t)/t, b = (1-cos(t))/t
    if abs(theta) < _SMALL_ANGLE:
        return 1.0 - theta * theta / 6.0, 0.5 * theta - theta**3 / 24.0
    return np.sin(theta) / theta, (1.0 - np.cos(theta)) / theta


def exp_se2(vb, dt=1.0):
    """Exponential map of the body twist vb = (vx, vy, omega) over dt seconds.

    Returns the pose increment (dx, dy, dtheta) in the frame where the twist
    is expressed. Exact for constant-twist motion.
    """
    vb = check_vector(vb, dim=3, name="vb")
    u = vb[:2] * dt
    theta = vb[2] * dt
    a, b = _v_coeffs(theta)
    V = np.array([[a, -b], [b, a]])
    p = V @ u
    return PoseSE2(float(p[0]), float(p[1]), float(theta))


def log_se2(dpose):
    """Body twist (per unit time 1) whose exponential is the pose increment."""
    theta = dpose.theta
    a, b = _v_coeffs(theta)
    det = a * a + b * b
    if det < 1e-300:
        raise ValidationError("log_se2: |dtheta| too close to 2*pi*k, V singular")
    Vinv = np.array([[a, b], [-b, a]]) / det
    u = Vinv @ np.array([dpose.x, dpose.y])
    return np.array([u[0], u[1], theta])


def compose(g, h):
    """Left action g * h; theta adds without wrapping."""
    p = np.array([g.x, g.y]) + rot2(g.theta) @ np.array([h.x, h.y])
    return PoseSE2(float(p[0]), float(p[1]), g.theta + h.theta)


def relative(g, h):
    """g^{-1} * h with the heading difference taken unwrapped."""
    d = rot2(g.theta).T @ np.array([h.x - g.x, h.y - g.y])
    return PoseSE2(float(d[0]), float(d[1]), h.theta - g.theta)


def integrate(vb_series, dts, g0=None):
    """Integrate body velocities into world poses.

    g_{i+1} = g_i * exp(vb_i * dt_i); returns len(vb_series) + 1 poses
    starting at g0 (identity when omitted).
    """
    vb_series = np.atleast_2d(np.asarray(vb_series, dtype=float))
    dts = np.asarray(dts, dtype=float)
    if vb_series.shape[0] != dts.shape[0]:
        raise ValidationError(
            f"got {vb_series.shape[0]} velocities but {dts.shape[0]} intervals"
        )
    g = PoseSE2.identity() if g0 is None else g0
    poses = [g]
    for vb, dt in zip(vb_series, dts):
        g = compose(g, exp_se2(vb, dt))
        poses.append(g)
    return poses


@dataclass(frozen=True)
class StrideRecord:
    """Displacement over one stride in the stride's initial body frame."""

    dx: float
    dy: float
    dtheta: float

    def as_array(self):
        return np.array([self.dx, self.dy, self.dtheta])


def stride_displacements(traj, stride_ranges):
    """Per-stride body-frame displacement records.

    ``traj`` is a sequence of PoseSE2; each range (start, end) takes the
    displacement from pose[start] to pose[end].
    """
    n = len(traj)
    records = []
    for start, end in stride_ranges:
        if not (0 <= start < end < n):
            raise ValidationError(f"stride range ({start}, {end}) out of bounds")
        d = relative(traj[start], traj[end])
        records.append(StrideRecord(d.x, d.y, d.theta))
    return records
