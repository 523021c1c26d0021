"""Synthetic data: the two-branch variety toy and kinematic gait datasets."""

from dataclasses import dataclass, field

import numpy as np

from .data import Dataset, Trajectory, segment_strides
from .se2 import integrate
from .validation import ValidationError, check_seed, spawn_seeds


def gen_variety(n, noise=0.15, seed=0):
    """Noisy samples of the two-branch variety y**2 = (x-1)**2 (x+1)**2.

    x is uniform on [-1.5, 1.5], the branch y = +-(x**2 - 1) is chosen fair
    at random, and both coordinates get N(0, noise**2) measurement noise.
    Returns an (n, 2) array of (x, y) points.
    """
    if n < 1:
        raise ValidationError("n must be >= 1")
    rng = np.random.default_rng(check_seed(seed))
    x = rng.uniform(-1.5, 1.5, size=n)
    sign = 2.0 * rng.integers(0, 2, size=n) - 1.0
    y = sign * (x * x - 1.0)
    if noise > 0.0:
        x = x + noise * rng.standard_normal(n)
        y = y + noise * rng.standard_normal(n)
    return np.column_stack([x, y])


def variety_branch(x, sign):
    """Noise-free branch values y = sign * (x**2 - 1); sign +1 is the branch
    through (0, -1), so the branch through (0, +1) is sign = -1."""
    return sign * (np.asarray(x, dtype=float) ** 2 - 1.0)


def variety_sweep(model, xs, y0):
    """Self-fed branch sweep over a symmetric grid, walking outward from
    x = 0 where the initial previous-output y0 = +-1 lies on the variety.

    The two half-sweeps share y0 and are stitched back in grid order.
    Near the branch crossings the fitted local structures overlap, so the
    outward walk (which arrives there already committed to a branch) is
    the stable rendering of branch persistence.
    """
    xs = np.asarray(xs, dtype=float)
    pred = np.empty_like(xs)
    right = xs >= 0.0
    pred[right] = model.predict_trajectory(xs[right][:, None], [y0])[:, 0]
    pred[~right] = model.predict_trajectory(
        xs[~right][::-1][:, None], [y0])[::-1, 0]
    return pred


# ---------------------------------------------------------------------------
# Kinematic systems: v_b = A(r) rdot with p = 0


@dataclass(frozen=True)
class KinematicSpec:
    """A smooth shape-to-se(2) motility map; A(r) has shape (3, ns)."""

    ns: int
    A: callable
    name: str = "custom"

    def A_batch(self, R):
        R = np.asarray(R, dtype=float)
        return np.stack([self.A(r) for r in R])


# cross-joint couplings dominate so the net displacement per gait cycle is
# a large area-rule effect, strongly sensitive to the inter-joint offset
def _cf(u, v, c0, c1, c2, c3):
    return c0 + c1 * np.sin(v) + c2 * np.sin(2.0 * v) + c3 * np.cos(u)

_ROWS = (
    (0.55, 0.45, 0.0, 0.08, 1.0),
    (0.40, 0.40, 0.0, 0.06, -1.0),
    (0.28, 0.32, 0.0, 0.05, -1.0),
)


def _curvature_A(r):
    u, v = r
    return np.array([
        [_cf(u, v, c0, c1, c2, c3), sign * _cf(v, u, c0, c1, c2, c3)]
        for c0, c1, c2, c3, sign in _ROWS
    ])


def _curvature_A_batch(R):
    u, v = R[:, 0], R[:, 1]
    n = R.shape[0]
    A = np.empty((n, 3, 2))
    for i, (c0, c1, c2, c3, sign) in enumerate(_ROWS):
        A[:, i, 0] = _cf(u, v, c0, c1, c2, c3)
        A[:, i, 1] = sign * _cf(v, u, c0, c1, c2, c3)
    return A


@dataclass(frozen=True)
class _CurvatureSpec(KinematicSpec):
    def A_batch(self, R):
        return _curvature_A_batch(np.asarray(R, dtype=float))


def curvature_spec():
    """Built-in two-joint spec with trigonometric, non-constant A(r).

    Swapping the joints negates the sideways and turning rows, so gaits
    with opposite inter-joint phase offsets produce mirrored motion.
    """
    return _CurvatureSpec(ns=2, A=_curvature_A, name="curvature")


def constant_spec(A0):
    """Spec with a fixed motility matrix (3, ns)."""
    A0 = np.asarray(A0, dtype=float)
    if A0.ndim != 2 or A0.shape[0] != 3:
        raise ValidationError("A0 must have shape (3, ns)")

    class _Const(KinematicSpec):
        def A_batch(self, R):
            return np.broadcast_to(A0, (len(R), 3, A0.shape[1])).copy()

    return _Const(ns=A0.shape[1], A=lambda r: A0.copy(), name="constant")


@dataclass(frozen=True)
class GaitParams:
    """Sinusoidal joint trajectories r_j(t) = amp_j sin(2 pi f t + o_j).

    By default joint j leads by j * dphi; phase_offsets overrides the
    per-joint offsets o_j directly (e.g. reversed offsets give the
    mirror-image gait with identical stride boundaries).
    """

    amplitudes: tuple
    freq_hz: float = 1.0
    dphi: float = np.pi
    phase_offsets: tuple = None

    def __post_init__(self):
        amps = tuple(float(a) for a in self.amplitudes)
        if not amps:
            raise ValidationError("need at least one joint amplitude")
        if self.freq_hz <= 0:
            raise ValidationError("freq_hz must be positive")
        object.__setattr__(self, "amplitudes", amps)
        if self.phase_offsets is not None:
            offs = tuple(float(o) for o in self.phase_offsets)
            if len(offs) != len(amps):
                raise ValidationError("phase_offsets must match amplitudes")
            object.__setattr__(self, "phase_offsets", offs)

    def _offsets(self):
        if self.phase_offsets is not None:
            return np.array(self.phase_offsets)
        return self.dphi * np.arange(len(self.amplitudes))

    def shape(self, t):
        t = np.asarray(t, dtype=float)
        amps = np.array(self.amplitudes)
        args = 2 * np.pi * self.freq_hz * t[:, None] + self._offsets()[None, :]
        r = amps * np.sin(args)
        rdot = amps * 2 * np.pi * self.freq_hz * np.cos(args)
        return r, rdot

    def phase(self, t):
        return np.mod(2 * np.pi * self.freq_hz * np.asarray(t, dtype=float),
                      2 * np.pi)


def gen_kinematic(spec, gait, n_strides=10, dt=1.0 / 120.0, noise=0.0, seed=0,
                  vel_noise=0.0):
    """One gait recording of a principally kinematic system.

    Shape and shape velocity are sampled analytically, body velocity is
    A(r) rdot, and the pose is reconstructed by stepwise exponentials of
    the stored body velocities. ``noise`` corrupts the stored shape and
    pose columns; ``vel_noise`` (off by default) additionally corrupts the
    stored shape-velocity and body-velocity measurements, mimicking a
    motion-capture pipeline where every graph channel is noisy. The
    recording covers n_strides complete wrap-to-wrap gait cycles plus
    partial lead-in and tail.
    """
    if gait.amplitudes and len(gait.amplitudes) != spec.ns:
        raise ValidationError(
            f"gait has {len(gait.amplitudes)} joints but spec.ns = {spec.ns}"
        )
    if n_strides < 1:
        raise ValidationError("n_strides must be >= 1")
    rng = np.random.default_rng(check_seed(seed))
    n_steps = int(np.ceil((n_strides + 1) / (gait.freq_hz * dt))) + 2
    t = np.arange(n_steps) * dt
    r, rdot = gait.shape(t)
    A = spec.A_batch(r)
    vb = np.einsum("nij,nj->ni", A, rdot)
    poses = integrate(vb[:-1], np.diff(t))
    pose = np.array([[g.x, g.y, g.theta] for g in poses])
    phase = gait.phase(t)

    r_stored = r + noise * rng.standard_normal(r.shape) if noise > 0 else r
    pose_stored = pose + noise * rng.standard_normal(pose.shape) if noise > 0 else pose
    if vel_noise > 0:
        rdot = rdot + vel_noise * rng.standard_normal(rdot.shape)
        vb = vb + vel_noise * rng.standard_normal(vb.shape)
    ds = Dataset(trajectories=(
        Trajectory(t=t, r=r_stored, rdot=rdot, pose=pose_stored,
                   phase=phase, vb=vb),
    ))
    return segment_strides(ds)


def merge_datasets(datasets):
    """Concatenate trajectories (and their stride ranges) of several
    datasets sharing dimensions."""
    trajs = []
    ranges = []
    for ds in datasets:
        offset = len(trajs)
        trajs.extend(ds.trajectories)
        ranges.extend((ti + offset, a, b) for ti, a, b in ds.stride_ranges)
    return Dataset(trajectories=tuple(trajs), stride_ranges=tuple(ranges))


def gait_family(seed, spec, n_gaits, n_strides, amp=(0.9, 1.1),
                freq=(0.95, 1.05), dphi=(0.5 * np.pi, 0.7 * np.pi),
                noise=0.03, vel_noise=0.05, dt=1.0 / 120.0):
    """Recordings of gaits with parameters drawn uniformly from ranges.

    Cycle-to-cycle variability of real robots is modelled as many short
    recordings with jittered amplitude, rate, and inter-joint offset; the
    continuous spread keeps the local graph neighborhoods full-rank, which
    the covariance-based slope extraction needs.
    """
    ss = spawn_seeds(seed, n_gaits + 1)
    rng = np.random.default_rng(ss[0])
    parts = []
    for i in range(n_gaits):
        a = rng.uniform(*amp)
        f = rng.uniform(*freq)
        d = rng.uniform(*dphi)
        amps = tuple(a for _ in range(spec.ns))
        parts.append(gen_kinematic(spec, GaitParams(amps, freq_hz=f, dphi=d),
                                   n_strides=n_strides, dt=dt, noise=noise,
                                   vel_noise=vel_noise, seed=ss[i + 1]))
    return merge_datasets(parts)


#: the desk-scale extrapolation benchmark: train on an intermediate band of
#: inter-joint offsets at unit rate, test on offsets beyond the band on
#: both sides, driven at 1.2x the intermediate shape velocity
BENCHMARK_TRAIN_DPHI = (0.5 * np.pi, 0.7 * np.pi)
BENCHMARK_TEST_DPHI_LOW = (0.42 * np.pi, 0.48 * np.pi)
BENCHMARK_TEST_DPHI_HIGH = (0.72 * np.pi, 0.78 * np.pi)
BENCHMARK_RATE_FACTOR = 1.2
BENCHMARK_NOISE = 0.03
BENCHMARK_VEL_NOISE = 0.05


def benchmark_datasets(seed, n_train_gaits=24, n_test_gaits=5,
                       rate_factor=BENCHMARK_RATE_FACTOR):
    """(train, test) datasets of the curvature-varying extrapolation
    benchmark. The test gaits steer outside the training offset band and
    run at rate_factor times the intermediate training shape velocity."""
    spec = curvature_spec()
    s_train, s_lo, s_hi = spawn_seeds(seed, 3)
    train = gait_family(s_train, spec, n_train_gaits, 2,
                        dphi=BENCHMARK_TRAIN_DPHI,
                        noise=BENCHMARK_NOISE, vel_noise=BENCHMARK_VEL_NOISE)
    test = merge_datasets([
        gait_family(s, spec, n_test_gaits, 3, amp=(1.0, 1.0),
                    freq=(rate_factor, rate_factor), dphi=band,
                    noise=BENCHMARK_NOISE, vel_noise=BENCHMARK_VEL_NOISE)
        for s, band in ((s_lo, BENCHMARK_TEST_DPHI_LOW),
                        (s_hi, BENCHMARK_TEST_DPHI_HIGH))
    ])
    return train, test
