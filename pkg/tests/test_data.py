import numpy as np
import pytest

from motilearn import (Dataset, GraphPoint, ParseError, Trajectory,
                       ValidationError, derive_velocities, export_csv,
                       ingest_csv, integrate, segment_strides)
from motilearn.data import find_phase_wraps

SCHEMA = {
    "time": "t",
    "shape": ["r0"],
    "pose": ["x", "y", "theta"],
    "phase": "phi",
}


def write_csv(path, header, rows):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(str(v) for v in row) + "\n")


class TestIngest:
    def test_three_row_file_at_120fps(self, tmp_path):
        p = tmp_path / "a.csv"
        write_csv(p, ["t", "r0"], [[0.0, 0.1], [1 / 120, 0.2], [2 / 120, 0.3]])
        ds = ingest_csv(p, {"time": "t", "shape": ["r0"]})
        tr = ds.trajectories[0]
        assert ds.ns == 1 and len(tr) == 3
        assert np.diff(tr.t) == pytest.approx([1 / 120, 1 / 120])
        assert tr.rdot is None and tr.vb is None

    def test_empty_file(self, tmp_path):
        p = tmp_path / "a.csv"
        p.write_text("")
        with pytest.raises(ValidationError):
            ingest_csv(p, {"time": "t", "shape": ["r0"]})

    def test_header_only_file(self, tmp_path):
        p = tmp_path / "a.csv"
        p.write_text("t,r0\n")
        with pytest.raises(ValidationError):
            ingest_csv(p, {"time": "t", "shape": ["r0"]})

    def test_duplicate_timestamps(self, tmp_path):
        p = tmp_path / "a.csv"
        write_csv(p, ["t", "r0"], [[0.0, 0.1], [0.0, 0.2], [0.1, 0.3]])
        with pytest.raises(ValidationError, match="increasing"):
            ingest_csv(p, {"time": "t", "shape": ["r0"]})

    def test_malformed_row_reports_line(self, tmp_path):
        p = tmp_path / "a.csv"
        write_csv(p, ["t", "r0"], [[0.0, 0.1], [0.01, "oops"], [0.02, 0.3]])
        with pytest.raises(ParseError, match="line 3"):
            ingest_csv(p, {"time": "t", "shape": ["r0"]})

    def test_missing_column(self, tmp_path):
        p = tmp_path / "a.csv"
        write_csv(p, ["t", "q"], [[0.0, 0.1]])
        with pytest.raises(ValidationError, match="r0"):
            ingest_csv(p, {"time": "t", "shape": ["r0"]})

    def test_roundtrip_lossless(self, tmp_path):
        rng = np.random.default_rng(0)
        n = 40
        t = np.sort(rng.uniform(0, 1, n))
        tr = Trajectory(
            t=t,
            r=rng.normal(size=(n, 1)),
            rdot=rng.normal(size=(n, 1)),
            pose=rng.normal(size=(n, 3)),
            phase=rng.uniform(0, 2 * np.pi, n),
            vb=rng.normal(size=(n, 3)),
        )
        ds = Dataset(trajectories=(tr,))
        schema = dict(SCHEMA, shape_vel=["dr0"], body_vel=["vx", "vy", "om"])
        p = tmp_path / "out.csv"
        export_csv(ds, p, schema)
        back = ingest_csv(p, schema).trajectories[0]
        assert np.array_equal(back.t, tr.t)
        assert np.array_equal(back.r, tr.r)
        assert np.array_equal(back.rdot, tr.rdot)
        assert np.array_equal(back.pose, tr.pose)
        assert np.array_equal(back.phase, tr.phase)
        assert np.array_equal(back.vb, tr.vb)


class TestTrajectoryInvariants:
    def test_non_monotone_time_rejected(self):
        with pytest.raises(ValidationError):
            Trajectory(t=[0.0, 0.0, 0.1], r=np.zeros((3, 1)))

    def test_phase_range_enforced(self):
        with pytest.raises(ValidationError):
            Trajectory(t=[0.0, 0.1], r=np.zeros((2, 1)),
                       phase=[0.0, 2 * np.pi])

    def test_pose_theta_unwrapped_on_construction(self):
        theta = [3.0, -3.0, 3.0]  # wrapped jumps
        tr = Trajectory(t=[0.0, 0.1, 0.2], r=np.zeros((3, 1)),
                        pose=np.column_stack([np.zeros(3), np.zeros(3), theta]))
        assert np.abs(np.diff(tr.pose[:, 2])).max() < np.pi


class TestGraphPoint:
    def test_flatten_roundtrip_exact(self):
        rng = np.random.default_rng(1)
        gp = GraphPoint(rng.normal(size=2), rng.normal(size=2), rng.normal(size=3))
        back = GraphPoint.from_vector(gp.flatten(), ns=2)
        assert np.array_equal(back.r, gp.r)
        assert np.array_equal(back.rdot, gp.rdot)
        assert np.array_equal(back.vb, gp.vb)

    def test_canonical_ordering(self):
        gp = GraphPoint(np.array([1.0]), np.array([2.0]), np.array([3.0, 4.0, 5.0]))
        assert np.array_equal(gp.flatten(), [1.0, 2.0, 3.0, 4.0, 5.0])


class TestDeriveVelocities:
    def make(self, t, r=None, pose=None):
        n = len(t)
        return Dataset(trajectories=(Trajectory(
            t=t, r=np.zeros((n, 1)) if r is None else r, pose=pose),))

    def test_constant_world_velocity_identity_frame(self):
        t = np.arange(10) / 120.0
        pose = np.column_stack([t, np.zeros(10), np.zeros(10)])
        ds = derive_velocities(self.make(t, pose=pose))
        vb = ds.trajectories[0].vb
        assert vb[:-1] == pytest.approx(
            np.tile([1.0, 0.0, 0.0], (9, 1)), abs=1e-9)

    def test_pure_rotation_about_origin(self):
        t = np.arange(10) / 120.0
        pose = np.column_stack([np.zeros(10), np.zeros(10), t])
        ds = derive_velocities(self.make(t, pose=pose))
        vb = ds.trajectories[0].vb
        assert vb[:-1] == pytest.approx(np.tile([0.0, 0.0, 1.0], (9, 1)), abs=1e-9)

    def test_sinusoid_shape_derivative(self):
        t = np.arange(0, 121) / 120.0
        r = np.sin(2 * np.pi * t)[:, None]
        ds = derive_velocities(self.make(t, r=r), want_vb=False)
        rdot = ds.trajectories[0].rdot
        i = 60  # t = 0.5
        expected = 2 * np.pi * np.cos(np.pi)
        assert abs(rdot[i, 0] - expected) < 1e-3 * abs(expected)

    def test_exact_on_affine_inputs(self):
        # linear pose (constant heading) + linear shape: derived velocities constant
        t = np.linspace(0.0, 1.0, 13)
        theta0 = 0.8
        pose = np.column_stack([0.5 * t + 1.0, -0.3 * t, np.full_like(t, theta0)])
        r = np.column_stack([2.0 * t - 1.0])
        ds = derive_velocities(self.make(t, r=r, pose=pose))
        tr = ds.trajectories[0]
        assert np.ptp(tr.rdot, axis=0) == pytest.approx([0.0], abs=1e-12)
        assert np.ptp(tr.vb[:-1], axis=0) == pytest.approx([0, 0, 0], abs=1e-12)

    def test_needs_three_samples(self):
        with pytest.raises(ValidationError):
            derive_velocities(self.make([0.0, 0.1]), want_vb=False)

    def test_keeps_existing_channels(self):
        t = np.arange(5) / 10.0
        rdot = np.full((5, 1), 7.0)
        tr = Trajectory(t=t, r=np.zeros((5, 1)), rdot=rdot)
        ds = derive_velocities(Dataset(trajectories=(tr,)), want_vb=False)
        assert np.array_equal(ds.trajectories[0].rdot, rdot)


class TestSegmentStrides:
    def ramp_phase(self, n_cycles, per=100, lead=5):
        # lead samples before the first wrap and a short tail after the last
        k = np.arange(-lead, n_cycles * per + 2)
        return np.mod(2 * np.pi * k / per, 2 * np.pi)

    def make(self, phase):
        n = len(phase)
        return Dataset(trajectories=(Trajectory(
            t=np.arange(n) / 120.0, r=np.zeros((n, 1)), phase=phase),))

    def test_three_cycles_three_strides(self):
        ds = segment_strides(self.make(self.ramp_phase(3)))
        assert len(ds.stride_ranges) == 3
        # ranges tile the wrap-to-wrap region
        for (_, a0, b0), (_, a1, b1) in zip(ds.stride_ranges, ds.stride_ranges[1:]):
            assert b0 == a1

    def test_constant_phase_no_strides_warns(self):
        messages = []
        ds = segment_strides(self.make(np.full(50, 1.0)), warn=messages.append)
        assert ds.stride_ranges == ()
        assert messages

    def test_jittered_wrap_still_three_strides(self):
        rng = np.random.default_rng(4)
        phase = self.ramp_phase(3)
        jittered = np.mod(phase + rng.uniform(-0.01, 0.01, phase.size), 2 * np.pi)
        ds = segment_strides(self.make(jittered))
        # oracle: scan for drops greater than pi
        wraps = np.flatnonzero(np.diff(jittered) < -np.pi)
        assert wraps.size - 1 == 3
        assert len(ds.stride_ranges) == 3

    def test_requires_phase(self):
        with pytest.raises(ValidationError):
            segment_strides(Dataset(trajectories=(Trajectory(
                t=[0.0, 0.1], r=np.zeros((2, 1))),)))

    def test_find_phase_wraps_threshold(self):
        phase = np.array([6.0, 6.2, 0.1, 3.0, 6.1, 0.05])
        assert list(find_phase_wraps(phase)) == [1, 4]


def test_dataset_rejects_overlapping_ranges():
    tr = Trajectory(t=np.arange(10) / 10.0, r=np.zeros((10, 1)))
    with pytest.raises(ValidationError):
        Dataset(trajectories=(tr,), stride_ranges=((0, 0, 5), (0, 3, 8)))


def test_graph_points_need_velocities():
    tr = Trajectory(t=np.arange(3) / 10.0, r=np.zeros((3, 1)))
    with pytest.raises(ValidationError):
        Dataset(trajectories=(tr,)).graph_points()
