import numpy as np
import pytest

from motilearn import (GaitParams, ValidationError, constant_spec,
                       curvature_spec, derive_velocities, gen_kinematic,
                       gen_variety, merge_datasets, stride_displacements)


class TestGenVariety:
    def test_noiseless_points_on_variety(self):
        pts = gen_variety(500, noise=0.0, seed=1)
        x, y = pts[:, 0], pts[:, 1]
        resid = y**2 - (x - 1) ** 2 * (x + 1) ** 2
        assert np.abs(resid).max() < 1e-12
        assert x.min() >= -1.5 and x.max() <= 1.5

    def test_branches_balanced(self):
        pts = gen_variety(4000, noise=0.0, seed=2)
        sign = np.sign(pts[:, 1] / (pts[:, 0] ** 2 - 1.0 + 1e-300))
        frac = np.mean(sign > 0)
        assert 0.45 < frac < 0.55

    def test_deterministic(self):
        assert np.array_equal(gen_variety(100, seed=7), gen_variety(100, seed=7))

    def test_invalid_n(self):
        with pytest.raises(ValidationError):
            gen_variety(0)


class TestGenKinematic:
    def test_zero_net_displacement_for_constant_A_no_rotation(self):
        # omega row zero and A constant: stride displacement = A * (net
        # shape change over a full cycle) = 0; the left-Riemann sums over
        # exact periods cancel to roundoff
        A0 = np.array([[0.8, -0.3], [0.1, 0.5], [0.0, 0.0]])
        ds = gen_kinematic(constant_spec(A0), GaitParams((1.0, 0.7), dphi=0.4),
                           n_strides=4, seed=0)
        tr = ds.trajectories[0]
        recs = stride_displacements(tr.poses(),
                                    [(a, b) for _, a, b in ds.stride_ranges])
        assert len(recs) == 4
        for rec in recs:
            # quadrature oracle: integral of A rdot over one cycle
            assert np.abs(rec.as_array()).max() < 1e-9

    def test_quadrature_oracle_general_spec(self):
        # independent oracle: fine Riemann sum of the body-frame flow on a
        # 16x denser grid reproduces the stride displacement to O(dt)
        spec = curvature_spec()
        gait = GaitParams((1.0, 1.0), dphi=0.9 * np.pi)
        ds = gen_kinematic(spec, gait, n_strides=2, seed=0)
        tr = ds.trajectories[0]
        ti, a, b = ds.stride_ranges[0]
        rec = stride_displacements(tr.poses(), [(a, b)])[0]

        fine = 16
        t_fine = np.linspace(tr.t[a], tr.t[b], fine * (b - a) + 1)
        r, rdot = gait.shape(t_fine)
        vb = np.einsum("nij,nj->ni", spec.A_batch(r), rdot)
        from motilearn import integrate, relative
        poses = integrate(vb[:-1], np.diff(t_fine))
        d = relative(poses[0], poses[-1])
        assert rec.as_array() == pytest.approx(
            np.array([d.x, d.y, d.theta]), abs=5e-3)

    def test_derive_velocities_roundtrip(self):
        ds = gen_kinematic(curvature_spec(), GaitParams((1.0, 1.0), dphi=np.pi),
                           n_strides=2, noise=0.0, seed=3)
        tr = ds.trajectories[0]
        import dataclasses

        stripped = dataclasses.replace(ds, trajectories=(
            dataclasses.replace(tr, vb=None, rdot=None),), stride_ranges=())
        derived = derive_velocities(stripped).trajectories[0]
        assert np.abs(derived.vb[:-1] - tr.vb[:-1]).max() < 1e-6
        # interior rdot from central differences: O(dt^2) curvature error
        assert np.abs(derived.rdot[1:-1] - tr.rdot[1:-1]).max() < 3e-3

    def test_mirror_gaits_mirror_strides(self):
        spec = curvature_spec()
        amps = (1.0, 1.0)
        dphi = 0.7 * np.pi
        fwd = gen_kinematic(spec, GaitParams(amps, dphi=dphi), n_strides=3, seed=0)
        rev = gen_kinematic(spec, GaitParams(amps, phase_offsets=(dphi, 0.0)),
                            n_strides=3, seed=0)
        recs_f = stride_displacements(
            fwd.trajectories[0].poses(), [(a, b) for _, a, b in fwd.stride_ranges])
        recs_r = stride_displacements(
            rev.trajectories[0].poses(), [(a, b) for _, a, b in rev.stride_ranges])
        for f, r in zip(recs_f, recs_r):
            assert r.dx == pytest.approx(f.dx, abs=1e-9)
            assert r.dy == pytest.approx(-f.dy, abs=1e-9)
            assert r.dtheta == pytest.approx(-f.dtheta, abs=1e-9)

    def test_stride_count_and_phase(self):
        ds = gen_kinematic(curvature_spec(), GaitParams((1.0, 1.0)), n_strides=5,
                           seed=0)
        assert len(ds.stride_ranges) == 5
        tr = ds.trajectories[0]
        assert tr.phase.min() >= 0.0 and tr.phase.max() < 2 * np.pi

    def test_noise_applies_only_to_r_and_pose(self):
        clean = gen_kinematic(curvature_spec(), GaitParams((1.0, 1.0)),
                              n_strides=2, noise=0.0, seed=5)
        noisy = gen_kinematic(curvature_spec(), GaitParams((1.0, 1.0)),
                              n_strides=2, noise=0.01, seed=5)
        a, b = clean.trajectories[0], noisy.trajectories[0]
        assert np.array_equal(a.rdot, b.rdot)
        assert np.array_equal(a.vb, b.vb)
        assert not np.array_equal(a.r, b.r)
        assert not np.array_equal(a.pose, b.pose)

    def test_joint_count_mismatch(self):
        with pytest.raises(ValidationError):
            gen_kinematic(curvature_spec(), GaitParams((1.0,)), n_strides=1)


def test_merge_datasets_offsets_ranges():
    spec = curvature_spec()
    a = gen_kinematic(spec, GaitParams((1.0, 1.0)), n_strides=2, seed=0)
    b = gen_kinematic(spec, GaitParams((1.0, 1.0), dphi=0.8 * np.pi),
                      n_strides=3, seed=1)
    merged = merge_datasets([a, b])
    assert len(merged.trajectories) == 2
    assert len(merged.stride_ranges) == 5
    assert {ti for ti, _, _ in merged.stride_ranges} == {0, 1}


def test_curvature_spec_mirror_equivariance():
    spec = curvature_spec()
    rng = np.random.default_rng(6)
    D = np.diag([1.0, -1.0, -1.0])
    swap = np.array([[0.0, 1.0], [1.0, 0.0]])
    for _ in range(20):
        r = rng.normal(size=2)
        assert spec.A(swap @ r) @ swap == pytest.approx(D @ spec.A(r), abs=1e-12)
