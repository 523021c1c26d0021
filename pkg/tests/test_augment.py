import numpy as np
import pytest

from motilearn import (AugmentConfig, EmConfig, GaussianBranchingRegressor,
                       RuledSurfaceAugmenter, ValidationError, assign_members,
                       build_agbr, gen_variety, sphere_weights, synthesize)
from motilearn.augment import export_augmented_csv


class TestSphereWeights:
    def test_c1_is_sign(self):
        rng = np.random.default_rng(0)
        vals = {float(sphere_weights(1, rng)[0]) for _ in range(20)}
        assert vals <= {-1.0, 1.0}
        assert len(vals) == 2

    @pytest.mark.parametrize("c", [1, 2, 5, 9])
    def test_unit_norm(self, c):
        rng = np.random.default_rng(1)
        for _ in range(100):
            b = sphere_weights(c, rng)
            assert abs(b @ b - 1.0) < 1e-12

    def test_symmetry_monte_carlo(self):
        rng = np.random.default_rng(2)
        draws = np.array([sphere_weights(3, rng) for _ in range(100_000)])
        assert np.abs(draws.mean(axis=0)).max() < 0.02

    def test_invalid_c(self):
        with pytest.raises(ValidationError):
            sphere_weights(0, np.random.default_rng(0))


@pytest.fixture(scope="module")
def variety_gbr():
    pts = gen_variety(1000, 0.15, seed=0)
    model = GaussianBranchingRegressor(n_components=8, seed=0).fit(
        pts[:, :1], pts[:, 1])
    return pts, model


class TestAssignMembers:
    def test_mean_is_member(self, variety_gbr):
        pts, model = variety_gbr
        for k, g in enumerate(model.components_):
            members = assign_members(g.mu[None, :], model)
            assert 0 in members[k]

    def test_three_sigma_point_not_member(self):
        rng = np.random.default_rng(3)
        X = rng.standard_normal((500, 2))
        model = GaussianBranchingRegressor(n_components=1, seed=0).fit(
            X[:, :1], X[:, 1])
        g = model.components_[0]
        w, V = np.linalg.eigh(g.S)
        far = g.mu + 3.0 * np.sqrt(w) @ (np.abs(V).T)  # > 3 sigma along axes
        members = assign_members(far[None, :], model)
        assert members[0].size == 0

    def test_variety_sets_match_direct_scan(self, variety_gbr):
        # oracle: brute-force membership scan with explicit inverses; the
        # m <= 1 typical set holds ~63% of a 2-D Gaussian's mass, so the
        # total membership count sits below N even with overlaps
        pts, model = variety_gbr
        members = assign_members(pts, model)
        counts = np.zeros(pts.shape[0], dtype=int)
        for k, g in enumerate(model.components_):
            Sinv = np.linalg.inv(g.S)
            diff = pts - g.mu
            m = np.sum(diff @ Sinv * diff, axis=1) / 2.0
            expected = np.flatnonzero(m <= 1.0)
            assert np.array_equal(members[k], expected)
            counts[expected] += 1
        assert all(idx.size > 0 for idx in members)
        assert counts.max() >= 2  # overlapping sets exist
        assert sum(idx.size for idx in members) == 757  # frozen oracle count


class TestSynthesize:
    def test_c1_beta1_reflection_or_copy(self):
        rng = np.random.default_rng(4)
        pts = rng.normal(size=(6, 5))
        mu = pts.mean(axis=0)
        cfg = AugmentConfig(alpha=2.0, beta=1.0, c=1, K=1, seed=0)
        syn = synthesize(pts, mu, 1, cfg, np.random.default_rng(0))
        assert syn.shape == (12, 5)
        for row in syn:
            dists = np.linalg.norm(
                np.vstack([pts - mu, -(pts - mu)]) - (row - mu), axis=1)
            assert dists.min() < 1e-10

    @pytest.mark.parametrize("beta", [0.5, 1.0, 1.2, 2.0])
    @pytest.mark.parametrize("seed", range(3))
    def test_affine_closure(self, beta, seed):
        # members satisfy v - mu_v = A0 (rdot - mu_rdot) exactly; so do the
        # synthetic points, for any beta
        rng = np.random.default_rng(seed)
        ns, nb, n = 2, 3, 40
        A0 = rng.normal(size=(nb, ns))
        r = rng.normal(size=(n, ns))
        rdot = rng.normal(size=(n, ns))
        mu = rng.normal(size=2 * ns + nb)
        v = mu[2 * ns:] + (rdot - mu[ns:2 * ns]) @ A0.T
        pts = np.hstack([r, rdot, v])
        cfg = AugmentConfig(alpha=1.0, beta=beta, c=5, K=1, seed=0)
        syn = synthesize(pts, mu, ns, cfg, np.random.default_rng(seed))
        assert syn.shape[0] == n
        resid = (syn[:, 2 * ns:] - mu[2 * ns:]) - \
            (syn[:, ns:2 * ns] - mu[ns:2 * ns]) @ A0.T
        assert np.abs(resid).max() < 1e-10

    def test_below_threshold_empty(self):
        rng = np.random.default_rng(5)
        pts = rng.normal(size=(4, 5))
        cfg = AugmentConfig(alpha=1.0, beta=1.2, c=5, K=1, seed=0)
        syn = synthesize(pts, pts.mean(axis=0), 1, cfg, rng)
        assert syn.shape[0] == 0

    @pytest.mark.parametrize("alpha", [0.3, 1.0, 2.7])
    def test_count_law_exact(self, alpha):
        rng = np.random.default_rng(6)
        for n in (5, 17, 101):
            pts = rng.normal(size=(n, 5))
            cfg = AugmentConfig(alpha=alpha, beta=1.2, c=5, K=1, seed=0)
            syn = synthesize(pts, pts.mean(axis=0), 1, cfg, rng)
            assert syn.shape[0] == int(np.ceil(alpha * n))

    def test_r_block_stays_in_affine_hull(self):
        rng = np.random.default_rng(7)
        ns, n = 3, 30
        pts = rng.normal(size=(n, 2 * ns + 3))
        mu = rng.normal(size=2 * ns + 3)
        cfg = AugmentConfig(alpha=1.0, beta=2.0, c=4, K=1, seed=0)
        syn = synthesize(pts, mu, ns, cfg, np.random.default_rng(1))
        basis = (pts[:, :ns] - mu[:ns]).T  # (ns, n)
        for row in syn:
            sol, res, *_ = np.linalg.lstsq(basis, row[:ns] - mu[:ns], rcond=None)
            err = np.linalg.norm(basis @ sol - (row[:ns] - mu[:ns]))
            assert err < 1e-12

    def test_determinism(self):
        rng_pts = np.random.default_rng(8)
        pts = rng_pts.normal(size=(20, 5))
        cfg = AugmentConfig(alpha=1.5, beta=1.2, c=3, K=1, seed=0)
        a = synthesize(pts, pts.mean(axis=0), 1, cfg, np.random.default_rng(9))
        b = synthesize(pts, pts.mean(axis=0), 1, cfg, np.random.default_rng(9))
        assert np.array_equal(a, b)


class TestAugmenter:
    def test_fit_augment_counts_and_provenance(self, variety_gbr):
        pts, _ = variety_gbr
        cfg = AugmentConfig(alpha=1.0, beta=1.2, c=5, K=8, seed=0)
        aug = RuledSurfaceAugmenter(ns=1, cfg=cfg, em=EmConfig(K=8, seed=0))
        Z_all, prov = aug.fit_augment(pts[:, :1], pts[:, 1])
        n_orig = pts.shape[0]
        assert np.all(prov[:n_orig] == -1)
        expected = sum(int(np.ceil(cfg.alpha * idx.size))
                       for idx in aug.members_ if idx.size >= cfg.c)
        assert Z_all.shape[0] == n_orig + expected
        assert set(prov[n_orig:]) <= set(range(8))

    def test_alpha_small_one_point_per_component(self, variety_gbr):
        pts, _ = variety_gbr
        cfg = AugmentConfig(alpha=1e-9, beta=1.2, c=5, K=8, seed=0)
        aug = RuledSurfaceAugmenter(ns=1, cfg=cfg, em=EmConfig(K=8, seed=0))
        aug.fit(pts[:, :1], pts[:, 1])
        syn, comp_ids = aug.augment()
        eligible = sum(1 for idx in aug.members_ if idx.size >= cfg.c)
        assert syn.shape[0] == eligible
        assert eligible == 8

    def test_schedule_independence(self, variety_gbr):
        pts, _ = variety_gbr
        cfg = AugmentConfig(alpha=0.5, beta=1.2, c=5, K=8, seed=3)
        a = RuledSurfaceAugmenter(ns=1, cfg=cfg).fit(pts[:, :1], pts[:, 1])
        b = RuledSurfaceAugmenter(ns=1, cfg=cfg).fit(pts[:, :1], pts[:, 1])
        assert np.array_equal(a.augment()[0], b.augment()[0])


def test_build_agbr_same_K_and_deterministic():
    from motilearn import GaitParams, curvature_spec, gen_kinematic

    ds = gen_kinematic(curvature_spec(), GaitParams((1.0, 1.0), dphi=0.9 * np.pi),
                       n_strides=4, noise=0.005, seed=1)
    cfg = AugmentConfig(alpha=1.0, beta=1.2, c=5, K=6, seed=2)
    em = EmConfig(K=6, n_init=1, seed=2)
    m1, aug1 = build_agbr(ds, cfg, em)
    m2, aug2 = build_agbr(ds, cfg, em)
    assert len(m1.mixture_.weights_) == 6
    assert np.array_equal(m1.mixture_.means_, m2.mixture_.means_)
    assert np.array_equal(m1.slopes_, m2.slopes_)


def test_export_augmented_csv(tmp_path):
    from motilearn import GaitParams, curvature_spec, gen_kinematic

    ds = gen_kinematic(curvature_spec(), GaitParams((1.0, 1.0), dphi=0.9 * np.pi),
                       n_strides=2, seed=0)
    X, y = ds.graph_arrays()
    cfg = AugmentConfig(alpha=0.1, beta=1.2, c=5, K=4, seed=0)
    aug = RuledSurfaceAugmenter(ns=2, cfg=cfg, em=EmConfig(K=4, n_init=1, seed=0))
    aug.fit(X, y)
    syn, comp_ids = aug.augment()
    schema = {"time": "t", "shape": ["r0", "r1"], "shape_vel": ["dr0", "dr1"],
              "body_vel": ["vx", "vy", "om"], "phase": "phi",
              "pose": ["x", "y", "theta"]}
    path = tmp_path / "aug.csv"
    export_augmented_csv(path, ds, syn, comp_ids, schema)
    lines = path.read_text().splitlines()
    assert lines[0].endswith("provenance")
    n_rows = sum(len(tr) for tr in ds.trajectories)
    assert len(lines) == 1 + n_rows + syn.shape[0]
    assert lines[1].endswith("original")
    assert lines[-1].split(",")[-1].startswith("synthetic:")
