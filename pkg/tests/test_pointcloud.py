import numpy as np
import pytest

from pcst.pointcloud import (
    PointCloud,
    load_ply,
    split_dataset,
    synth_shape,
    voxelize,
    write_ply,
)


class TestPly:
    def test_ascii_three_vertices(self, tmp_path):
        p = tmp_path / "tri.ply"
        p.write_text(
            "ply\nformat ascii 1.0\nelement vertex 3\n"
            "property float x\nproperty float y\nproperty float z\n"
            "end_header\n0 0 0\n1 2 3\n4 5 6\n"
        )
        cloud = load_ply(p)
        assert len(cloud) == 3
        np.testing.assert_allclose(cloud.points[2], [4, 5, 6])

    def test_round_trip_ascii(self, tmp_path):
        pts = np.arange(30).reshape(-1, 3).astype(float)
        write_ply(tmp_path / "a.ply", pts)
        back = load_ply(tmp_path / "a.ply")
        np.testing.assert_allclose(back.points, pts)

    def test_binary_matches_ascii(self, tmp_path):
        rng = np.random.default_rng(0)
        pts = np.round(rng.uniform(-10, 10, (1000, 3)), 3)
        write_ply(tmp_path / "a.ply", pts)
        write_ply(tmp_path / "b.ply", pts, binary=True)
        a = load_ply(tmp_path / "a.ply").points
        b = load_ply(tmp_path / "b.ply").points
        np.testing.assert_allclose(a, b, atol=1e-4)

    def test_extra_vertex_properties_ignored(self, tmp_path):
        p = tmp_path / "c.ply"
        p.write_text(
            "ply\nformat ascii 1.0\nelement vertex 2\n"
            "property float x\nproperty float y\nproperty float z\n"
            "property uchar red\n"
            "end_header\n1 2 3 255\n4 5 6 0\n"
        )
        cloud = load_ply(p)
        np.testing.assert_allclose(cloud.points, [[1, 2, 3], [4, 5, 6]])

    def test_missing_axis_raises(self, tmp_path):
        p = tmp_path / "bad.ply"
        p.write_text(
            "ply\nformat ascii 1.0\nelement vertex 1\n"
            "property float x\nproperty float y\nend_header\n0 0\n"
        )
        with pytest.raises(ValueError, match="x/y/z"):
            load_ply(p)

    def test_malformed_header_raises(self, tmp_path):
        p = tmp_path / "bad.ply"
        p.write_bytes(b"not a ply file at all")
        with pytest.raises(ValueError, match="header"):
            load_ply(p)


class TestVoxelize:
    def test_two_points_same_cell(self):
        # extent below the lattice size: no rescale, both round to the origin cell
        cloud = PointCloud(np.array([[0, 0, 0], [0, 0, 0.4]]))
        out = voxelize(cloud, 3)
        assert out.coords_array().tolist() == [[0, 0, 0]]

    def test_integer_cloud_identity(self):
        pts = np.array([[0, 0, 0], [5, 2, 7], [63, 63, 63]], dtype=float)
        out = voxelize(PointCloud(pts), 6)
        assert np.array_equal(np.sort(out.coords_array(), axis=0), np.sort(pts.astype(int), axis=0))

    def test_range_bound(self):
        rng = np.random.default_rng(1)
        cloud = PointCloud(rng.uniform(0, 1, (10000, 3)))
        out = voxelize(cloud, 6)
        c = out.coords_array()
        assert c.min() >= 0 and c.max() <= 63

    def test_oversized_cloud_is_downscaled(self):
        cloud = PointCloud(np.array([[0.0, 0, 0], [200.0, 0, 0]]))
        out = voxelize(cloud, 6)
        assert out.coords_array().max() == 63

    def test_idempotent(self):
        cloud = synth_shape("sphere", 3000, seed=3, extent=63.0)
        v1 = voxelize(cloud, 6)
        v2 = voxelize(PointCloud(v1.coords_array().astype(float)), 6)
        assert np.array_equal(v1.coords_array(), v2.coords_array())

    def test_all_ones_features(self):
        out = voxelize(PointCloud(np.array([[0.0, 0, 0], [3.0, 1, 2]])), 4)
        assert out.feats.numpy().tolist() == [[1.0], [1.0]]

    def test_empty_cloud_raises(self):
        with pytest.raises(ValueError, match="empty"):
            voxelize(PointCloud(np.zeros((0, 3))), 6)

    def test_bad_depth_raises(self):
        with pytest.raises(ValueError, match="bit_depth"):
            voxelize(PointCloud(np.zeros((1, 3))), 2)


class TestSynthShape:
    def test_sphere_single_point_on_surface(self):
        cloud = synth_shape("sphere", 1, seed=0, extent=2.0, rotate=False)
        assert np.linalg.norm(cloud.points[0]) == pytest.approx(1.0, abs=1e-9)

    def test_deterministic(self):
        a = synth_shape("composite", 500, seed=17)
        b = synth_shape("composite", 500, seed=17)
        np.testing.assert_array_equal(a.points, b.points)

    def test_sphere_surface_analytic(self):
        cloud = synth_shape("sphere", 10000, seed=5, extent=2.0, rotate=False)
        r = np.linalg.norm(cloud.points, axis=1)
        np.testing.assert_allclose(r, 1.0, atol=1e-6)

    @pytest.mark.parametrize("kind", ["sphere", "torus", "box", "composite"])
    def test_kinds_and_count(self, kind):
        assert len(synth_shape(kind, 257, seed=1)) == 257

    def test_unknown_kind(self):
        with pytest.raises(ValueError, match="kind"):
            synth_shape("plane", 10, seed=0)

    def test_rotation_changes_points_not_radius(self):
        a = synth_shape("sphere", 100, seed=2, rotate=False)
        b = synth_shape("sphere", 100, seed=2, rotate=True)
        assert not np.allclose(a.points, b.points)
        np.testing.assert_allclose(
            np.linalg.norm(a.points, axis=1), np.linalg.norm(b.points, axis=1), atol=1e-9
        )


class TestSplitDataset:
    def test_80_20(self):
        train, val = split_dataset(list(range(10)), 0.8, seed=0)
        assert len(train) == 8 and len(val) == 2
        assert sorted(train + val) == list(range(10))

    def test_degenerate_single_item(self):
        train, val = split_dataset([42], 0.5, seed=0)
        assert train == [42] and val == []

    def test_deterministic(self):
        a = split_dataset(list(range(100)), 0.7, seed=9)
        b = split_dataset(list(range(100)), 0.7, seed=9)
        assert a == b

    def test_disjoint_exhaustive(self):
        train, val = split_dataset(list(range(37)), 0.33, seed=4)
        assert set(train) & set(val) == set()
        assert set(train) | set(val) == set(range(37))

    def test_bad_fraction(self):
        with pytest.raises(ValueError):
            split_dataset([1, 2], 1.0, seed=0)

    def test_empty_raises(self):
        with pytest.raises(ValueError, match="empty"):
            split_dataset([], 0.5, seed=0)
