import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aosr.dataio import (
    Box,
    Dataset,
    bounding_box,
    default_unknown_box,
    gen_double_moon,
    gen_gaussian_blob,
    gen_unknown_uniform,
    load_dataset,
    load_features,
    moon_centerline_distance,
    save_dataset,
    save_features,
)
from aosr.errors import InfeasibleRegion, InvalidArgument, ParseError
from aosr.rng import Rng


class TestDataset:
    def test_rejects_label_above_unknown(self):
        with pytest.raises(InvalidArgument):
            Dataset(np.zeros((2, 2)), np.array([0, 3]), num_known_classes=2)

    def test_allows_unknown_label_at_c(self):
        d = Dataset(np.zeros((2, 2)), np.array([0, 2]), num_known_classes=2)
        with pytest.raises(InvalidArgument):
            d.require_known_only()

    def test_rejects_shape_mismatch(self):
        with pytest.raises(InvalidArgument):
            Dataset(np.zeros((3, 2)), np.array([0, 1]), num_known_classes=2)

    def test_rejects_non_finite(self):
        with pytest.raises(InvalidArgument):
            Dataset(np.array([[np.nan, 0.0]]), np.array([0]), 1)


class TestDoubleMoon:
    def test_balanced_labels(self):
        d = gen_double_moon(4, 0.0, Rng(7))
        assert sorted(d.labels.tolist()) == [0, 0, 1, 1]
        assert d.num_known_classes == 2 and d.dim == 2

    def test_noiseless_class0_on_unit_circle(self):
        d = gen_double_moon(200, 0.0, Rng(1))
        radii = np.linalg.norm(d.features[d.labels == 0], axis=1)
        assert np.max(np.abs(radii - 1.0)) < 1e-12

    def test_noiseless_class1_on_shifted_circle(self):
        d = gen_double_moon(200, 0.0, Rng(1))
        shifted = d.features[d.labels == 1] - np.array([1.0, 0.5])
        assert np.max(np.abs(np.linalg.norm(shifted, axis=1) - 1.0)) < 1e-12

    def test_seeded_determinism(self):
        a = gen_double_moon(200, 0.1, Rng(3))
        b = gen_double_moon(200, 0.1, Rng(3))
        assert np.array_equal(a.features, b.features)
        assert np.array_equal(a.labels, b.labels)

    @pytest.mark.parametrize("n", [0, 3, -2])
    def test_rejects_bad_n(self, n):
        with pytest.raises(InvalidArgument):
            gen_double_moon(n, 0.1, Rng(0))

    def test_rejects_negative_noise(self):
        with pytest.raises(InvalidArgument):
            gen_double_moon(4, -0.1, Rng(0))


class TestUnknownUniform:
    def test_zero_margin_fills_box(self):
        box = default_unknown_box()
        rows = gen_unknown_uniform(100, box, 0.0, Rng(5))
        assert rows.shape == (100, 2)
        assert box.contains(rows).all()

    def test_margin_respected(self):
        rows = gen_unknown_uniform(100, None, 0.2, Rng(5))
        assert (moon_centerline_distance(rows) > 0.2).all()

    def test_infeasible_region_raises(self):
        # margin large enough that the exclusion swallows the whole box
        box = Box(np.array([-0.1, 0.9]), np.array([0.1, 1.1]))
        with pytest.raises(InfeasibleRegion):
            gen_unknown_uniform(1, box, 5.0, Rng(0))

    def test_deterministic(self):
        a = gen_unknown_uniform(50, None, 0.2, Rng(9))
        b = gen_unknown_uniform(50, None, 0.2, Rng(9))
        assert np.array_equal(a, b)


class TestGaussianBlob:
    def test_clt_mean(self):
        rows = gen_gaussian_blob(10000, np.zeros(2), 1.0, Rng(2))
        assert np.all(np.abs(rows.mean(axis=0)) < 0.05)

    def test_single_row_matches_first_draw(self):
        mean = np.array([1.0, -2.0])
        row = gen_gaussian_blob(1, mean, 0.5, Rng(6))
        z = Rng(6).standard_normal((1, 2))
        assert np.array_equal(row, mean + 0.5 * z)

    def test_rejects_zero_std(self):
        with pytest.raises(InvalidArgument):
            gen_gaussian_blob(1, np.zeros(2), 0.0, Rng(0))


class TestBoundingBox:
    def test_zero_margin_is_min_max(self):
        box = bounding_box(np.array([[0.0, 0.0], [1.0, 2.0]]), 0.0)
        assert np.array_equal(box.lower, [0.0, 0.0])
        assert np.array_equal(box.upper, [1.0, 2.0])

    def test_fractional_margin(self):
        box = bounding_box(np.array([[0.0, 0.0], [1.0, 2.0]]), 0.2)
        assert np.allclose(box.lower, [-0.2, -0.4])
        assert np.allclose(box.upper, [1.2, 2.4])

    def test_single_point_gets_nondegenerate_box(self):
        box = bounding_box(np.array([[5.0, 5.0]]), 0.2)
        assert np.all(box.lower < 5.0) and np.all(box.upper > 5.0)

    def test_empty_rejected(self):
        with pytest.raises(InvalidArgument):
            bounding_box(np.zeros((0, 2)), 0.1)


class TestCsvRoundTrip:
    def test_dataset_round_trip(self, tmp_path):
        d = Dataset(
            np.array([[0.25, -1.5], [1e-17, 3.0], [math.pi, 2.0 / 3.0]]),
            np.array([0, 1, 1]),
            num_known_classes=2,
        )
        path = str(tmp_path / "d.csv")
        save_dataset(d, path)
        loaded = load_dataset(path)
        assert np.array_equal(loaded.features, d.features)
        assert np.array_equal(loaded.labels, d.labels)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_round_trip_random(self, seed):
        import tempfile

        rng = Rng(seed)
        n = int(rng.integers(1, 12))
        d_cols = int(rng.integers(1, 5))
        data = Dataset(
            rng.standard_normal((n, d_cols)) * 10.0 ** rng.integers(-12, 12),
            rng.integers(0, 3, n),
            num_known_classes=3,
        )
        with tempfile.TemporaryDirectory() as tmp:
            path = f"{tmp}/d.csv"
            save_dataset(data, path)
            loaded = load_dataset(path)
        assert np.array_equal(loaded.features, data.features)
        assert np.array_equal(loaded.labels, data.labels)

    def test_label_out_of_declared_range(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("f0,f1,label\n0.0,0.0,2\n")
        with pytest.raises(ParseError, match="line 2"):
            load_dataset(str(path), num_known_classes=2)
        # the same file is fine when unknown labels are allowed
        loaded = load_dataset(str(path), num_known_classes=2, allow_unknown=True)
        assert loaded.labels.tolist() == [2]

    def test_header_mismatch(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("x,y,label\n0.0,0.0,0\n")
        with pytest.raises(ParseError):
            load_dataset(str(path))

    def test_non_integer_label(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("f0,label\n0.0,0.5\n")
        with pytest.raises(ParseError, match="line 2"):
            load_dataset(str(path))

    def test_features_round_trip(self, tmp_path):
        rows = Rng(4).standard_normal((5, 3))
        path = str(tmp_path / "f.csv")
        save_features(rows, path)
        assert np.array_equal(load_features(path), rows)

    def test_features_bad_field_count(self, tmp_path):
        path = tmp_path / "f.csv"
        path.write_text("f0,f1\n0.0\n")
        with pytest.raises(ParseError, match="line 2"):
            load_features(str(path))
