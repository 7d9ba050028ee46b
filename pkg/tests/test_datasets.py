import struct

import numpy as np
import pytest

from radarqi.datasets import (
    read_idx_images,
    read_idx_labels,
    shape_rasters,
    split_dataset,
    synthetic_digit_rasters,
    write_idx_images,
    write_idx_labels,
)
from radarqi.errors import FormatError


class TestIdxFormat:
    def test_image_round_trip(self, tmp_path):
        rng = np.random.default_rng(0)
        images = rng.integers(0, 256, size=(12, 28, 28)).astype(np.uint8)
        path = tmp_path / "imgs.idx3-ubyte"
        write_idx_images(path, images)
        np.testing.assert_array_equal(read_idx_images(path), images)

    def test_label_round_trip(self, tmp_path):
        labels = np.arange(12, dtype=np.uint8) % 10
        path = tmp_path / "labels.idx1-ubyte"
        write_idx_labels(path, labels)
        np.testing.assert_array_equal(read_idx_labels(path), labels)

    def test_header_count_defines_length(self, tmp_path):
        images = np.zeros((7, 28, 28), dtype=np.uint8)
        path = tmp_path / "imgs.bin"
        write_idx_images(path, images)
        assert len(read_idx_images(path)) == 7

    def test_wrong_magic(self, tmp_path):
        path = tmp_path / "bad.bin"
        path.write_bytes(struct.pack(">iiii", 0x00000802, 1, 28, 28) + b"\0" * 784)
        with pytest.raises(FormatError, match="magic"):
            read_idx_images(path)

    def test_zero_image_file(self, tmp_path):
        path = tmp_path / "empty.bin"
        write_idx_images(path, np.zeros((0, 28, 28), dtype=np.uint8))
        assert read_idx_images(path).shape == (0, 28, 28)

    def test_truncated_payload_reports_offset(self, tmp_path):
        path = tmp_path / "short.bin"
        path.write_bytes(struct.pack(">iiii", 0x00000803, 2, 28, 28) + b"\0" * 100)
        with pytest.raises(FormatError, match="offset 116"):
            read_idx_images(path)

    def test_dimension_mismatch(self, tmp_path):
        path = tmp_path / "odd.bin"
        path.write_bytes(struct.pack(">iiii", 0x00000803, 1, 14, 14) + b"\0" * 196)
        with pytest.raises(FormatError, match="dimension"):
            read_idx_images(path)


class TestSplit:
    def test_sizes_and_disjointness(self):
        rasters = np.zeros((2500, 28, 28), dtype=np.uint8)
        train, val, test = split_dataset(rasters, seed=3)
        assert (len(train), len(val), len(test)) == (800, 200, 1000)
        union = set(train) | set(val) | set(test)
        assert len(union) == 2000

    def test_deterministic_per_seed(self):
        rasters = np.zeros((2500, 28, 28), dtype=np.uint8)
        a = split_dataset(rasters, seed=11)
        b = split_dataset(rasters, seed=11)
        for x, y in zip(a, b):
            np.testing.assert_array_equal(x, y)

    def test_seeds_differ(self):
        rasters = np.zeros((2500, 28, 28), dtype=np.uint8)
        for seed in range(5):
            a = split_dataset(rasters, seed=seed)
            b = split_dataset(rasters, seed=seed + 100)
            assert any(not np.array_equal(x, y) for x, y in zip(a, b))

    def test_insufficient_rasters(self):
        with pytest.raises(ValueError, match="at least 2000"):
            split_dataset(np.zeros((100, 28, 28), dtype=np.uint8), seed=0)

    def test_custom_sizes(self):
        rasters = np.zeros((400, 28, 28), dtype=np.uint8)
        train, val, test = split_dataset(rasters, seed=0, sizes=(200, 50, 100))
        assert (len(train), len(val), len(test)) == (200, 50, 100)


class TestSyntheticDigits:
    def test_shape_and_dtype(self):
        rasters = synthetic_digit_rasters(20, seed=0)
        assert rasters.shape == (20, 28, 28)
        assert rasters.dtype == np.uint8

    def test_deterministic(self):
        np.testing.assert_array_equal(
            synthetic_digit_rasters(10, seed=5), synthetic_digit_rasters(10, seed=5)
        )

    def test_visible_and_sparse(self):
        rasters = synthetic_digit_rasters(50, seed=1)
        for r in rasters:
            assert r.max() >= 150  # a clearly visible stroke
            assert np.count_nonzero(r) < 0.5 * r.size  # spatially sparse


class TestShapeRasters:
    def test_gallery(self):
        gallery = shape_rasters()
        assert {"rectangle", "cross", "ring"} <= set(gallery)
        assert any(name.startswith("letter_") for name in gallery)
        for name, raster in gallery.items():
            assert raster.shape == (28, 28), name
            assert raster.dtype == np.uint8
            assert raster.max() == 255
