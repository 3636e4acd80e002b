"""Tests for box geometry: spatial classes, relative geometry, sinusoidal embedding."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from relvqa.autodiff import ConfigError, ValidationError
from relvqa.geometry import (
    BBox,
    COVER,
    INSIDE,
    NO_RELATION,
    OVERLAP,
    classify_spatial,
    inverse_spatial_class,
    pair_geometry_embedding,
    relative_geometry,
    sinusoidal_embed,
)

from helpers import grid_boxes


class TestClassifySpatial:
    def test_nested_box_is_inside(self):
        assert classify_spatial(BBox(2, 2, 1, 1), BBox(0, 0, 10, 10)) == INSIDE

    def test_mirrored_containment_is_cover(self):
        assert classify_spatial(BBox(0, 0, 10, 10), BBox(2, 2, 1, 1)) == COVER

    def test_heavy_overlap(self):
        assert classify_spatial(BBox(0, 0, 10, 10), BBox(2, 0, 10, 10)) == OVERLAP

    def test_far_apart_is_no_relation(self):
        assert classify_spatial(BBox(0, 0, 1, 1), BBox(100, 100, 1, 1)) == NO_RELATION

    def test_direction_sectors(self):
        a = BBox(0, 0, 2, 2)  # center (1, 1); same-size boxes stay related within distance 8
        assert classify_spatial(a, BBox(5, 0, 2, 2)) == 4  # due +x
        assert classify_spatial(a, BBox(5, 3, 2, 2)) == 4  # below 45 degrees
        assert classify_spatial(a, BBox(3, 5, 2, 2)) == 5  # above 45 degrees
        assert classify_spatial(a, BBox(0, 5, 2, 2)) == 6  # due +y
        assert classify_spatial(a, BBox(-5, 0, 2, 2)) == 8  # due -x
        assert classify_spatial(a, BBox(0, -5, 2, 2)) == 10  # due -y

    def test_degenerate_box_rejected(self):
        with pytest.raises(ValidationError, match="degenerate"):
            BBox(0, 0, 0, 1)

    def test_bad_threshold_rejected(self):
        with pytest.raises(ValidationError):
            classify_spatial(BBox(0, 0, 1, 1), BBox(1, 1, 1, 1), far_threshold=0.0)

    def test_containment_beats_distance_pruning(self):
        # a tiny box tucked in the corner of a huge one stays "inside"
        assert classify_spatial(BBox(1, 1, 1, 1), BBox(0, 0, 500, 500), far_threshold=0.01) == INSIDE

    def test_grid_sweep_inverse_class_symmetry(self):
        boxes = grid_boxes(n_positions=4, sizes=(2, 7))
        pairs = 0
        for i, a in enumerate(boxes):
            for b in boxes[i + 1 :]:
                assert classify_spatial(a, b) == inverse_spatial_class(classify_spatial(b, a))
                pairs += 1
        assert pairs > 400

    def test_translation_and_uniform_scale_invariance(self):
        boxes = grid_boxes(n_positions=3, sizes=(2, 5))
        for i, a in enumerate(boxes):
            for b in boxes[i + 1 :]:
                base = classify_spatial(a, b)
                shifted = classify_spatial(
                    BBox(a.x + 17, a.y - 9, a.w, a.h), BBox(b.x + 17, b.y - 9, b.w, b.h)
                )
                scaled = classify_spatial(
                    BBox(3 * a.x, 3 * a.y, 3 * a.w, 3 * a.h), BBox(3 * b.x, 3 * b.y, 3 * b.w, 3 * b.h)
                )
                assert base == shifted == scaled


class TestRelativeGeometry:
    def test_identical_boxes_hit_the_clamp(self):
        b = BBox(3, 4, 2, 5)
        out = relative_geometry(b, b, eps=1e-3)
        np.testing.assert_allclose(
            out, [math.log(1e-3 / 2), math.log(1e-3 / 5), 0.0, 0.0], atol=1e-12
        )

    def test_double_width_gives_log_two(self):
        out = relative_geometry(BBox(0, 0, 2, 2), BBox(10, 0, 4, 2))
        assert out[2] == pytest.approx(math.log(2), abs=1e-12)
        assert out[3] == 0.0

    def test_output_always_finite(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            a = BBox(*rng.uniform(0.1, 50, size=2), *rng.uniform(0.1, 20, size=2))
            b = BBox(*rng.uniform(0.1, 50, size=2), *rng.uniform(0.1, 20, size=2))
            assert np.isfinite(relative_geometry(a, b)).all()

    @given(st.integers(0, 10_000))
    @settings(max_examples=60, deadline=None)
    def test_swap_negates_extent_components_exactly(self, seed):
        rng = np.random.default_rng(seed)
        a = BBox(*rng.uniform(0, 50, size=2), *rng.uniform(0.1, 20, size=2))
        b = BBox(*rng.uniform(0, 50, size=2), *rng.uniform(0.1, 20, size=2))
        fwd = relative_geometry(a, b)
        rev = relative_geometry(b, a)
        assert fwd[2] == -rev[2]
        assert fwd[3] == -rev[3]

    def test_bad_eps_rejected(self):
        with pytest.raises(ValidationError):
            relative_geometry(BBox(0, 0, 1, 1), BBox(1, 1, 1, 1), eps=0.0)


class TestSinusoidalEmbed:
    def test_zero_input_alternates_zero_one(self):
        out = sinusoidal_embed(np.zeros(4), 16)
        np.testing.assert_array_equal(out[0::2], np.zeros(8))
        np.testing.assert_array_equal(out[1::2], np.ones(8))

    def test_paper_scale_dimension(self):
        out = sinusoidal_embed(np.array([0.3, -1.2, 0.7, 2.0]), 64)
        assert out.shape == (64,)

    def test_entries_bounded_by_one(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            out = sinusoidal_embed(rng.normal(scale=5.0, size=4), 24)
            assert np.abs(out).max() <= 1.0

    def test_indivisible_dimension_rejected(self):
        with pytest.raises(ConfigError, match="divisible by 8"):
            sinusoidal_embed(np.zeros(4), 12)

    def test_known_entry(self):
        out = sinusoidal_embed(np.array([1.0, 0.0, 0.0, 0.0]), 16)
        assert out[0] == pytest.approx(math.sin(1.0), abs=1e-15)
        assert out[2] == pytest.approx(math.sin(1.0 / 1000**0.5), abs=1e-15)

    def test_deterministic(self):
        raw = np.array([0.1, 0.2, 0.3, 0.4])
        assert sinusoidal_embed(raw, 16).tobytes() == sinusoidal_embed(raw, 16).tobytes()


class TestPairGeometryEmbedding:
    def test_shape_and_row_order(self):
        boxes = [BBox(0, 0, 2, 2), BBox(5, 5, 3, 3)]
        mat = pair_geometry_embedding(boxes, 16)
        assert mat.shape == (4, 16)
        row = sinusoidal_embed(relative_geometry(boxes[0], boxes[1]), 16)
        np.testing.assert_array_equal(mat[1], row)
