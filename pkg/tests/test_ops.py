"""Unit tests for the tensor primitives, anchored to loop oracles."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from attnseg import (
    CrossLayerStack,
    DataError,
    ScoreStack,
    SelfLayerStack,
    adjoint_upsample,
    aggregate_class_tokens,
    average_layers_cross,
    average_layers_self,
    hflip,
    interp_matrix,
    minmax_normalize,
    resize_scores,
    upsample_bilinear,
)
from oracles import W_2_TO_4, interp_matrix_loop, mean_layers_loop, upsample_loop


class TestInterpMatrix:
    def test_2_to_4_matches_hand_derived_matrix(self):
        np.testing.assert_allclose(interp_matrix(2, 4), W_2_TO_4, atol=1e-15)

    def test_identity_when_sizes_match(self):
        np.testing.assert_array_equal(interp_matrix(5, 5), np.eye(5))

    def test_single_input_broadcasts_constant(self):
        np.testing.assert_array_equal(interp_matrix(1, 7), np.ones((7, 1)))

    @pytest.mark.parametrize("n_in,n_out", [(2, 4), (4, 8), (8, 64), (3, 10), (16, 64)])
    def test_rows_are_convex(self, n_in, n_out):
        m = interp_matrix(n_in, n_out)
        assert (m >= 0).all()
        np.testing.assert_allclose(m.sum(axis=1), 1.0, atol=1e-12)

    @pytest.mark.parametrize("n_in,n_out", [(2, 4), (4, 16), (5, 13)])
    def test_matches_loop_construction(self, n_in, n_out):
        np.testing.assert_allclose(interp_matrix(n_in, n_out), interp_matrix_loop(n_in, n_out), atol=1e-15)

    def test_endpoints_map_exactly(self):
        m = interp_matrix(4, 64)
        np.testing.assert_array_equal(m[0], [1, 0, 0, 0])
        np.testing.assert_array_equal(m[-1], [0, 0, 0, 1])

    def test_rejects_nonpositive_sizes(self):
        with pytest.raises(DataError):
            interp_matrix(0, 4)


class TestUpsample:
    def test_matches_loop_oracle(self, rng):
        plane = rng.random((4, 4))
        np.testing.assert_allclose(
            upsample_bilinear(plane, (9, 9)), upsample_loop(plane, 9, 9), atol=1e-12
        )

    def test_same_size_is_bitwise_copy(self, rng):
        plane = rng.random((8, 8))
        out = upsample_bilinear(plane, (8, 8))
        assert out is not plane
        np.testing.assert_array_equal(out, plane)

    def test_constant_plane_stays_constant(self):
        # row weights sum to 1 up to one rounding step, so constants survive
        # to float precision rather than bitwise
        out = upsample_bilinear(np.full((4, 4), 3.25), (64, 64))
        np.testing.assert_allclose(out, np.full((64, 64), 3.25), rtol=1e-14)

    def test_range_never_widens(self, rng):
        plane = rng.random((8, 8))
        out = upsample_bilinear(plane, (64, 64))
        assert out.min() >= plane.min() - 1e-12
        assert out.max() <= plane.max() + 1e-12

    def test_rejects_non_2d(self):
        with pytest.raises(DataError):
            upsample_bilinear(np.zeros((2, 2, 2)), (4, 4))


class TestAdjoint:
    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.sampled_from([2, 4, 8, 16]))
    def test_adjoint_identity(self, seed, r):
        rng = np.random.default_rng(seed)
        a = rng.standard_normal((r, r))
        b = rng.standard_normal((64, 64))
        lhs = float(np.sum(upsample_bilinear(a, (64, 64)) * b))
        rhs = float(np.sum(a * adjoint_upsample(b, (r, r))))
        assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)

    def test_adjoint_of_ones_equals_column_sums(self):
        w = interp_matrix(4, 64)
        expected = np.outer(w.sum(axis=0), w.sum(axis=0))
        np.testing.assert_allclose(adjoint_upsample(np.ones((64, 64)), (4, 4)), expected, atol=1e-12)


class TestMinmax:
    def test_affine_rescale(self):
        plane = np.array([[2.0, 4.0], [6.0, 10.0]])
        np.testing.assert_allclose(
            minmax_normalize(plane), np.array([[0.0, 0.25], [0.5, 1.0]]), atol=1e-15
        )

    def test_constant_plane_maps_to_zeros(self):
        np.testing.assert_array_equal(minmax_normalize(np.full((3, 3), 7.5)), np.zeros((3, 3)))

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_range_is_unit_interval_with_endpoints_hit(self, seed):
        plane = np.random.default_rng(seed).standard_normal((6, 6))
        out = minmax_normalize(plane)
        assert out.min() == 0.0
        assert out.max() == 1.0

    def test_shift_and_positive_scale_invariant(self, rng):
        plane = rng.standard_normal((5, 5))
        np.testing.assert_allclose(
            minmax_normalize(plane), minmax_normalize(3.7 * plane + 11.0), atol=1e-12
        )


class TestHflip:
    def test_reverses_columns(self):
        plane = np.array([[1, 2, 3], [4, 5, 6]])
        np.testing.assert_array_equal(hflip(plane), [[3, 2, 1], [6, 5, 4]])

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_involution_is_bitwise(self, seed):
        arr = np.random.default_rng(seed).standard_normal((3, 5, 7))
        np.testing.assert_array_equal(hflip(hflip(arr)), arr)


class TestLayerAveraging:
    def test_cross_matches_scalar_loop(self, rng):
        layers = tuple(rng.random((4, 4, 6)) for _ in range(3))
        got = average_layers_cross(CrossLayerStack(4, layers))
        np.testing.assert_allclose(got, mean_layers_loop(layers), atol=1e-12)

    def test_self_matches_scalar_loop(self, rng):
        layers = tuple(rng.random((3, 3, 3, 3)) for _ in range(2))
        got = average_layers_self(SelfLayerStack(3, layers))
        np.testing.assert_allclose(got, mean_layers_loop(layers), atol=1e-12)

    def test_single_layer_returned_unchanged(self, rng):
        layer = rng.random((4, 4, 5)).astype(np.float32)
        stack = CrossLayerStack(4, (layer,))
        got = average_layers_cross(stack)
        np.testing.assert_array_equal(got, layer)

    def test_average_of_stochastic_layers_stays_stochastic(self, rng):
        layers = []
        for _ in range(4):
            raw = rng.random((4, 4, 4, 4)) + 1e-3
            layers.append(raw / raw.sum(axis=(2, 3), keepdims=True))
        avg = average_layers_self(SelfLayerStack(4, tuple(layers)))
        np.testing.assert_allclose(avg.sum(axis=(2, 3)), 1.0, atol=1e-6)

    def test_empty_stack_rejected(self):
        with pytest.raises(DataError):
            average_layers_cross(CrossLayerStack(4, ()))

    def test_mismatched_layer_shapes_rejected(self, rng):
        stack = CrossLayerStack(4, (rng.random((4, 4, 6)), rng.random((4, 4, 7))))
        with pytest.raises(DataError):
            average_layers_cross(stack)


class TestTokenAggregation:
    def test_single_token_span_returns_exact_slice(self, rng):
        cross = rng.random((4, 4, 9)).astype(np.float32)
        np.testing.assert_array_equal(aggregate_class_tokens(cross, (3, 4)), cross[:, :, 3])

    def test_two_token_span_averages(self):
        cross = np.zeros((2, 2, 5))
        cross[:, :, 2] = 0.1
        cross[:, :, 3] = 0.3
        np.testing.assert_allclose(aggregate_class_tokens(cross, (2, 4)), np.full((2, 2), 0.2), atol=1e-15)

    @pytest.mark.parametrize("span", [(-1, 2), (3, 3), (4, 2), (3, 99)])
    def test_bad_spans_rejected(self, span, rng):
        with pytest.raises(DataError):
            aggregate_class_tokens(rng.random((4, 4, 9)), span)


class TestResizeScores:
    def test_same_size_returns_same_object(self, rng):
        stack = ScoreStack(("a",), rng.random((1, 8, 8)))
        assert resize_scores(stack, (8, 8)) is stack

    def test_values_stay_in_unit_interval(self, rng):
        stack = ScoreStack(("a", "b"), rng.random((2, 16, 16)))
        out = resize_scores(stack, (50, 40))
        assert out.planes.shape == (2, 50, 40)
        assert out.planes.min() >= 0.0
        assert out.planes.max() <= 1.0

    def test_matches_per_plane_upsampling(self, rng):
        planes = rng.random((2, 4, 4))
        out = resize_scores(ScoreStack(("a", "b"), planes), (11, 13))
        for i in range(2):
            np.testing.assert_allclose(out.planes[i], upsample_loop(planes[i], 11, 13), atol=1e-12)

    def test_linearity(self, rng):
        p = rng.random((1, 4, 4))
        q = rng.random((1, 4, 4))
        lhs = resize_scores(ScoreStack(("a",), 0.5 * (p + q)), (9, 9)).planes
        rhs = 0.5 * (
            resize_scores(ScoreStack(("a",), p), (9, 9)).planes
            + resize_scores(ScoreStack(("a",), q), (9, 9)).planes
        )
        np.testing.assert_allclose(lhs, rhs, atol=1e-12)
