"""Interval arithmetic: exactness, soundness, and error contracts."""

import math

import numpy as np
import pytest

from provex.errors import DimensionError, ValidationError
from provex.intervals import (
    Interval,
    IntervalVector,
    iv_activation,
    iv_add,
    iv_affine,
    iv_subset,
)


def iv(*pairs):
    return IntervalVector.from_pairs(pairs)


class TestIntervalInvariants:
    def test_reversed_endpoints_rejected(self):
        with pytest.raises(ValidationError):
            Interval(2.0, 1.0)
        with pytest.raises(ValidationError):
            IntervalVector([0.0, 3.0], [1.0, 2.0])

    def test_degenerate_intervals_are_points(self):
        v = IntervalVector.point([1.5, -2.0])
        assert np.all(v.width == 0.0)
        assert v[0] == Interval(1.5, 1.5)

    def test_non_finite_rejected(self):
        with pytest.raises(ValidationError):
            IntervalVector([0.0], [np.inf])
        with pytest.raises(ValidationError):
            IntervalVector([np.nan], [1.0])


class TestAdd:
    def test_endpoint_addition(self):
        out = iv_add(iv((1, 2)), iv((3, 4)))
        assert out[0] == Interval(4.0, 6.0)

    def test_zero_point_identity(self):
        v = iv((1, 2), (-3, 5))
        zero = IntervalVector.point([0.0, 0.0])
        assert iv_add(v, zero) == v

    def test_symmetric(self):
        out = iv_add(iv((-1, 1)), iv((-1, 1)))
        assert out[0] == Interval(-2.0, 2.0)

    def test_length_mismatch(self):
        with pytest.raises(DimensionError):
            iv_add(iv((0, 1)), iv((0, 1), (0, 1)))

    def test_commutative_and_associative_within_ulps(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            vals = rng.uniform(-10, 10, size=(3, 4, 2))
            boxes = [IntervalVector(np.minimum(v[:, 0], v[:, 1]), np.maximum(v[:, 0], v[:, 1])) for v in vals]
            a, b, c = boxes
            ab = iv_add(a, b)
            ba = iv_add(b, a)
            assert ab == ba
            left = iv_add(ab, c)
            right = iv_add(a, iv_add(b, c))
            for arr_l, arr_r in ((left.lo, right.lo), (left.hi, right.hi)):
                tol = np.array([2 * math.ulp(max(abs(l), abs(r), 1.0)) for l, r in zip(arr_l, arr_r)])
                assert np.all(np.abs(arr_l - arr_r) <= tol)


class TestAffine:
    def test_three_input_row(self):
        out = iv_affine(np.array([[2.0, 2.0, 1.0]]), IntervalVector.point([0.0]), iv((0, 1), (1, 1), (1, 1)))
        assert out[0] == Interval(3.0, 5.0)

    def test_identity_map(self):
        v = iv((0, 1), (-2, 3))
        out = iv_affine(np.eye(2), IntervalVector.point([0.0, 0.0]), v)
        assert out == v

    def test_second_row(self):
        out = iv_affine(np.array([[2.0, 1.0, 1.0]]), IntervalVector.point([0.0]), iv((3, 5), (3, 5), (6, 7)))
        assert out[0] == Interval(15.0, 22.0)

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            iv_affine(np.eye(2), IntervalVector.point([0.0, 0.0]), iv((0, 1)))
        with pytest.raises(DimensionError):
            iv_affine(np.eye(2), IntervalVector.point([0.0]), iv((0, 1), (0, 1)))

    def test_non_finite_weight(self):
        with pytest.raises(ValidationError):
            iv_affine(np.array([[np.inf]]), IntervalVector.point([0.0]), iv((0, 1)))

    def test_enclosure_soundness_on_samples(self):
        # Every image of a point in the box lies inside the affine box image.
        rng = np.random.default_rng(42)
        for _ in range(100):
            m, n = rng.integers(1, 6), rng.integers(1, 6)
            W = rng.normal(size=(m, n))
            b = rng.normal(size=m)
            lo = rng.uniform(-2, 2, n)
            hi = lo + rng.uniform(0, 2, n)
            box = IntervalVector(lo, hi)
            out = iv_affine(W, IntervalVector.point(b), box)
            pts = rng.uniform(lo, hi, size=(50, n))
            images = pts @ W.T + b
            assert np.all(images >= out.lo - 1e-9)
            assert np.all(images <= out.hi + 1e-9)

    def test_tightness_endpoints_attained(self):
        # Sign-splitting makes each output endpoint attainable at a corner.
        rng = np.random.default_rng(3)
        W = rng.normal(size=(3, 4))
        lo = rng.uniform(-1, 0, 4)
        hi = rng.uniform(0, 1, 4)
        box = IntervalVector(lo, hi)
        out = iv_affine(W, IntervalVector.point(np.zeros(3)), box)
        for i in range(3):
            corner_hi = np.where(W[i] > 0, hi, lo)
            corner_lo = np.where(W[i] > 0, lo, hi)
            assert W[i] @ corner_hi == pytest.approx(out.hi[i], abs=1e-12)
            assert W[i] @ corner_lo == pytest.approx(out.lo[i], abs=1e-12)


class TestActivation:
    def test_relu_clamps_at_zero(self):
        out = iv_activation("relu", iv((-2, 3)))
        assert out[0] == Interval(0.0, 3.0)

    def test_sigmoid_point(self):
        out = iv_activation("sigmoid", iv((0, 0)))
        assert out[0] == Interval(0.5, 0.5)

    def test_identity_unchanged(self):
        v = iv((-1, 4), (0, 0))
        assert iv_activation("identity", v) is v

    def test_unsupported_kind(self):
        with pytest.raises(ValidationError):
            iv_activation("softplus", iv((0, 1)))

    @pytest.mark.parametrize("kind", ["relu", "sigmoid", "tanh", "identity"])
    def test_exact_endpoint_images(self, kind):
        # Monotone activations map box endpoints to output endpoints exactly.
        rng = np.random.default_rng(11)
        lo = rng.uniform(-5, 5, 20)
        hi = lo + rng.uniform(0, 5, 20)
        out = iv_activation(kind, IntervalVector(lo, hi))
        from provex.intervals import apply_activation

        np.testing.assert_array_equal(out.lo, apply_activation(kind, lo))
        np.testing.assert_array_equal(out.hi, apply_activation(kind, hi))


class TestSubset:
    def test_strict_nesting(self):
        assert iv_subset(iv((1, 2)), iv((0, 3)), 0.0)

    def test_reversed(self):
        assert not iv_subset(iv((0, 3)), iv((1, 2)), 0.0)

    def test_equality_boundary(self):
        assert iv_subset(iv((1, 2)), iv((1, 2)), 0.0)

    def test_slack_loosens(self):
        assert not iv_subset(iv((0, 3.1)), iv((1, 2)), 0.0)
        assert iv_subset(iv((0.9999999999, 2)), iv((1, 2)), 1e-9)

    def test_length_mismatch(self):
        with pytest.raises(DimensionError):
            iv_subset(iv((0, 1)), iv((0, 1), (0, 1)), 0.0)

    def test_negative_slack_rejected(self):
        with pytest.raises(ValidationError):
            iv_subset(iv((0, 1)), iv((0, 1)), -1.0)
