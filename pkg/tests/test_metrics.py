import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from depthmotion.errors import ContractViolation
from depthmotion.metrics import MultiScaleSpec, average_pool, l1_error, multiscale_l1, normalized_abs_error, rmse
from depthmotion.pipeline import DepthMap


def naive(pred, gt, f):
    h, w = gt.shape
    total = 0.0
    for i in range(h):
        for j in range(w):
            total += f(pred[i][j], gt[i][j])
    return total / (h * w)


depth_maps = arrays(np.float64, (5, 7), elements=st.floats(0.1, 200.0))


def test_identical_maps_are_zero():
    d = np.full((4, 4), 7.0)
    assert l1_error(d, d) == rmse(d, d) == normalized_abs_error(d, d) == 0.0


def test_constant_offsets():
    gt, pred = np.full((3, 3), 10.0), np.full((3, 3), 12.0)
    assert l1_error(pred, gt) == 2.0
    assert rmse(pred, gt) == pytest.approx(2.0)
    assert normalized_abs_error(np.full((3, 3), 11.0), gt) == pytest.approx(0.1)


def test_rmse_two_pixels():
    assert rmse(np.array([[1.0, 3.0]]), np.array([[1.0, 1.0]])) == pytest.approx(math.sqrt(2))


def test_accepts_depth_maps():
    assert l1_error(DepthMap(np.full((2, 2), 3.0), 0), DepthMap(np.full((2, 2), 1.0), 0)) == 2.0


def test_normalized_error_blows_up_near_zero():
    gt = np.full((2, 2), 1e-3)
    assert normalized_abs_error(gt + 0.5, gt) == pytest.approx(500.0)
    assert normalized_abs_error(gt + 0.5, gt) > normalized_abs_error(gt + 10.5, gt + 10)


def test_normalized_error_rejects_nonpositive_gt():
    with pytest.raises(ContractViolation):
        normalized_abs_error(np.ones((2, 2)), np.array([[1.0, 0.0], [1.0, 1.0]]))


def test_normalized_error_mask():
    gt = np.array([[10.0, 150.0]])
    pred = np.array([[11.0, 10.0]])
    assert normalized_abs_error(pred, gt, max_depth=100) == pytest.approx(0.1)
    assert normalized_abs_error(pred, gt) > 0.1


def test_dimension_mismatch():
    with pytest.raises(ContractViolation):
        l1_error(np.ones((2, 2)), np.ones((2, 3)))


@given(depth_maps, depth_maps)
@settings(max_examples=50)
def test_metrics_match_double_loop(pred, gt):
    assert l1_error(pred, gt) == pytest.approx(naive(pred, gt, lambda p, g: abs(p - g)), abs=1e-12, rel=1e-12)
    assert rmse(pred, gt) == pytest.approx(math.sqrt(naive(pred, gt, lambda p, g: (p - g) ** 2)), abs=1e-12, rel=1e-12)
    assert normalized_abs_error(pred, gt) == pytest.approx(naive(pred, gt, lambda p, g: abs(p - g) / g), rel=1e-12)


@given(depth_maps, depth_maps)
def test_rmse_dominates_l1(pred, gt):
    assert rmse(pred, gt) >= l1_error(pred, gt) - 1e-12


@given(depth_maps, depth_maps, st.randoms(use_true_random=False))
def test_permutation_invariance(pred, gt, rnd):
    perm = list(range(pred.size))
    rnd.shuffle(perm)
    p2, g2 = pred.ravel()[perm].reshape(pred.shape), gt.ravel()[perm].reshape(gt.shape)
    assert l1_error(p2, g2) == pytest.approx(l1_error(pred, gt), rel=1e-12)
    assert normalized_abs_error(p2, g2) == pytest.approx(normalized_abs_error(pred, gt), rel=1e-12)


def test_average_pool():
    x = np.arange(16.0).reshape(4, 4)
    assert np.array_equal(average_pool(x, 2), [[2.5, 4.5], [10.5, 12.5]])
    with pytest.raises(ContractViolation):
        average_pool(x, 3)


def test_multiscale_zero_for_pooled_truth():
    gt = np.random.default_rng(0).uniform(1, 50, (8, 8))
    spec = MultiScaleSpec((1, 2, 4), (1.0, 0.5, 0.25))
    pyramid = [average_pool(gt, s) for s in spec.scales]
    assert multiscale_l1(pyramid, gt, spec) == 0.0
    offset = [p + 1.5 for p in pyramid]
    assert multiscale_l1(offset, gt, spec) == pytest.approx(1.5 * 1.75)


def test_multiscale_single_scale_equals_l1():
    rng = np.random.default_rng(1)
    gt, pred = rng.uniform(1, 50, (8, 8)), rng.uniform(1, 50, (4, 4))
    assert multiscale_l1([pred], gt, MultiScaleSpec((2,), (1.0,))) == pytest.approx(l1_error(pred, average_pool(gt, 2)), abs=1e-12)


def test_multiscale_spec_validation():
    with pytest.raises(ContractViolation):
        MultiScaleSpec((1, 1), (1.0, 1.0))
    with pytest.raises(ContractViolation):
        MultiScaleSpec((1,), (0.0,))
