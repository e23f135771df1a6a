from ..context import mindcap
from mindcap.bed import masking
import pytest
import numpy as np


def test_random_mask_on_983_patches_with_ratio_075():
    plan = mindcap.random_mask(983, 0.75, np.random.default_rng(0))
    assert len(plan.masked_indices) == 737
    assert len(plan.kept_indices) == 246
    assert plan.patch_count == 983


def test_random_mask_on_4_patches_masks_3():
    plan = mindcap.random_mask(4, 0.75, 0)
    assert len(plan.masked_indices) == 3
    assert len(plan.kept_indices) == 1


def test_random_mask_plans_are_sorted_partitions_with_expected_cardinality():
    rng = np.random.default_rng(1)
    for _ in range(10000):
        count = int(rng.integers(2, 65))
        ratio = float(rng.uniform(0.05, 0.95))
        expected = masking.masked_count(count, ratio)
        plan = mindcap.random_mask(count, ratio, rng)
        union = np.concatenate([plan.kept_indices, plan.masked_indices])
        assert np.array_equal(np.sort(union), np.arange(count))
        assert len(plan.masked_indices) == expected
        assert len(plan.kept_indices) >= 1
        assert np.all(np.diff(plan.kept_indices) > 0)
        assert np.all(np.diff(plan.masked_indices) > 0)


def test_random_mask_is_a_pure_function_of_the_seed():
    first = mindcap.random_mask(100, 0.5, 3)
    second = mindcap.random_mask(100, 0.5, 3)
    assert np.array_equal(first.kept_indices, second.kept_indices)
    assert not np.array_equal(first.kept_indices, mindcap.random_mask(100, 0.5, 4).kept_indices)


def test_random_mask_raises_exception_on_invalid_ratio_or_patch_count():
    with pytest.raises(ValueError):
        mindcap.random_mask(10, 0., 0)
    with pytest.raises(ValueError):
        mindcap.random_mask(10, 1., 0)
    with pytest.raises(ValueError):
        mindcap.random_mask(1, 0.5, 0)


def test_random_mask_keeps_and_masks_at_least_one_patch():
    plan = mindcap.random_mask(2, 0.9, 0)
    assert len(plan.masked_indices) == 1
    assert len(plan.kept_indices) == 1
    assert sorted(np.concatenate([plan.kept_indices, plan.masked_indices]).tolist()) == [0, 1]
    assert len(mindcap.random_mask(2, 0.1, 0).masked_indices) == 1
    assert len(mindcap.random_mask(10, 0.99, 0).kept_indices) == 1


def test_mask_plan_raises_exception_if_indices_do_not_partition():
    with pytest.raises(ValueError):
        mindcap.MaskPlan(np.array([0, 1]), np.array([1, 2]))
    with pytest.raises(ValueError):
        mindcap.MaskPlan(np.array([0, 1]), np.array([3]))
    with pytest.raises(ValueError):
        mindcap.MaskPlan(np.array([], dtype='int64'), np.array([0, 1]))


def test_mask_plan_mask_and_full_plan():
    plan = mindcap.MaskPlan(np.array([2, 0]), np.array([1, 3]))
    assert np.array_equal(plan.kept_indices, [0, 2])
    assert np.array_equal(plan.mask, [False, True, False, True])
    full = mindcap.MaskPlan.full(5)
    assert len(full.masked_indices) == 0
    assert np.array_equal(full.kept_indices, np.arange(5))


def test_stack_plans_raises_exception_on_unequal_cardinalities():
    plans = [mindcap.random_mask(10, 0.5, s) for s in range(3)]
    kept, masked = masking.stack_plans(plans)
    assert kept.shape == (3, 5) and masked.shape == (3, 5)
    with pytest.raises(ValueError):
        masking.stack_plans([mindcap.random_mask(10, 0.5, 0), mindcap.random_mask(10, 0.3, 0)])
