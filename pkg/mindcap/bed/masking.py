import dataclasses

import numpy as _np


@dataclasses.dataclass(frozen=True, eq=False)
class MaskPlan:
    """Partition of the P patches of a sequence into kept and masked patches.

    Attributes:
        kept_indices (ndarray): sorted indices of the patches seen by the encoder.
        masked_indices (ndarray): sorted indices of the patches to predict.

    """

    kept_indices: _np.ndarray
    masked_indices: _np.ndarray

    def __post_init__(self):
        kept = _np.asarray(self.kept_indices, dtype='int64')
        masked = _np.asarray(self.masked_indices, dtype='int64')
        union = _np.concatenate([kept, masked])
        if len(kept) == 0:
            raise ValueError('A mask plan must keep at least one patch.')
        if len(_np.unique(union)) != len(union) or not _np.array_equal(_np.sort(union), _np.arange(len(union))):
            raise ValueError('kept and masked indices must partition the patch indices.')
        object.__setattr__(self, 'kept_indices', _np.sort(kept))
        object.__setattr__(self, 'masked_indices', _np.sort(masked))

    @property
    def patch_count(self):
        return len(self.kept_indices) + len(self.masked_indices)

    @property
    def mask(self):
        """Boolean (P,) array, True at masked patches."""
        mask = _np.zeros(self.patch_count, dtype=bool)
        mask[self.masked_indices] = True
        return mask

    @classmethod
    def full(cls, patch_count):
        """Inference plan: every patch kept, none masked."""
        return cls(_np.arange(patch_count), _np.array([], dtype='int64'))


def masked_count(patch_count, ratio):
    """round(ratio × patch_count), clamped to [1, patch_count - 1]."""
    return min(max(int(_np.floor(ratio * patch_count + 0.5)), 1), patch_count - 1)


def random_mask(patch_count, ratio, rng):
    """Draws a uniformly random mask plan with round(ratio × patch_count) masked patches.

    The masked count is clamped to [1, P - 1]: with P=2 and ratio 0.9, one patch is masked and one kept.

    Args:
        patch_count (int): number of patches P, at least 2.
        ratio (float): mask ratio in ]0, 1[.
        rng (numpy.random.Generator or int): generator, or seed of a new one.

    Returns:
        (:class:`MaskPlan`)

    """
    if not 0 < ratio < 1:
        raise ValueError(f'ratio must be in ]0, 1[, not {ratio}.')
    if patch_count < 2:
        raise ValueError(f'patch_count must be at least 2, not {patch_count}.')
    n_masked = masked_count(patch_count, ratio)
    if not isinstance(rng, _np.random.Generator):
        rng = _np.random.default_rng(rng)
    order = rng.permutation(patch_count)
    return MaskPlan(kept_indices=order[n_masked:], masked_indices=order[:n_masked])


def stack_plans(plans):
    """Stacks per-sample plans of equal cardinality into (B, n_kept) and (B, n_masked) index arrays."""
    plans = list(plans)
    counts = {(len(p.kept_indices), len(p.masked_indices)) for p in plans}
    if len(counts) != 1:
        raise ValueError(f'Plans of a batch must have equal cardinalities, not {sorted(counts)}.')
    return _np.stack([p.kept_indices for p in plans]), _np.stack([p.masked_indices for p in plans])
