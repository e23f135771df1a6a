import torch

from .model import BedError, plan_indices
from .masking import MaskPlan


def bed_loss(pred, target, plan, loss_on='masked'):
    """Mean squared error over the masked patches, averaged over the batch.

    Args:
        pred (Tensor): (P, patch_size) or (B, P, patch_size) predictions.
        target (Tensor): target patches, same shape.
        plan (MaskPlan or list of MaskPlan): plan(s) used for the prediction.
        loss_on (str, default='masked'): 'masked', or 'all' to average over every patch.

    Returns:
        (Tensor) scalar loss.

    """
    if pred.shape != target.shape:
        raise BedError(f'Prediction shape {tuple(pred.shape)} differs from target shape {tuple(target.shape)}.')
    if loss_on not in ('masked', 'all'):
        raise ValueError(f'loss_on must be masked or all, not {loss_on}.')
    if pred.ndim == 2:
        pred, target = pred[None], target[None]
    per_patch = ((pred - target) ** 2).mean(dim=-1)
    if loss_on == 'all':
        return per_patch.mean()
    if isinstance(plan, MaskPlan) and len(plan.masked_indices) == 0:
        raise BedError('Cannot compute a masked loss on a plan without masked patches.')
    _, masked = plan_indices(plan, pred.shape[0])
    if masked.shape[1] == 0:
        raise BedError('Cannot compute a masked loss on a plan without masked patches.')
    return torch.gather(per_patch, 1, masked).mean()
