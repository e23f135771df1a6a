"""Closed-form ridge regression from voxels to visual latents with cross-validated regularization."""
import logging

import numpy as _np
from scipy import linalg as _linalg

from .. import _utils, checkpoint as _checkpoint
from ..data.transforms import TrainStatistics
from ._base import ReconError

logger = logging.getLogger(__name__)

CHECKPOINT_KIND = 'ridge'
DEFAULT_GRID = (1., 10., 100., 1000., 10000., 100000.)


def r2_score(targets, predictions):
    """Coefficient of determination averaged over target columns.

    Columns with zero variance are ignored.
    """
    targets = _np.asarray(targets, dtype='float64')
    predictions = _np.asarray(predictions, dtype='float64')
    if targets.shape != predictions.shape:
        raise ReconError(f'Targets {targets.shape} and predictions {predictions.shape} shapes mismatch.')
    residual = ((targets - predictions) ** 2).sum(axis=0)
    total = ((targets - targets.mean(axis=0)) ** 2).sum(axis=0)
    valid = total > 0
    if not valid.any():
        raise ReconError('R² undefined for constant targets.')
    return float(_np.mean(1. - residual[valid] / total[valid]))


def _design(x_std):
    return _np.concatenate([x_std, _np.ones((len(x_std), 1))], axis=1)


def _solve(gram, cross, ridge_lambda):
    penalty = _np.full(len(gram), float(ridge_lambda))
    penalty[-1] = 0.
    system = gram + _np.diag(penalty)
    if ridge_lambda == 0 and _np.linalg.matrix_rank(system) < len(system):
        raise ReconError(f'Singular ridge system: rank {_np.linalg.matrix_rank(system)} < {len(system)} with λ=0.')
    try:
        return _linalg.solve(system, cross, assume_a='pos')
    except _linalg.LinAlgError as e:
        raise ReconError(f'Singular ridge system with λ={ridge_lambda}: {e}') from e


class RidgeMap:
    """Linear map from (raw) voxels to latents.

    Inputs are z-scored with training statistics, targets are predicted in standardized
    units then mapped back to latent units.

    Attributes:
        weights (ndarray): (V + 1, d_z) weights, last row is the unpenalized bias.
        ridge_lambda (float): regularization.
        statistics (TrainStatistics): input voxel statistics.
        target_mean, target_std (ndarray): latent standardization.
        cv_scores (dict): cross-validated R² per λ when λ was selected, else empty.

    """

    def __init__(self, weights, ridge_lambda, statistics, target_mean, target_std, cv_scores=None):
        weights = _np.asarray(weights, dtype='float64')
        if weights.ndim != 2 or not _np.all(_np.isfinite(weights)):
            raise ReconError('Ridge weights must be a finite 2 dimensions array.')
        if ridge_lambda < 0:
            raise ReconError(f'λ must be positive, not {ridge_lambda}.')
        if weights.shape[0] != len(statistics) + 1:
            raise ReconError(f'Weights rows {weights.shape[0]} do not match {len(statistics)} voxels plus bias.')
        self.weights = weights
        self.ridge_lambda = float(ridge_lambda)
        self.statistics = statistics
        self.target_mean = _np.asarray(target_mean, dtype='float64')
        self.target_std = _np.asarray(target_std, dtype='float64')
        self.cv_scores = dict(cv_scores or {})

    @property
    def coef(self):
        return self.weights[:-1]

    @property
    def input_size(self):
        return len(self.statistics)

    @property
    def output_size(self):
        return self.weights.shape[1]

    def predict(self, voxels):
        """Latents predicted for a (n, V) or (V,) voxel array."""
        voxels = _np.asarray(voxels, dtype='float64')
        single = voxels.ndim == 1
        voxels = _np.atleast_2d(voxels)
        if voxels.shape[1] != self.input_size:
            raise ReconError(f'Ridge map expects {self.input_size} voxels, not {voxels.shape[1]}.')
        out = _design(self.statistics.apply(voxels)) @ self.weights * self.target_std + self.target_mean
        return out[0] if single else out

    def __call__(self, voxels):
        return self.predict(voxels)

    def to_checkpoint(self, metadata=None):
        tensors = {
            'weights': self.weights, 'statistics.mean': self.statistics.mean, 'statistics.std': self.statistics.std,
            'target.mean': self.target_mean, 'target.std': self.target_std,
        }
        meta = {'cv_scores': {str(k): v for k, v in self.cv_scores.items()}}
        meta.update(metadata or {})
        return _checkpoint.Checkpoint(CHECKPOINT_KIND, tensors, config={'ridge_lambda': self.ridge_lambda}, metadata=meta)

    @classmethod
    def from_checkpoint(cls, checkpoint):
        t = checkpoint.tensors
        return cls(
            t['weights'], checkpoint.config['ridge_lambda'], TrainStatistics(t['statistics.mean'], t['statistics.std']),
            t['target.mean'], t['target.std'],
            cv_scores={float(k): v for k, v in checkpoint.metadata.get('cv_scores', {}).items()}
        )

    def __str__(self):
        return f'''Ridge map:
    Voxels  : {self.input_size}
    Latents : {self.output_size}
    λ       : {self.ridge_lambda}
        '''


def _fit(voxels, latents, ridge_lambda):
    statistics = TrainStatistics.from_array(voxels)
    target_mean = latents.mean(axis=0)
    target_std = _np.maximum(latents.std(axis=0), 1e-8)
    design = _design(statistics.apply(voxels))
    weights = _solve(design.T @ design, design.T @ ((latents - target_mean) / target_std), ridge_lambda)
    return RidgeMap(weights, ridge_lambda, statistics, target_mean, target_std)


def cross_validate(voxels, latents, grid=DEFAULT_GRID, folds=5, seed=0):
    """Cross-validated R² of each λ of `grid`, folds drawn from a seeded permutation."""
    if len(voxels) < folds:
        raise ReconError(f'{len(voxels)} samples are not enough for {folds} folds.')
    order = _np.random.default_rng(seed).permutation(len(voxels))
    splits = _np.array_split(order, folds)
    scores = {}
    for ridge_lambda in grid:
        fold_scores = []
        for k, held_out in enumerate(splits):
            train = _np.concatenate([s for j, s in enumerate(splits) if j != k])
            model = _fit(voxels[train], latents[train], ridge_lambda)
            fold_scores.append(r2_score(latents[held_out], model.predict(voxels[held_out])))
        scores[float(ridge_lambda)] = float(_np.mean(fold_scores))
        logger.debug(f'Ridge λ={ridge_lambda}: cross-validated R² {scores[float(ridge_lambda)]:.4f}.')
    return scores


def fit_ridge(voxels, latents, ridge_lambda=None, grid=DEFAULT_GRID, folds=5, seed=0):
    """Fits a ridge map W = (XᵀX + λI)⁻¹XᵀZ on z-scored voxels with an unpenalized bias.

    Args:
        voxels (ndarray): (n, V) training voxels.
        latents (ndarray): (n, d_z) training latents.
        ridge_lambda (float, default=None): regularization; if None, selected on `grid` by
            `folds`-fold cross-validated R².
        grid (sequence, default=(1, ..., 1e5)): candidate λ values.
        folds (int, default=5): cross-validation folds.
        seed (int, default=0): folds seed.

    Returns:
        (:class:`RidgeMap`)

    Raises:
        ReconError: on row count mismatch, negative λ, or a singular system with λ=0.

    """
    voxels = _np.asarray(voxels, dtype='float64')
    latents = _np.asarray(latents, dtype='float64')
    if voxels.ndim != 2 or latents.ndim != 2:
        raise ReconError(f'Voxels and latents must be 2 dimensions arrays, not {voxels.shape} and {latents.shape}.')
    if len(voxels) != len(latents):
        raise ReconError(f'Row counts differ: {len(voxels)} voxel rows and {len(latents)} latent rows.')
    if ridge_lambda is not None and ridge_lambda < 0:
        raise ReconError(f'λ must be positive, not {ridge_lambda}.')
    _utils.check_memory(8 * (voxels.shape[1] + 1) ** 2 * 3, ReconError, 'Ridge normal equations')
    scores = {}
    if ridge_lambda is None:
        scores = cross_validate(voxels, latents, grid=grid, folds=folds, seed=seed)
        ridge_lambda = max(scores, key=lambda k: (scores[k], -k))
        logger.info(f'Ridge λ={ridge_lambda} selected with cross-validated R² {scores[ridge_lambda]:.4f}.')
    model = _fit(voxels, latents, ridge_lambda)
    model.cv_scores = scores
    return model
