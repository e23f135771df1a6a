import hashlib as _hashlib
import logging
import math
import random as _random

import numpy as _np
import psutil
import torch

logger = logging.getLogger(__name__)


def _is_float_array(array, name='array', ndim=None):
    if not isinstance(array, _np.ndarray):
        raise TypeError(f'{name} should be a Numpy ndarray instance, not {type(array)}.')
    if array.dtype.kind != 'f':
        raise ValueError(f'{name} should be a float array, not {array.dtype}.')
    if ndim is not None and array.ndim != ndim:
        raise ValueError(f'{name} should be a {ndim} dimensions array, not {array.ndim}.')
    return True


def _is_finite(array, name='array'):
    if not _np.all(_np.isfinite(array)):
        raise ValueError(f'{name} contains non-finite values.')
    return True


def seed_everything(seed, deterministic=False):
    """Seed python, numpy and torch random generators.

    Args:
        seed (int): global seed.
        deterministic (bool, default=False): if True, torch is switched to deterministic algorithms
            on a single thread, so that repeated runs are bit-identical.

    """
    if not isinstance(seed, int) or seed < 0:
        raise ValueError(f'seed should be a positive integer, not {seed}.')
    _random.seed(seed)
    _np.random.seed(seed % 2 ** 32)
    torch.manual_seed(seed)
    if deterministic:
        torch.use_deterministic_algorithms(True)
        torch.set_num_threads(1)
    logger.debug(f'Random generators seeded with {seed}, deterministic mode {deterministic}.')


def derive_seed(base, *labels):
    """Derive a 32 bits seed from a base seed and a sequence of labels.

    The result does not depend on the order in which other seeds were derived, so per-item
    streams (e.g. one per stimulus id) stay reproducible whatever the processing order.

    """
    payload = '/'.join([str(base)] + [str(label) for label in labels]).encode()
    return int.from_bytes(_hashlib.sha256(payload).digest()[:4], 'little')


def torch_generator(seed):
    generator = torch.Generator()
    generator.manual_seed(int(seed))
    return generator


def tensors_digest(tensors):
    """SHA-256 over sorted (name, dtype, shape, bytes) of a mapping of arrays or tensors."""
    sha = _hashlib.sha256()
    for name in sorted(tensors):
        value = tensors[name]
        if isinstance(value, torch.Tensor):
            value = value.detach().cpu().numpy()
        value = _np.ascontiguousarray(value)
        sha.update(name.encode())
        sha.update(str(value.dtype.str).encode())
        sha.update(str(value.shape).encode())
        sha.update(value.tobytes())
    return sha.hexdigest()


def module_digest(module, prefix=''):
    """Digest of all parameters and buffers of a torch module."""
    return tensors_digest({f'{prefix}{k}': v for k, v in module.state_dict().items()})


def file_digest(path):
    sha = _hashlib.sha256()
    with open(path, 'rb') as fid:
        for chunk in iter(lambda: fid.read(1 << 20), b''):
            sha.update(chunk)
    return sha.hexdigest()


def check_memory(needed_bytes, error_class, what):
    """Raise `error_class` if `needed_bytes` is more than 90% of the available memory."""
    available = psutil.virtual_memory().available
    logger.debug(f'Needed memory for {what} estimated to {needed_bytes / 2 ** 30} GB, for available {available / 2 ** 30} GB.')
    if needed_bytes > 0.9 * available:
        raise error_class(
            f'{what} will probably need more than 90% of your available memory - {available / 2 ** 30} GB available against {needed_bytes / 2 ** 30} GB needed.'
        )


def warmup_cosine(warmup_steps, total_steps):
    """Learning rate multiplier: linear warmup then cosine decay to zero, per optimizer step."""
    def _(step):
        if step < warmup_steps:
            return (step + 1) / warmup_steps
        progress = (step - warmup_steps) / max(1, total_steps - warmup_steps)
        return 0.5 * (1. + math.cos(math.pi * min(progress, 1.)))
    return _


def check_finite(loss, error_class, where, last_finite):
    if not math.isfinite(loss):
        raise error_class(f'Training diverged at {where}: loss is {loss}, last finite loss was {last_finite}.')
