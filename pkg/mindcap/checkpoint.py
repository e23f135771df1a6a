"""Self-describing checkpoint container shared by every trained artifact.

Layout of a checkpoint file:

    MAGIC (8 bytes) | header length (uint64, little-endian) | JSON header | tensor bytes

The JSON header holds the checkpoint kind, the configuration section and its hash,
free metadata, an optional RNG state and the tensor table (dtype, shape, offset, size).
Tensor bytes are little-endian and written in sorted-name order, so that writing the
same content twice always produces identical bytes.

"""
import hashlib as _hashlib
import json as _json
import logging
import struct as _struct

import numpy as _np
import torch

from . import _utils

logger = logging.getLogger(__name__)

MAGIC = b'MINDCAP\x01'
_SUPPORTED_DTYPES = ('<f4', '<f8', '<i8', '<i4', '|u1', '|b1')


class CheckpointError(Exception):
    pass


def canonical_json(obj):
    return _json.dumps(obj, sort_keys=True, separators=(',', ':'))


def config_hash(config):
    """SHA-256 of the canonical JSON dump of a configuration mapping."""
    return _hashlib.sha256(canonical_json(config).encode()).hexdigest()


def _to_little_endian(array):
    array = _np.ascontiguousarray(array)
    if array.dtype.byteorder == '>':
        array = array.astype(array.dtype.newbyteorder('<'))
    if array.dtype.str not in _SUPPORTED_DTYPES:
        raise CheckpointError(f'Unsupported tensor dtype {array.dtype}.')
    return array


class Checkpoint:
    """Named tensors with the configuration that produced them.

    Attributes:
        kind (str): artifact kind, e.g. 'bed', 'lm', 'vlp', 'blm', 'ridge', 'autoencoder', 'denoiser'.
        tensors (dict): mapping of tensor name to numpy array.
        config (dict): configuration section used to build the artifact.
        metadata (dict): JSON serializable training metadata (loss curve, provenance, ...).
        rng_state (dict): optional JSON serializable random generator state.

    """

    def __init__(self, kind, tensors, config=None, metadata=None, rng_state=None):
        if not isinstance(kind, str) or not kind:
            raise TypeError(f'kind must be a non empty str, not {kind}.')
        if not isinstance(tensors, dict):
            raise TypeError(f'tensors must be a dict, not {type(tensors)}.')
        self.kind = kind
        self.tensors = {}
        for name, value in tensors.items():
            if isinstance(value, torch.Tensor):
                value = value.detach().cpu().numpy()
            self.tensors[name] = _to_little_endian(_np.asarray(value))
        self.config = dict(config) if config is not None else {}
        self.metadata = dict(metadata) if metadata is not None else {}
        self.rng_state = rng_state

    @classmethod
    def from_module(cls, kind, module, config=None, metadata=None, prefix='', rng_state=None):
        tensors = {f'{prefix}{k}': v for k, v in module.state_dict().items()}
        return cls(kind, tensors, config=config, metadata=metadata, rng_state=rng_state)

    @property
    def config_hash(self):
        return config_hash(self.config)

    def digest(self, prefix=''):
        """Digest of the tensors whose name starts with `prefix`."""
        return _utils.tensors_digest({k: v for k, v in self.tensors.items() if k.startswith(prefix)})

    def state_dict(self, prefix=''):
        """Returns a torch state dict of the tensors under `prefix`, with `prefix` stripped."""
        return {
            k[len(prefix):]: torch.from_numpy(_np.array(v))
            for k, v in self.tensors.items() if k.startswith(prefix)
        }

    def load_into(self, module, prefix=''):
        state = self.state_dict(prefix)
        if not state:
            raise CheckpointError(f'No tensor with prefix {prefix!r} in {self.kind} checkpoint.')
        try:
            module.load_state_dict(state)
        except RuntimeError as e:
            raise CheckpointError(f'Checkpoint {self.kind} does not match module {type(module).__name__}: {e}') from e
        return module

    def check_config(self, config):
        if config_hash(config) != self.config_hash:
            raise CheckpointError(f'Config hash mismatch for {self.kind} checkpoint.')

    def to_bytes(self):
        table = {}
        offset = 0
        for name in sorted(self.tensors):
            array = self.tensors[name]
            table[name] = {'dtype': array.dtype.str, 'shape': list(array.shape), 'offset': offset, 'size': array.nbytes}
            offset += array.nbytes
        header = {
            'kind': self.kind,
            'config': self.config,
            'config_hash': self.config_hash,
            'metadata': self.metadata,
            'rng_state': self.rng_state,
            'tensors': table,
        }
        header_bytes = canonical_json(header).encode()
        chunks = [MAGIC, _struct.pack('<Q', len(header_bytes)), header_bytes]
        chunks.extend(self.tensors[name].tobytes() for name in sorted(self.tensors))
        return b''.join(chunks)

    @classmethod
    def from_bytes(cls, data, kind=None):
        if data[:len(MAGIC)] != MAGIC:
            raise CheckpointError('Not a mindcap checkpoint, magic bytes mismatch.')
        start = len(MAGIC) + 8
        try:
            (length,) = _struct.unpack('<Q', data[len(MAGIC):start])
            header = _json.loads(data[start:start + length].decode())
        except (_struct.error, ValueError) as e:
            raise CheckpointError(f'Corrupted checkpoint header: {e}') from e
        if kind is not None and header['kind'] != kind:
            raise CheckpointError(f'Expected a {kind} checkpoint, got {header["kind"]}.')
        if config_hash(header['config']) != header['config_hash']:
            raise CheckpointError(f'Config hash mismatch in {header["kind"]} checkpoint header.')
        body = data[start + length:]
        tensors = {}
        for name, entry in header['tensors'].items():
            end = entry['offset'] + entry['size']
            if end > len(body):
                raise CheckpointError(f'Truncated checkpoint, tensor {name} is incomplete.')
            tensors[name] = _np.frombuffer(
                body[entry['offset']:end], dtype=_np.dtype(entry['dtype'])
            ).reshape(entry['shape']).copy()
        expected = sum(e['size'] for e in header['tensors'].values())
        if expected != len(body):
            raise CheckpointError(f'Checkpoint body has {len(body)} bytes, {expected} expected.')
        return cls(header['kind'], tensors, config=header['config'], metadata=header['metadata'], rng_state=header['rng_state'])

    def save(self, path):
        data = self.to_bytes()
        with open(path, 'wb') as fid:
            fid.write(data)
        logger.info(f'{self.kind} checkpoint saved to {path} ({len(data)} bytes).')
        return _hashlib.sha256(data).hexdigest()

    @classmethod
    def load(cls, path, kind=None):
        try:
            with open(path, 'rb') as fid:
                data = fid.read()
        except OSError as e:
            raise CheckpointError(f'Unable to read checkpoint {path}: {e}') from e
        checkpoint = cls.from_bytes(data, kind=kind)
        logger.debug(f'{checkpoint.kind} checkpoint loaded from {path} with {len(checkpoint.tensors)} tensors.')
        return checkpoint

    def __str__(self):
        return f'''Checkpoint:
    Kind        : {self.kind}
    Tensors     : {len(self.tensors)}
    Parameters  : {sum(v.size for v in self.tensors.values())}
    Config hash : {self.config_hash[:16]}
    '''


def torch_rng_state(generator):
    """JSON serializable state of a torch generator."""
    return {'torch': generator.get_state().numpy().tolist()}
