"""Checkpoint files: trained parameters plus everything needed to resume.

Layout (all integers little-endian; see docs/checkpoint-format.md):

    magic      8 bytes   b"OTFSCKPT"
    version    uint16
    config     uint32 length + UTF-8 JSON object, keys sorted
    count      uint32 number of tensors
    tensors    per tensor: uint16 name length, UTF-8 name, uint8 ndim,
               ndim x uint32 dims, float64 data in C order
    checksum   32 bytes SHA-256 of everything above
"""
from collections import OrderedDict
import hashlib
import json
import os
import struct

import numpy as np

from otfslab.core.errors import CheckpointError, DimensionError
from otfslab.ddcl.network import build_model
from otfslab.ddcl.training import Adam, TrainingState

import logging
logger = logging.getLogger(__name__)

MAGIC = b'OTFSCKPT'
VERSION = 1
DIGEST_SIZE = 32

PARAMS = 'params/'
CURRENT = 'current/'
MOMENT1 = 'adam.m/'
MOMENT2 = 'adam.v/'

# Keys checked against a caller's expectations on load
SIGNATURE_KEYS = ('M', 'N', 'K', 'tau', 'hidden', 'architecture')


class Checkpoint(object):

    def __init__(self, config, tensors):
        self.config = config
        self.tensors = tensors

    def __repr__(self):
        return "Checkpoint(%s, %d tensors)" % (self.config.get('architecture'), len(self.tensors))

    def group(self, prefix):
        return OrderedDict((name[len(prefix):], value) for name, value in self.tensors.items()
            if name.startswith(prefix))

    @property
    def params(self):
        return self.group(PARAMS)

    def model(self):
        model = build_model(self.config)
        try:
            model.check_params(self.params)
        except DimensionError as e:
            raise CheckpointError("Checkpoint tensors don't fit %r: %s" % (model, e))
        return model

    def training_state(self):
        """Rebuilds the TrainingState a run was in when this was written."""
        resume = self.config.get('training')
        if not resume:
            raise CheckpointError("Checkpoint has no training state to resume from")
        optimizer = Adam(resume['learning_rate'])
        optimizer.t = resume['adam_t']
        optimizer.m = self.group(MOMENT1)
        optimizer.v = self.group(MOMENT2)
        return TrainingState(self.group(CURRENT), optimizer, iteration=resume['iteration'],
            best_params=self.params, best_cost=resume['best_cost'],
            bad_evaluations=resume['bad_evaluations'], stopped=resume['stopped'])


def _encode(config, tensors):
    chunks = [MAGIC, struct.pack('<H', VERSION)]
    config_bytes = json.dumps(config, sort_keys=True, separators=(',', ':')).encode('utf8')
    chunks.append(struct.pack('<I', len(config_bytes)) + config_bytes)
    chunks.append(struct.pack('<I', len(tensors)))
    for name, value in tensors.items():
        value = np.ascontiguousarray(value, dtype='<f8')
        encoded = name.encode('utf8')
        chunks.append(struct.pack('<H', len(encoded)) + encoded)
        chunks.append(struct.pack('<B', value.ndim) + struct.pack('<%dI' % value.ndim, *value.shape))
        chunks.append(value.tobytes())
    body = b''.join(chunks)
    return body + hashlib.sha256(body).digest()


def save_checkpoint(path, model, params, meta=None, state=None):
    """Writes `params` (the parameters to deploy) with the model config and
    `meta`; with a TrainingState, also the resume data."""
    config = model.config()
    config.update(meta or {})
    tensors = OrderedDict((PARAMS + name, params[name]) for name in model.shapes)
    if state is not None:
        config['training'] = {
            'iteration': state.iteration,
            'adam_t': state.optimizer.t,
            'learning_rate': state.optimizer.learning_rate,
            'best_cost': state.best_cost,
            'bad_evaluations': state.bad_evaluations,
            'stopped': state.stopped,
        }
        for prefix, group in ((CURRENT, state.params), (MOMENT1, state.optimizer.m), (MOMENT2, state.optimizer.v)):
            for name in model.shapes:
                if name in group:
                    tensors[prefix + name] = group[name]
    data = _encode(config, tensors)
    # Written under a temporary name, then renamed into place
    tmp = path + '.tmp'
    with open(tmp, 'wb') as f:
        f.write(data)
    os.replace(tmp, path)
    logger.info("Saved %s checkpoint to %s" % (model.architecture, path))


class _Reader(object):

    def __init__(self, data):
        self.data = data
        self.offset = 0

    def take(self, size):
        if self.offset + size > len(self.data):
            raise CheckpointError("Checkpoint is truncated")
        chunk = self.data[self.offset:self.offset + size]
        self.offset += size
        return chunk

    def unpack(self, fmt):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def decode_checkpoint(data):
    if len(data) < len(MAGIC) + DIGEST_SIZE or not data.startswith(MAGIC):
        raise CheckpointError("Not an otfslab checkpoint")
    body, digest = data[:-DIGEST_SIZE], data[-DIGEST_SIZE:]
    reader = _Reader(body)
    reader.take(len(MAGIC))
    version, = reader.unpack('<H')
    if version != VERSION:
        raise CheckpointError("Checkpoint format version %d; this build reads version %d" % (version, VERSION))
    if hashlib.sha256(body).digest() != digest:
        raise CheckpointError("Checkpoint checksum mismatch (truncated or corrupt file)")
    length, = reader.unpack('<I')
    try:
        config = json.loads(reader.take(length).decode('utf8'))
    except ValueError:
        raise CheckpointError("Checkpoint config block is not valid JSON")
    count, = reader.unpack('<I')
    tensors = OrderedDict()
    for _ in range(count):
        name_length, = reader.unpack('<H')
        name = reader.take(name_length).decode('utf8')
        ndim, = reader.unpack('<B')
        shape = reader.unpack('<%dI' % ndim)
        size = int(np.prod(shape)) * 8
        tensors[name] = np.frombuffer(reader.take(size), dtype='<f8').reshape(shape).astype(np.float64)
    if reader.offset != len(body):
        raise CheckpointError("Checkpoint has %d trailing bytes" % (len(body) - reader.offset))
    return Checkpoint(config, tensors)


def load_checkpoint(path, expect=None):
    """Reads and verifies a checkpoint. `expect` maps config keys (M, N, K,
    tau, ...) to required values; any disagreement is a CheckpointError."""
    with open(path, 'rb') as f:
        checkpoint = decode_checkpoint(f.read())
    for key, value in (expect or {}).items():
        if key in checkpoint.config and checkpoint.config[key] != value:
            raise CheckpointError("%s was trained with %s=%r, but %r is configured" % (
                path, key, checkpoint.config[key], value))
    checkpoint.model()
    return checkpoint
