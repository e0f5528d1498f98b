"""Trajectory dataset files.

A dataset is a JSON-lines file. The first line is a header naming the
format, version, record field order, channel configuration, master seed
and trajectory length; each following line is one record holding the
path states of every frame. Channel matrices are never stored: true
channels are rebuilt from the path states, and estimates are redrawn
from the record's noise stream, rng_stream(seed, index, NOISE_STREAM).
See docs/dataset-format.md.
"""
import json

from otfslab.channel.matrices import materialize
from otfslab.channel.paths import ChannelConfig, PathState, path_sequence
from otfslab.core.errors import DatasetFormatError
from otfslab.core.utils import rng_stream

import logging
logger = logging.getLogger(__name__)

FORMAT = 'otfslab-trajectories'
VERSION = 1
FIELDS = ['index', 'frames[].delays', 'frames[].dopplers', 'frames[].gains']

PATH_STREAM = 0
NOISE_STREAM = 1


def _dumps(obj):
    return json.dumps(obj, sort_keys=True, separators=(',', ':'))


class TrajectoryDataset(object):

    def __init__(self, cfg, seed, length, records):
        self.cfg = cfg
        self.seed = seed
        self.length = length
        self.records = records

    def __len__(self):
        return len(self.records)

    def __repr__(self):
        return "TrajectoryDataset(%d records of %d frames, seed=%d)" % (len(self), self.length, self.seed)

    def trajectory(self, index):
        return materialize(self.records[index], self.cfg, rng_stream(self.seed, index, NOISE_STREAM))

    def header(self):
        return {
            'format': FORMAT,
            'version': VERSION,
            'fields': FIELDS,
            'config': self.cfg.to_dict(),
            'seed': self.seed,
            'length': self.length,
            'records': len(self),
        }

    def save(self, path):
        with open(path, 'w', encoding='utf8') as f:
            f.write(_dumps(self.header()) + '\n')
            for index, states in enumerate(self.records):
                f.write(_dumps({'index': index, 'frames': [s.to_dict() for s in states]}) + '\n')
        logger.info("Wrote %d trajectories to %s" % (len(self), path))


def generate_dataset(cfg, seed, count, length):
    records = [path_sequence(cfg, length, rng_stream(seed, index, PATH_STREAM))
        for index in range(count)]
    return TrajectoryDataset(cfg, seed, length, records)


def load_dataset(path):
    with open(path, encoding='utf8') as f:
        lines = f.read().splitlines()
    if not lines:
        raise DatasetFormatError("%s is empty" % path)
    try:
        header = json.loads(lines[0])
    except ValueError:
        raise DatasetFormatError("%s doesn't start with a dataset header" % path)
    if not isinstance(header, dict) or header.get('format') != FORMAT:
        raise DatasetFormatError("%s is not an otfslab trajectory file" % path)
    if header.get('version') != VERSION:
        raise DatasetFormatError("%s has format version %r; this build reads version %d" % (
            path, header.get('version'), VERSION))
    try:
        cfg = ChannelConfig.from_dict(header['config'])
        count, length, seed = int(header['records']), int(header['length']), int(header['seed'])
    except (KeyError, TypeError, ValueError) as e:
        raise DatasetFormatError("%s has a malformed header: %r" % (path, e))
    if len(lines) - 1 != count:
        raise DatasetFormatError("%s promises %d records but holds %d" % (path, count, len(lines) - 1))

    records = []
    for line_no, line in enumerate(lines[1:], start=2):
        try:
            record = json.loads(line)
            if record['index'] != len(records):
                raise ValueError("record out of order")
            states = [PathState.from_dict(frame) for frame in record['frames']]
        except Exception as e:
            raise DatasetFormatError("%s line %d: %r" % (path, line_no, e))
        if len(states) != length or any(len(s) != cfg.paths for s in states):
            raise DatasetFormatError("%s line %d: expected %d frames of %d paths" % (
                path, line_no, length, cfg.paths))
        records.append(states)
    return TrajectoryDataset(cfg, seed, length, records)
