"""Monte Carlo frame transmission.

Frames are simulated in the delay-Doppler domain: y = H P d + w with
w ~ CN(0, sigma^2 I), followed by d_hat = E y, a per-symbol gain correction and
nearest-point decisions. Trials are cut into fixed-size chunks, each
with its own RNG stream rng_stream(seed, *stream, chunk), and the chunk
counts are summed in chunk order, so totals don't depend on how many
worker processes ran them.
"""
from collections import namedtuple
from concurrent.futures import ProcessPoolExecutor
import math

import numpy as np
from scipy import stats

from otfslab.core.errors import SingularMatrixError
from otfslab.core.utils import rng_stream
from otfslab.link.analytics import DENOMINATOR_FLOOR, build_equalizer
from otfslab.modem.qam import Constellation
from otfslab.modem.transforms import complex_gaussian

import logging
logger = logging.getLogger(__name__)

DEFAULT_CHUNK = 10000

FrameOutcome = namedtuple('FrameOutcome', 'decoded frame_error symbol_errors bit_errors')
TrialSpec = namedtuple('TrialSpec', 'h_true h_est precoder noise_variance order kind')
TrialJob = namedtuple('TrialJob', 'spec frames seed stream')
WilsonInterval = namedtuple('WilsonInterval', 'estimate half_width lower upper errors n')


def wilson_interval(errors, n, confidence=0.95):
    """Wilson score interval for a binomial proportion."""
    if n < 1:
        raise ValueError("A proportion needs at least one trial")
    z = stats.norm.ppf(0.5 + confidence / 2.0)
    p = errors / float(n)
    denominator = 1.0 + z * z / n
    center = (p + z * z / (2.0 * n)) / denominator
    half = z * math.sqrt(p * (1.0 - p) / n + z * z / (4.0 * n * n)) / denominator
    return WilsonInterval(p, half, max(0.0, center - half), min(1.0, center + half), errors, n)


class MonteCarloResult(object):

    def __init__(self, frames=0, frame_errors=0, symbol_errors=0, bit_errors=0, symbols=0, bits=0,
            singular_frames=0):
        self.frames = frames
        self.frame_errors = frame_errors
        self.symbol_errors = symbol_errors
        self.bit_errors = bit_errors
        self.symbols = symbols
        self.bits = bits
        self.singular_frames = singular_frames

    def __add__(self, other):
        return MonteCarloResult(*[a + b for a, b in zip(self.counts(), other.counts())])

    def __eq__(self, other):
        return isinstance(other, MonteCarloResult) and self.counts() == other.counts()

    def __repr__(self):
        return "MonteCarloResult(%d/%d frame errors)" % (self.frame_errors, self.frames)

    def counts(self):
        return (self.frames, self.frame_errors, self.symbol_errors, self.bit_errors, self.symbols, self.bits,
            self.singular_frames)

    @property
    def fer(self):
        return self.frame_errors / float(self.frames)

    @property
    def ser(self):
        return self.symbol_errors / float(self.symbols)

    @property
    def ber(self):
        return self.bit_errors / float(self.bits)

    def interval(self, confidence=0.95):
        return wilson_interval(self.frame_errors, self.frames, confidence)


def _popcount(values):
    values = np.asarray(values, dtype=np.int64)
    count = np.zeros(values.shape, dtype=np.int64)
    while np.any(values):
        count += values & 1
        values = values >> 1
    return count


def decision_gain(e, h_est, p):
    """diag(E H_est P), per symbol; 1 where a symbol gets no gain at all."""
    gain = np.einsum('kn,nm,mk->k', e, np.asarray(h_est, dtype=np.complex128), p)
    return np.where(np.abs(gain) > DENOMINATOR_FLOOR, gain, 1.0)


def simulate_frames(spec, frames, rng, equalizer=None):
    """Sends `frames` independent frames over the fixed link in `spec`.

    Returns (decided labels, transmitted labels) as K x frames arrays.
    `equalizer` skips rebuilding E when the caller already has it. Each
    output is scaled by 1/[E H_est P]_kk before the nearest-point decision,
    the gain the receiver believes symbol k sees (1 under ZF)."""
    constellation = Constellation(spec.order)
    p = np.asarray(spec.precoder, dtype=np.complex128)
    mn, k = p.shape
    if equalizer is None:
        equalizer = build_equalizer(p, spec.h_est, spec.noise_variance, spec.kind)
    sent = constellation.random_labels(rng, (k, frames))
    noise = complex_gaussian(rng, (mn, frames), spec.noise_variance)
    y = np.asarray(spec.h_true) @ (p @ constellation.points[sent]) + noise
    return constellation.decide((equalizer @ y) / decision_gain(equalizer, spec.h_est, p)[:, None]), sent


def simulate_frame(spec, rng):
    """One frame. ZF singularity propagates as SingularMatrixError."""
    decided, sent = simulate_frames(spec, 1, rng)
    wrong = decided[:, 0] != sent[:, 0]
    return FrameOutcome(Constellation(spec.order).points[decided[:, 0]], bool(wrong.any()),
        int(wrong.sum()), int(_popcount(decided[:, 0] ^ sent[:, 0]).sum()))


def count_errors(spec, frames, rng):
    """Error counts for `frames` frames. A ZF equalizer that can't be
    built makes every frame an error, with half the bits counted wrong."""
    constellation = Constellation(spec.order)
    k = np.shape(spec.precoder)[1]
    symbols, bits = k * frames, k * frames * constellation.bits_per_symbol
    try:
        decided, sent = simulate_frames(spec, frames, rng)
    except SingularMatrixError as e:
        logger.debug("Equalizer singular (%s); counting %d frames as errors" % (e, frames))
        return MonteCarloResult(frames, frames, symbols, bits // 2, symbols, bits, frames)
    wrong = decided != sent
    return MonteCarloResult(frames, int(wrong.any(axis=0).sum()), int(wrong.sum()),
        int(_popcount(decided ^ sent).sum()), symbols, bits)


def _run_chunk(args):
    spec, frames, seed, stream = args
    return count_errors(spec, frames, rng_stream(seed, *stream))


def _chunks(job, chunk_size):
    for index, start in enumerate(range(0, job.frames, chunk_size)):
        yield (job.spec, min(chunk_size, job.frames - start), job.seed, tuple(job.stream) + (index,))


def run_trials(jobs, workers=1, chunk_size=DEFAULT_CHUNK):
    """Runs a list of TrialJobs, returning one MonteCarloResult per job.

    Chunks are built in job order and reduced in that same order, so the
    worker count affects wall time only."""
    tasks, owners = [], []
    for position, job in enumerate(jobs):
        if job.frames < 1:
            raise ValueError("Monte Carlo needs at least one frame per job")
        for task in _chunks(job, chunk_size):
            tasks.append(task)
            owners.append(position)
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            outcomes = list(executor.map(_run_chunk, tasks))
    else:
        outcomes = [_run_chunk(task) for task in tasks]

    results = [MonteCarloResult() for _ in jobs]
    for position, outcome in zip(owners, outcomes):
        results[position] = results[position] + outcome
    singular = sum(r.singular_frames for r in results)
    if singular:
        logger.info("%d of %d frames hit a singular ZF equalizer and were counted as errors" % (
            singular, sum(r.frames for r in results)))
    return results


def monte_carlo_fer(spec, frames, seed, stream=(), workers=1, chunk_size=DEFAULT_CHUNK):
    """(FER estimate, 95% Wilson half-width) plus the raw counts."""
    result = run_trials([TrialJob(spec, frames, seed, stream)], workers, chunk_size)[0]
    interval = result.interval()
    return interval.estimate, interval.half_width, result
