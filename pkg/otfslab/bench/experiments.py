"""The evaluation sweeps behind the bench commands.

Every sweep draws its channels from seeded streams,
rng_stream(seed, CHANNEL_STREAM, draw, PATH_STREAM | NOISE_STREAM), and
designs the precoder for the last frame of each trajectory. A cell (one
scheme at one sweep value) sends the same number of frames over every
draw; the noise of draw d at sweep point i comes from
(seed, TRIAL_STREAM, i, d, chunk), shared by all schemes at that point.
Each cell produces a Monte Carlo row and a '<scheme>-theo' row holding
the mean analytic FER over the same draws.
"""
from collections import namedtuple
import math
import time

import numpy as np

from otfslab.bench.results import ResultRow
from otfslab.channel.matrices import generate_trajectory
from otfslab.channel.storage import NOISE_STREAM, PATH_STREAM
from otfslab.core.errors import ConfigurationError, SingularMatrixError
from otfslab.core.utils import rng_stream
from otfslab.ddcl.network import forward
from otfslab.link.analytics import EQUALIZER_KINDS, MMSE, analytic_fer, identity_precoder
from otfslab.link.montecarlo import MonteCarloResult, TrialJob, TrialSpec, run_trials

import logging
logger = logging.getLogger(__name__)

CHANNEL_STREAM = 10
TRIAL_STREAM = 11
VALIDATE_STREAM = 12

Z_LIMIT = 3.0
PASS_FRACTION = 0.95

Scheme = namedtuple('Scheme', 'name kind model params')
ValidationCell = namedtuple('ValidationCell', 'channel equalizer snr_db analytic_fer mc_fer n_trials z passed')
TradeoffPoint = namedtuple('TradeoffPoint', 'scheme gamma k tau_p_ms snr_db fer ci_half n_trials analytic_fer reliability_pct')


def uses_history(scheme):
    return scheme.model is not None and not scheme.model.perfect_csi


def find_checkpoint(checkpoints, architecture, k=None, tau=None):
    for checkpoint in checkpoints:
        config = checkpoint.config
        if config['architecture'] != architecture:
            continue
        if k is not None and config['K'] != k:
            continue
        if tau is not None and config['tau'] != tau:
            continue
        return checkpoint
    wanted = ', '.join('%s=%s' % pair for pair in (('K', k), ('tau', tau)) if pair[1] is not None)
    raise ConfigurationError("Scheme %s needs a --checkpoint%s" % (
        architecture, ' with %s' % wanted if wanted else ''))


def resolve_schemes(config, checkpoints, k=None, tau=None, required=True):
    """Scheme objects for config.schemes; predictive schemes are matched to
    a checkpoint by K and (for ddcl) history depth. With required=False a
    predictive scheme without a matching checkpoint is left out."""
    schemes = []
    for name in config.schemes:
        if name in EQUALIZER_KINDS:
            schemes.append(Scheme(name, EQUALIZER_KINDS[name], None, None))
            continue
        try:
            checkpoint = find_checkpoint(checkpoints, name, k=k, tau=tau if name == 'ddcl' else None)
        except ConfigurationError:
            if required:
                raise
            continue
        schemes.append(Scheme(name, MMSE, checkpoint.model(), checkpoint.params))
    return schemes


def trajectory_length(config, checkpoints=()):
    taus = [config.history] + [c.config['tau'] for c in checkpoints if c.config['architecture'] == 'ddcl']
    return max(taus) + 1


def evaluation_set(cfg, seed, count, length, stream=CHANNEL_STREAM):
    return [generate_trajectory(cfg, length, rng_stream(seed, stream, draw, PATH_STREAM),
        rng_stream(seed, stream, draw, NOISE_STREAM)) for draw in range(count)]


def design(scheme, trajectories, k, power_budget):
    """Precoders (draws, MN, K) for the last frame of each trajectory."""
    mn = trajectories[0].true_channels.shape[-1]
    if scheme.model is None:
        return np.broadcast_to(identity_precoder(mn, k, power_budget), (len(trajectories), mn, k))
    if scheme.model.k != k:
        raise ConfigurationError("%r designs K=%d precoders, K=%d requested" % (scheme.model, scheme.model.k, k))
    return forward(scheme.params, scheme.model.inputs(trajectories), scheme.model).numpy()


def link_specs(scheme, trajectories, precoders, noise_variance, order):
    perfect = scheme.model is not None and scheme.model.perfect_csi
    specs = []
    for trajectory, precoder in zip(trajectories, precoders):
        h_true = trajectory.true_channels[-1]
        specs.append(TrialSpec(h_true, h_true if perfect else trajectory.estimates[-1],
            precoder, noise_variance, order, scheme.kind))
    return specs


def spec_fer(spec, rule=None):
    """Analytic FER of one link; a singular ZF link never gets a frame through."""
    try:
        return float(analytic_fer(spec.h_true, spec.h_est, spec.precoder, spec.noise_variance,
            spec.order, spec.kind, rule))
    except SingularMatrixError:
        return 1.0


class Evaluator(object):
    """Runs the Monte Carlo and analytic halves of each cell with the
    configured trial budget, worker pool and SER rule."""

    def __init__(self, config, timing=False):
        self.config = config
        self.timing = timing

    def frames_per_draw(self, draws):
        return max(1, -(-self.config.trials // draws))

    def evaluate(self, label, sweep, x, specs, point):
        config = self.config
        start = time.perf_counter()
        frames = self.frames_per_draw(len(specs))
        jobs = [TrialJob(spec, frames, config.seed, (TRIAL_STREAM, point, draw))
            for draw, spec in enumerate(specs)]
        total = sum(run_trials(jobs, config.workers, config.chunk), MonteCarloResult())
        interval = total.interval()
        theory = float(np.mean([spec_fer(spec, config.ser_rule) for spec in specs]))
        wall_ms = (time.perf_counter() - start) * 1000.0 if self.timing else None
        logger.debug("%s %s=%r: FER %.4g +/- %.2g (%d frames), analytic %.4g" % (
            label, sweep, x, interval.estimate, interval.half_width, total.frames, theory))
        return [
            ResultRow(label, sweep, float(x), interval.estimate, interval.half_width, total.frames, wall_ms),
            ResultRow(label + '-theo', sweep, float(x), theory),
        ]

    def evaluate_points(self, scheme, label, sweep, trajectories, k, order, points):
        """Rows for one scheme over (x, snr_db) points on fixed trajectories."""
        precoders = design(scheme, trajectories, k, self.config.power_budget)
        rows = []
        for point, (x, snr_db) in enumerate(points):
            specs = link_specs(scheme, trajectories, precoders, self.config.noise_variance(snr_db, k), order)
            rows.extend(self.evaluate(label, sweep, x, specs, point))
        return rows


def _replicate(rows, values):
    """Rows evaluated at one sweep value, repeated for every value."""
    return [row._replace(x=float(value)) for value in values for row in rows]


def sweep_snr(config, checkpoints, evaluator):
    """FER against SNR. In dropping mode each scheme is run at (K=MN,
    QPSK) and (K=MN/2, 16-QAM), the same bits per frame."""
    if config.dropping:
        variants = [(config.mn, 4), (config.mn // 2, 16)]
    else:
        variants = [(config.k, config.mod_order)]
    trajectories = evaluation_set(config.channel_config(), config.seed, config.channels,
        trajectory_length(config, checkpoints))
    points = [(snr, snr) for snr in config.snr_db]

    # A predictive scheme needs a checkpoint for at least one of the rates
    resolved = [resolve_schemes(config, checkpoints, k=k, required=not config.dropping) for k, _ in variants]
    seen = set(s.name for schemes in resolved for s in schemes)
    missing = [name for name in config.schemes if name not in seen]
    if missing:
        raise ConfigurationError("No checkpoint with K=%d or K=%d for %s" % (
            variants[0][0], variants[-1][0], ', '.join(missing)))

    rows = []
    for (k, order), schemes in zip(variants, resolved):
        for scheme in schemes:
            label = '%s-k%d-%dqam' % (scheme.name, k, order) if config.dropping else scheme.name
            logger.info("sweep_snr: %s" % label)
            rows.extend(evaluator.evaluate_points(scheme, label, 'snr_db', trajectories, k, order, points))
    return rows


def sweep_zeta(config, checkpoints, evaluator):
    """FER against the offset range bound zeta at a fixed SNR. Only the
    history-driven scheme sees regenerated trajectories; the others are
    evaluated once and their rows repeated."""
    snr = config.fixed_snr_db
    schemes = resolve_schemes(config, checkpoints, k=config.k)
    length = trajectory_length(config, checkpoints)
    base = evaluation_set(config.channel_config(), config.seed, config.channels, length)

    rows = []
    for scheme in schemes:
        if not uses_history(scheme):
            once = evaluator.evaluate_points(scheme, scheme.name, 'zeta', base, config.k,
                config.mod_order, [(config.zeta_values[0], snr)])
            rows.extend(_replicate(once, config.zeta_values))
            continue
        for point, zeta in enumerate(config.zeta_values):
            logger.info("sweep_zeta: %s at zeta=%g" % (scheme.name, zeta))
            trajectories = evaluation_set(config.channel_config(offset_bound=zeta), config.seed,
                config.channels, length)
            precoders = design(scheme, trajectories, config.k, config.power_budget)
            specs = link_specs(scheme, trajectories, precoders, config.noise_variance(snr), config.mod_order)
            rows.extend(evaluator.evaluate(scheme.name, 'zeta', zeta, specs, point))
    return rows


def sweep_tau(config, checkpoints, evaluator):
    """FER against the history depth tau, one ddcl checkpoint per depth.
    All depths design for the same target frame."""
    if 'ddcl' not in config.schemes:
        raise ConfigurationError("sweep_tau evaluates the ddcl scheme; add it to experiment.schemes")
    taus = [int(t) for t in config.tau_values]
    snr = config.fixed_snr_db
    trajectories = evaluation_set(config.channel_config(), config.seed, config.channels, max(taus) + 1)

    rows = []
    once = [s for s in resolve_schemes(config, checkpoints, k=config.k, tau=taus[0]) if not uses_history(s)]
    for scheme in once:
        rows.extend(_replicate(evaluator.evaluate_points(scheme, scheme.name, 'tau', trajectories,
            config.k, config.mod_order, [(taus[0], snr)]), taus))
    for point, tau in enumerate(taus):
        checkpoint = find_checkpoint(checkpoints, 'ddcl', k=config.k, tau=tau)
        scheme = Scheme('ddcl', MMSE, checkpoint.model(), checkpoint.params)
        logger.info("sweep_tau: ddcl at tau=%d" % tau)
        precoders = design(scheme, trajectories, config.k, config.power_budget)
        specs = link_specs(scheme, trajectories, precoders, config.noise_variance(snr), config.mod_order)
        rows.extend(evaluator.evaluate('ddcl', 'tau', tau, specs, point))
    return rows


def tradeoff_latency(gamma, frame_duration):
    """Precoder-caused latency (1/gamma - 1) tau_F."""
    if not 0 < gamma <= 1:
        raise ConfigurationError("gamma=%r must lie in (0, 1]" % gamma)
    return (1.0 / gamma - 1.0) * frame_duration


def dropping_k(gamma, mn):
    k = gamma * mn
    if abs(k - round(k)) > 1e-9 or round(k) < 1:
        raise ConfigurationError("gamma=%r gives a non-integer K=%r for MN=%d" % (gamma, k, mn))
    return int(round(k))


def tradeoff(config, checkpoints, evaluator):
    """Reliability against precoder-caused latency: each gamma sets
    K = gamma MN; rows are per scheme and SNR with x = tau_P in ms.
    Returns (rows, TradeoffPoints)."""
    trajectories = evaluation_set(config.channel_config(), config.seed, config.channels,
        trajectory_length(config, checkpoints))
    snrs = list(config.tradeoff_snr_db)
    rows, table = [], []
    for g_index, gamma in enumerate(config.gamma_values):
        k = dropping_k(gamma, config.mn)
        tau_p_ms = tradeoff_latency(gamma, config.frame_duration) * 1000.0
        for scheme in resolve_schemes(config, checkpoints, k=k):
            precoders = design(scheme, trajectories, k, config.power_budget)
            for s_index, snr in enumerate(snrs):
                label = '%s@%gdB' % (scheme.name, snr)
                specs = link_specs(scheme, trajectories, precoders, config.noise_variance(snr, k), config.mod_order)
                mc, theory = evaluator.evaluate(label, 'tau_p_ms', tau_p_ms, specs, g_index * len(snrs) + s_index)
                rows.extend([mc, theory])
                table.append(TradeoffPoint(scheme.name, float(gamma), k, tau_p_ms, float(snr), mc.fer,
                    mc.ci_half, mc.n_trials, theory.fer, 100.0 * (1.0 - theory.fer)))
    return rows, table


def z_score(mc_fer, analytic, n):
    std = math.sqrt(max(analytic * (1.0 - analytic), 0.0) / n)
    if std == 0:
        return 0.0 if mc_fer == analytic else math.copysign(float('inf'), mc_fer - analytic)
    return (mc_fer - analytic) / std


def corrupt(analytic):
    """Moves an analytic FER half the unit interval away."""
    return analytic + 0.5 if analytic < 0.5 else analytic - 0.5


def validate_fer(config, rule, corrupt_cell=None):
    """Analytic FER against Monte Carlo on fixed random channels with
    perfect estimates and the identity precoder, under MMSE and ZF.

    Returns (cells, passed) where passed means at least PASS_FRACTION of
    the cells agree within Z_LIMIT binomial standard deviations.
    `corrupt_cell` replaces that cell's analytic value with a wrong one."""
    cfg = config.channel_config()
    draws = evaluation_set(cfg, config.seed, config.validate_channels, 1, stream=VALIDATE_STREAM)
    precoder = identity_precoder(config.mn, config.k, config.power_budget)

    keys, specs = [], []
    for channel, trajectory in enumerate(draws):
        h = trajectory.true_channels[-1]
        for equalizer in ('mmse', 'zf'):
            for snr in config.validate_snr_db:
                keys.append((channel, equalizer, float(snr)))
                specs.append(TrialSpec(h, h, precoder, config.noise_variance(snr), config.mod_order,
                    EQUALIZER_KINDS[equalizer]))

    jobs = [TrialJob(spec, config.trials, config.seed, (VALIDATE_STREAM, index))
        for index, spec in enumerate(specs)]
    results = run_trials(jobs, config.workers, config.chunk)

    cells = []
    for index, (key, spec, result) in enumerate(zip(keys, specs, results)):
        analytic = spec_fer(spec, rule)
        if index == corrupt_cell:
            analytic = corrupt(analytic)
        z = z_score(result.fer, analytic, result.frames)
        cells.append(ValidationCell(key[0], key[1], key[2], analytic, result.fer, result.frames, z,
            abs(z) <= Z_LIMIT))
        if abs(z) > Z_LIMIT:
            logger.info("Cell %d (channel %d, %s, %g dB) off by z=%.2f" % ((index,) + key + (z,)))
    passed = sum(c.passed for c in cells) >= PASS_FRACTION * len(cells)
    return cells, passed
