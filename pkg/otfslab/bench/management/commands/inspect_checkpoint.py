import numpy as np

from otfslab.bench.commands import OtfsLabCommand
from otfslab.bench.config import ExperimentConfig
from otfslab.bench.experiments import Scheme, design, evaluation_set, link_specs, spec_fer
from otfslab.ddcl.checkpoint import load_checkpoint
from otfslab.link.analytics import MMSE, reliability


class Command(OtfsLabCommand):
    help = "Prints a checkpoint's configuration and tensors, and its analytic reliability"

    def add_arguments(self, parser):
        parser.add_argument('path')
        parser.add_argument('--config', dest='config_path', metavar='PATH')
        parser.add_argument('--snr', type=float, help='SNR in dB for the reliability figure (default: training SNR)')
        parser.add_argument('--channels', type=int, help='Channel draws to average over')

    def run(self, path, **options):
        checkpoint = load_checkpoint(path)
        model = checkpoint.model()
        self.stdout.write(repr(model))
        for key in sorted(checkpoint.config):
            self.stdout.write("  %s: %r" % (key, checkpoint.config[key]))
        for name, value in checkpoint.tensors.items():
            self.stdout.write("  %-16s %s" % (name, 'x'.join(str(d) for d in value.shape)))

        config = ExperimentConfig.load(options.get('config_path'), {
            'm': model.m, 'n': model.n, 'k': model.k, 'power_budget': model.power_budget,
            'mod_order': checkpoint.config.get('mod_order'),
            'channels': options.get('channels'),
        })
        snr = options.get('snr')
        if snr is None:
            snr = config.train_snr_db
        cfg = config.channel_config()
        trajectories = evaluation_set(cfg, config.seed, config.channels, max(config.history, model.tau) + 1)
        scheme = Scheme(model.architecture, MMSE, model, checkpoint.params)
        precoders = design(scheme, trajectories, model.k, model.power_budget)
        specs = link_specs(scheme, trajectories, precoders, config.noise_variance(snr, model.k), config.mod_order)
        fer = float(np.mean([spec_fer(spec, config.ser_rule) for spec in specs]))
        self.stdout.write("Analytic FER at %g dB over %d channels: %.6g (reliability %.6f%%)" % (
            snr, len(specs), fer, reliability(fer)))
