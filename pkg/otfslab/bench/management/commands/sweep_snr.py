from otfslab.bench import experiments
from otfslab.bench.commands import ExperimentCommand


class Command(ExperimentCommand):
    help = "FER against SNR for each scheme, Monte Carlo and analytic"
    name = 'sweep_snr'
    x_label = 'SNR (dB)'

    def add_arguments(self, parser):
        super(Command, self).add_arguments(parser)
        parser.add_argument('--dropping', action='store_true', default=None,
            help='Compare K=MN with QPSK against K=MN/2 with 16-QAM')

    def overrides(self, options):
        overrides = super(Command, self).overrides(options)
        overrides['dropping'] = options.get('dropping')
        return overrides

    def experiment(self, config, checkpoints, evaluator, out, options):
        rows = experiments.sweep_snr(config, checkpoints, evaluator)
        self.write_rows(rows, out, 'FER vs SNR%s' % (' (dropping mode)' if config.dropping else ''))
