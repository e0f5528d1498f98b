from otfslab.bench import experiments
from otfslab.bench.commands import ExperimentCommand


class Command(ExperimentCommand):
    help = "FER against the path offset bound zeta at a fixed SNR"
    name = 'sweep_zeta'
    x_label = 'zeta'

    def experiment(self, config, checkpoints, evaluator, out, options):
        rows = experiments.sweep_zeta(config, checkpoints, evaluator)
        self.write_rows(rows, out, 'FER vs zeta at %g dB' % config.fixed_snr_db)
