from otfslab.bench import experiments
from otfslab.bench.commands import ExperimentCommand


class Command(ExperimentCommand):
    help = "FER against history depth tau; give one ddcl --checkpoint per depth"
    name = 'sweep_tau'
    x_label = 'tau'

    def experiment(self, config, checkpoints, evaluator, out, options):
        rows = experiments.sweep_tau(config, checkpoints, evaluator)
        self.write_rows(rows, out, 'FER vs tau at %g dB' % config.fixed_snr_db)
