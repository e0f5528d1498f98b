import csv
import os

from otfslab.bench import experiments
from otfslab.bench.commands import ExperimentCommand
from otfslab.bench.results import format_cell


class Command(ExperimentCommand):
    help = "Reliability against precoder-caused latency over the configured gammas"
    name = 'tradeoff'
    x_label = 'tau_P (ms)'

    def experiment(self, config, checkpoints, evaluator, out, options):
        rows, table = experiments.tradeoff(config, checkpoints, evaluator)
        self.write_rows(rows, out, 'FER vs precoder latency')
        path = os.path.join(out, 'tradeoff.csv')
        with open(path, 'w', encoding='utf8', newline='') as f:
            writer = csv.writer(f, lineterminator='\n')
            writer.writerow(experiments.TradeoffPoint._fields)
            for point in table:
                writer.writerow([format_cell(v) for v in point])
        for point in table:
            if point.scheme == config.schemes[0]:
                self.stdout.write("gamma=%g K=%d tau_P=%.4g ms %g dB: reliability %.4f%%" % (
                    point.gamma, point.k, point.tau_p_ms, point.snr_db, point.reliability_pct))
