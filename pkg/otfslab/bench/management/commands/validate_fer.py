import csv
import os

from django.core.management.base import CommandError

from otfslab.bench import experiments
from otfslab.bench.commands import ExperimentCommand
from otfslab.bench.results import format_cell
from otfslab.core.errors import NumericError
from otfslab.link.analytics import SER_RULES


class Command(ExperimentCommand):
    help = "Checks analytic FER against Monte Carlo on fixed random channels"
    name = 'validate_fer'

    def add_arguments(self, parser):
        super(Command, self).add_arguments(parser)
        parser.add_argument('--ser-rule', choices=SER_RULES,
            help="SER approximation the analytic values use (default: the config's ser_rule)")
        parser.add_argument('--corrupt-cell', type=int, metavar='INDEX',
            help='Replace one analytic value with a wrong one, to see the check fail')

    def experiment(self, config, checkpoints, evaluator, out, options):
        cells, passed = experiments.validate_fer(config, options.get('ser_rule') or config.ser_rule,
            options.get('corrupt_cell'))
        path = os.path.join(out, 'validate.csv')
        with open(path, 'w', encoding='utf8', newline='') as f:
            writer = csv.writer(f, lineterminator='\n')
            writer.writerow(experiments.ValidationCell._fields)
            for cell in cells:
                writer.writerow([format_cell(v) if not isinstance(v, bool) else ('yes' if v else 'no')
                    for v in cell])
        agreeing = sum(c.passed for c in cells)
        self.stdout.write("%d of %d cells within %g standard deviations; report in %s" % (
            agreeing, len(cells), experiments.Z_LIMIT, path))
        if not passed:
            raise CommandError("FER validation failed (%d of %d cells agree)" % (agreeing, len(cells)),
                returncode=NumericError.exit_code)
