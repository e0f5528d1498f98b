import logging
import os

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError

from otfslab.bench.config import ExperimentConfig
from otfslab.bench.experiments import Evaluator
from otfslab.bench.results import emit_csv, emit_svg
from otfslab.core.errors import OtfsLabError
from otfslab.ddcl.checkpoint import load_checkpoint

logger = logging.getLogger(__name__)

IO_EXIT_CODE = 4

VERBOSITY_LEVELS = {2: logging.INFO, 3: logging.DEBUG}


class OtfsLabCommand(BaseCommand):
    """Turns otfslab errors into CommandErrors carrying the error's exit
    code, and -v 2 / -v 3 into INFO / DEBUG logging."""

    def handle(self, *args, **options):
        level = VERBOSITY_LEVELS.get(options.get('verbosity'))
        if level is not None:
            logging.getLogger('otfslab').setLevel(level)
        try:
            return self.run(*args, **options)
        except OtfsLabError as e:
            raise CommandError(str(e), returncode=e.exit_code)
        except OSError as e:
            raise CommandError("I/O error: %s" % e, returncode=IO_EXIT_CODE)

    def run(self, *args, **options):
        raise NotImplementedError


class ExperimentCommand(OtfsLabCommand):
    """A command that resolves an ExperimentConfig and writes its results
    (plus resolved-config.ini) into an output directory."""

    name = None
    x_label = ''

    def add_arguments(self, parser):
        parser.add_argument('--config', dest='config_path', metavar='PATH',
            help='INI file overriding the OTFSLAB_* settings')
        parser.add_argument('--seed', type=int, help='Master seed')
        parser.add_argument('--out', metavar='DIR', help='Output directory')
        parser.add_argument('--workers', type=int, help='Worker processes for Monte Carlo trials')
        parser.add_argument('--trials', type=int, help='Monte Carlo frames per point')
        parser.add_argument('--timing', action='store_true',
            help='Fill in the wall_ms column (output is then no longer reproducible)')
        parser.add_argument('--checkpoint', action='append', dest='checkpoints', default=[],
            metavar='PATH', help='Trained network checkpoint; may be repeated')

    def overrides(self, options):
        return {
            'seed': options.get('seed'),
            'workers': options.get('workers'),
            'trials': options.get('trials'),
        }

    def load_config(self, options):
        return ExperimentConfig.load(options.get('config_path'), self.overrides(options))

    def load_checkpoints(self, config, paths):
        checkpoints = [load_checkpoint(path, expect={'M': config.m, 'N': config.n}) for path in paths]
        extra = []
        for checkpoint in checkpoints:
            architecture = checkpoint.config['architecture']
            if architecture not in config.schemes and architecture not in extra:
                extra.append(architecture)
        if extra:
            config = ExperimentConfig(dict(config.values, schemes=list(config.schemes) + extra))
        return config, checkpoints

    def output_dir(self, options):
        out = options.get('out') or os.path.join(settings.OTFSLAB_OUTPUT_ROOT, self.name)
        os.makedirs(out, exist_ok=True)
        return out

    def write_rows(self, rows, out, title):
        csv_path = emit_csv(rows, os.path.join(out, 'results.csv'))
        emit_svg(rows, os.path.join(out, 'results.svg'), title=title, x_label=self.x_label)
        self.stdout.write("Wrote %d rows to %s" % (len(rows), csv_path))

    def run(self, *args, **options):
        config = self.load_config(options)
        config, checkpoints = self.load_checkpoints(config, options.get('checkpoints') or [])
        out = self.output_dir(options)
        config.write(out)
        return self.experiment(config, checkpoints, Evaluator(config, timing=options.get('timing')),
            out, options)

    def experiment(self, config, checkpoints, evaluator, out, options):
        raise NotImplementedError
