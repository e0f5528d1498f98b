import csv
import os

from otfslab.bench.commands import ExperimentCommand
from otfslab.bench.results import format_cell
from otfslab.channel.storage import load_dataset
from otfslab.core.errors import ConfigurationError, TrainingDivergedError
from otfslab.ddcl.checkpoint import load_checkpoint, save_checkpoint
from otfslab.ddcl.network import ARCHITECTURES, build_model
from otfslab.ddcl.training import Trainer

import logging
logger = logging.getLogger(__name__)

LOSS_FIELDS = ['iteration', 'train_cost', 'validation_cost']


class Command(ExperimentCommand):
    help = "Trains a precoder network on a trajectory dataset"
    name = 'train'

    def add_arguments(self, parser):
        super(Command, self).add_arguments(parser)
        parser.add_argument('--dataset', required=True, metavar='PATH')
        parser.add_argument('--architecture', choices=sorted(ARCHITECTURES), default='ddcl')
        parser.add_argument('--resume', metavar='PATH', help='Checkpoint written by an earlier train run')
        parser.add_argument('--iterations', type=int)
        parser.add_argument('--tau', type=int, help='History depth (default: channel.history)')
        parser.add_argument('--checkpoint-every', type=int, metavar='N',
            help='Also save a checkpoint every N iterations')

    def overrides(self, options):
        overrides = super(Command, self).overrides(options)
        overrides['iterations'] = options.get('iterations')
        overrides['history'] = options.get('tau')
        return overrides

    def experiment(self, config, checkpoints, evaluator, out, options):
        dataset = load_dataset(options['dataset'])
        if (dataset.cfg.m, dataset.cfg.n) != (config.m, config.n):
            raise ConfigurationError("%s holds %dx%d channels but M=%d, N=%d is configured" % (
                options['dataset'], dataset.cfg.m, dataset.cfg.n, config.m, config.n))

        state = None
        if options.get('resume'):
            resumed = load_checkpoint(options['resume'])
            model = resumed.model()
            state = resumed.training_state()
            logger.info("Resuming %r at iteration %d" % (model, state.iteration))
        else:
            model = build_model({
                'architecture': options['architecture'], 'M': config.m, 'N': config.n, 'K': config.k,
                'tau': config.history, 'hidden': config.hidden, 'power_budget': config.power_budget,
            })

        trainer = Trainer(model, dataset, config.train_config())
        meta = {
            'dataset': os.path.basename(options['dataset']),
            'mod_order': config.mod_order,
            'seed': config.seed,
            'train_snr_db': config.train_snr_db,
        }
        checkpoint_path = os.path.join(out, '%s.ckpt' % model.architecture)
        every = options.get('checkpoint_every')

        loss_path = os.path.join(out, 'loss.csv')
        append = state is not None and os.path.exists(loss_path)
        with open(loss_path, 'a' if append else 'w', encoding='utf8', newline='') as f:
            writer = csv.writer(f, lineterminator='\n')
            if not append:
                writer.writerow(LOSS_FIELDS)

            def on_iteration(record, current):
                writer.writerow([format_cell(v) for v in record])
                if every and current.iteration % every == 0:
                    save_checkpoint(checkpoint_path, model, current.best_params, meta, current)

            try:
                state = trainer.run(state, on_iteration)
            except TrainingDivergedError as e:
                diverged = os.path.join(out, '%s-diverged.ckpt' % model.architecture)
                save_checkpoint(diverged, model, e.last_finite_params, dict(meta, diverged_at=e.iteration))
                self.stderr.write("Saved the last finite parameters to %s" % diverged)
                raise

        save_checkpoint(checkpoint_path, model, state.best_params, meta, state)
        self.stdout.write("Trained %r for %d iterations (best validation cost %s); checkpoint in %s" % (
            model, state.iteration, format_cell(state.best_cost), checkpoint_path))
