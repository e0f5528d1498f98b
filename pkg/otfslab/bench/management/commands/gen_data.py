import os

from otfslab.bench.commands import ExperimentCommand
from otfslab.channel.storage import generate_dataset


class Command(ExperimentCommand):
    help = "Generates a training set of channel trajectories (path states only)"
    name = 'gen_data'

    def add_arguments(self, parser):
        super(Command, self).add_arguments(parser)
        parser.add_argument('--count', type=int, help='Trajectories to generate (default: training.examples)')
        parser.add_argument('--length', type=int, help='Frames per trajectory (default: history + 1)')
        parser.add_argument('--filename', default='trajectories.jsonl')

    def overrides(self, options):
        overrides = super(Command, self).overrides(options)
        overrides['examples'] = options.get('count')
        return overrides

    def experiment(self, config, checkpoints, evaluator, out, options):
        length = options.get('length') or config.history + 1
        dataset = generate_dataset(config.channel_config(), config.seed, config.examples, length)
        path = os.path.join(out, options['filename'])
        dataset.save(path)
        self.stdout.write("Wrote %d trajectories of %d frames to %s" % (len(dataset), length, path))
