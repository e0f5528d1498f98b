import configparser
from io import StringIO
import os
import tempfile

import numpy as np
from django.conf import settings
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase
from lxml import etree

from otfslab.bench import experiments
from otfslab.bench.config import ExperimentConfig, read_ini
from otfslab.bench.results import ResultRow, emit_csv, emit_svg, read_csv
from otfslab.core.errors import ConfigurationError
from otfslab.link.analytics import MMSE, NEAREST_NEIGHBOUR, ZF, identity_precoder
from otfslab.link.montecarlo import TrialJob, TrialSpec, run_trials

SVG = '{http://www.w3.org/2000/svg}'

TOY = {
    'system': {'m': '2', 'n': '2', 'k': '4', 'power_budget': '4', 'snr_db': '0, 10, 20'},
    'channel': {'paths': '2', 'max_delay': '2', 'max_doppler': '1', 'history': '2', 'nmse': '0'},
    'experiment': {
        'trials': '400', 'channels': '4', 'chunk': '50', 'seed': '7',
        'zeta_values': '0, 1', 'tau_values': '1, 2', 'gamma_values': '1, 1/2',
        'tradeoff_snr_db': '10', 'validate_channels': '2', 'validate_snr_db': '10, 15',
    },
    'training': {
        'examples': '16', 'batch_size': '4', 'iterations': '4', 'eval_every': '2',
        'validation_fraction': '0.25', 'hidden': '4',
    },
}


def write_config(directory, name='toy.ini', **changes):
    """Writes the toy config; `changes` maps section -> {key: value}."""
    parser = configparser.ConfigParser(interpolation=None)
    for section, values in TOY.items():
        parser[section] = dict(values, **changes.get(section, {}))
    path = os.path.join(directory, name)
    with open(path, 'w') as f:
        parser.write(f)
    return path


class TempDirTestCase(SimpleTestCase):

    def setUp(self):
        tmp = tempfile.TemporaryDirectory()
        self.addCleanup(tmp.cleanup)
        self.tmp = tmp.name
        self.config_path = write_config(self.tmp)

    def path(self, *parts):
        return os.path.join(self.tmp, *parts)

    def command(self, name, *args, **options):
        out = StringIO()
        call_command(name, *args, stdout=out, stderr=StringIO(), **options)
        return out.getvalue()

    def read(self, *parts):
        with open(self.path(*parts), 'rb') as f:
            return f.read()


class ConfigTests(TempDirTestCase):

    def test_defaults(self):
        config = ExperimentConfig.load()
        self.assertEqual((config.m, config.n, config.k, config.mod_order), (8, 4, 32, 4))
        self.assertEqual(config.paths, settings.OTFSLAB_PATHS)
        self.assertEqual(config.schemes, ['zf', 'mmse'])
        self.assertAlmostEqual(config.noise_variance(10), 0.1)
        # dropping mode: K = MN/2 data symbols share the same budget
        self.assertAlmostEqual(config.noise_variance(10, k=16), 0.2)
        self.assertEqual(config.frame_duration, 4 / 15e3)

    def test_precedence(self):
        config = ExperimentConfig.load(self.config_path)
        self.assertEqual(config.seed, 7)
        self.assertEqual(config.gamma_values, [1.0, 0.5])
        self.assertEqual(config.tau_values, [1, 2])
        self.assertEqual(ExperimentConfig.load(self.config_path, {'seed': 9, 'workers': None}).seed, 9)
        self.assertEqual(ExperimentConfig.load(self.config_path, {'workers': None}).workers,
            settings.OTFSLAB_WORKERS)

    def test_unknown_key(self):
        path = write_config(self.tmp, 'bad.ini', channel={'delay_spread': '3'})
        with self.assertRaisesRegex(ConfigurationError, 'channel'):
            ExperimentConfig.load(path)

    def test_unknown_section(self):
        path = self.path('section.ini')
        with open(path, 'w') as f:
            f.write('[plotting]\ncolour = red\n')
        with self.assertRaises(ConfigurationError):
            read_ini(path)

    def test_invalid_values(self):
        for changes in ({'system': {'k': '5'}}, {'experiment': {'gamma_values': '1.5'}},
                {'system': {'mod_order': '8'}}, {'experiment': {'schemes': 'zf, rzf'}},
                {'channel': {'max_delay': '4'}}, {'experiment': {'tau_values': '1.5'}}):
            path = write_config(self.tmp, 'bad.ini', **changes)
            with self.assertRaises(ConfigurationError):
                ExperimentConfig.load(path)

    def test_resolved_config_round_trip(self):
        config = ExperimentConfig.load(self.config_path)
        path = config.write(self.tmp)
        with open(path) as f:
            self.assertIn('sigma^2 = P_0 / (K * 10^(SNR/10))', f.read())
        self.assertEqual(ExperimentConfig.load(path).values, config.values)

    def test_train_config(self):
        cfg = ExperimentConfig.load(self.config_path).train_config()
        self.assertEqual((cfg.batch_size, cfg.iterations, cfg.seed), (4, 4, 7))
        self.assertEqual(cfg.equalizer, MMSE)


class ResultsTests(TempDirTestCase):

    rows = [
        ResultRow('zf', 'snr_db', 0.0, 0.5, 0.01, 1000, None),
        ResultRow('zf', 'snr_db', 10.0, 0.01, 0.002, 1000, 12.5),
        ResultRow('zf-theo', 'snr_db', 0.0, 0.49),
        ResultRow('zf-theo', 'snr_db', 10.0, 0.0),
    ]

    def test_empty(self):
        emit_csv([], self.path('empty.csv'))
        self.assertEqual(self.read('empty.csv'), b'scheme,sweep,x,fer,ci_half,n_trials,wall_ms\n')
        emit_svg([], self.path('empty.svg'))
        root = etree.parse(self.path('empty.svg')).getroot()
        self.assertEqual(root.tag, SVG + 'svg')
        self.assertEqual(root.findall('.//%spolyline' % SVG), [])

    def test_csv_round_trip(self):
        emit_csv(self.rows, self.path('rows.csv'))
        self.assertEqual(read_csv(self.path('rows.csv')), self.rows)
        lines = self.read('rows.csv').decode('utf8').splitlines()
        self.assertEqual(lines[3], 'zf-theo,snr_db,0.0,0.49,,,')

    def test_fer_range(self):
        with self.assertRaises(ValueError):
            emit_csv([ResultRow('zf', 'snr_db', 0.0, 1.5)], self.path('bad.csv'))
        with self.assertRaises(ValueError):
            emit_csv([ResultRow('zf', 'snr_db', 0.0, 0.5, -0.1, 10)], self.path('bad.csv'))

    def test_svg_curves(self):
        emit_svg(self.rows, self.path('rows.svg'), title='FER vs SNR', x_label='SNR (dB)')
        root = etree.parse(self.path('rows.svg')).getroot()
        self.assertEqual(root.get('version'), '1.1')
        curves = root.findall('.//%spolyline' % SVG)
        self.assertEqual(len(curves), 2)
        self.assertEqual(len(curves[0].get('points').split()), 2)
        self.assertEqual(curves[1].get('stroke-dasharray'), '5,3')
        self.assertEqual(root.find(SVG + 'title').text, 'FER vs SNR')


class LatencyTests(SimpleTestCase):

    def test_tradeoff_latency(self):
        self.assertEqual(experiments.tradeoff_latency(1.0, 1e-3), 0.0)
        self.assertEqual(experiments.tradeoff_latency(0.5, 1e-3), 1e-3)
        self.assertEqual(experiments.tradeoff_latency(0.5, 4 / 15e3), 4 / 15e3)
        for gamma in (0.0, 1.5, -1.0):
            with self.assertRaises(ConfigurationError):
                experiments.tradeoff_latency(gamma, 1e-3)

    def test_dropping_k(self):
        self.assertEqual(experiments.dropping_k(0.75, 32), 24)
        self.assertEqual(experiments.dropping_k(1.0, 32), 32)
        with self.assertRaises(ConfigurationError):
            experiments.dropping_k(0.3, 32)


class ValidationTests(TempDirTestCase):

    def test_z_score(self):
        self.assertEqual(experiments.z_score(0.0, 0.0, 100), 0.0)
        self.assertEqual(experiments.z_score(0.01, 0.0, 100), float('inf'))
        self.assertAlmostEqual(experiments.z_score(0.6, 0.5, 100), 2.0)
        self.assertAlmostEqual(experiments.corrupt(0.1), 0.6)
        self.assertAlmostEqual(experiments.corrupt(0.9), 0.4)

    def test_identity_channel_cell(self):
        eye = np.eye(4)
        variance = 0.1
        for kind in (ZF, MMSE):
            spec = TrialSpec(eye, eye, identity_precoder(4, 4, 4.0), variance, 4, kind)
            result = run_trials([TrialJob(spec, 20000, 3, (0,))], chunk_size=5000)[0]
            analytic = experiments.spec_fer(spec, NEAREST_NEIGHBOUR)
            self.assertLessEqual(abs(experiments.z_score(result.fer, analytic, result.frames)),
                experiments.Z_LIMIT)

    def single_symbol_config(self, name='single.ini'):
        # K = 1: the frame error is the symbol error, so the closed form is exact
        return write_config(self.tmp, name, system={'k': '1'},
            experiment={'trials': '4000', 'chunk': '1000', 'validate_channels': '5'})

    def test_uncorrupted_cells_pass(self):
        config = ExperimentConfig.load(self.single_symbol_config())
        self.assertEqual(config.ser_rule, NEAREST_NEIGHBOUR)
        cells, passed = experiments.validate_fer(config, config.ser_rule)
        self.assertEqual(len(cells), 5 * 2 * 2)
        self.assertGreaterEqual(sum(c.passed for c in cells), 19)
        self.assertTrue(passed)
        self.assertTrue(all(c.n_trials == 4000 for c in cells))

    def test_command_reports_success(self):
        output = self.command('validate_fer', config=self.single_symbol_config(), out=self.tmp)
        self.assertIn('of 20 cells within 3 standard deviations', output)
        lines = self.read('validate.csv').decode('utf8').splitlines()
        self.assertEqual(len(lines), 21)
        self.assertGreaterEqual(sum(line.endswith(',yes') for line in lines), 19)

    def test_corrupted_cell_flagged(self):
        config = ExperimentConfig.load(self.config_path, {'trials': 500})
        cells, passed = experiments.validate_fer(config, NEAREST_NEIGHBOUR, corrupt_cell=0)
        self.assertEqual(len(cells), 2 * 2 * 2)
        self.assertFalse(cells[0].passed)
        self.assertGreater(abs(cells[0].z), 3)
        self.assertFalse(passed)
        self.assertEqual((cells[0].channel, cells[0].equalizer, cells[0].snr_db), (0, 'mmse', 10.0))

    def test_command_reports_failure(self):
        with self.assertRaises(CommandError) as caught:
            self.command('validate_fer', config=self.config_path, out=self.tmp, trials=500, corrupt_cell=0)
        self.assertEqual(caught.exception.returncode, 3)
        lines = self.read('validate.csv').decode('utf8').splitlines()
        self.assertEqual(lines[0], 'channel,equalizer,snr_db,analytic_fer,mc_fer,n_trials,z,passed')
        self.assertEqual(len(lines), 9)
        self.assertTrue(lines[1].endswith(',no'))


class SweepCommandTests(TempDirTestCase):

    def test_snr_sweep(self):
        self.command('sweep_snr', config=self.config_path, out=self.tmp)
        rows = read_csv(self.path('results.csv'))
        self.assertEqual([r.scheme for r in rows[:2]], ['zf', 'zf-theo'])
        self.assertEqual(len(rows), 2 * 2 * 3)
        self.assertTrue(all(0.0 <= r.fer <= 1.0 for r in rows))
        self.assertTrue(all(r.n_trials == 400 and r.ci_half >= 0 for r in rows if not r.scheme.endswith('-theo')))
        self.assertTrue(all(r.ci_half is None and r.wall_ms is None for r in rows if r.scheme.endswith('-theo')))
        theory = dict(((r.scheme, r.x), r.fer) for r in rows if r.scheme.endswith('-theo'))
        for snr in (0.0, 10.0, 20.0):
            self.assertLessEqual(theory['mmse-theo', snr], theory['zf-theo', snr] + 1e-12)
        for scheme in ('zf-theo', 'mmse-theo'):
            self.assertLessEqual(theory[scheme, 10.0], theory[scheme, 0.0])
            self.assertLessEqual(theory[scheme, 20.0], theory[scheme, 10.0])
        self.assertTrue(os.path.exists(self.path('results.svg')))
        self.assertTrue(os.path.exists(self.path('resolved-config.ini')))

    def test_monte_carlo_agrees_with_theory(self):
        path = write_config(self.tmp, 'single.ini', system={'k': '1'},
            experiment={'trials': '4000', 'chunk': '1000'})
        self.command('sweep_snr', config=path, out=self.tmp)
        rows = read_csv(self.path('results.csv'))
        theory = dict(((r.scheme, r.x), r.fer) for r in rows if r.scheme.endswith('-theo'))
        simulated = [r for r in rows if not r.scheme.endswith('-theo')]
        self.assertEqual(len(simulated), 2 * 3)
        for row in simulated:
            expected = theory[row.scheme + '-theo', row.x]
            sigma = np.sqrt(expected * (1 - expected) / row.n_trials)
            self.assertLessEqual(abs(row.fer - expected), 4 * sigma + 1e-12, (row.scheme, row.x))

    def test_worker_count_does_not_change_output(self):
        os.makedirs(self.path('one'))
        os.makedirs(self.path('two'))
        self.command('sweep_snr', config=self.config_path, out=self.path('one'), workers=1)
        self.command('sweep_snr', config=self.config_path, out=self.path('two'), workers=2)
        self.assertEqual(self.read('one', 'results.csv'), self.read('two', 'results.csv'))

    def test_timing_column(self):
        self.command('sweep_snr', config=self.config_path, out=self.tmp, timing=True, trials=40)
        rows = read_csv(self.path('results.csv'))
        self.assertTrue(all(r.wall_ms >= 0 for r in rows if not r.scheme.endswith('-theo')))
        self.assertEqual(rows[0].n_trials, 40)

    def test_dropping_mode(self):
        self.command('sweep_snr', config=self.config_path, out=self.tmp, dropping=True)
        schemes = set(r.scheme for r in read_csv(self.path('results.csv')))
        self.assertIn('mmse-k4-4qam', schemes)
        self.assertIn('zf-k2-16qam-theo', schemes)

    def test_missing_checkpoint(self):
        path = write_config(self.tmp, 'ddcl.ini', experiment={'schemes': 'zf, ddcl'})
        with self.assertRaises(CommandError) as caught:
            self.command('sweep_snr', config=path, out=self.tmp)
        self.assertEqual(caught.exception.returncode, 2)

    def test_bad_config_exit_code(self):
        path = write_config(self.tmp, 'bad.ini', system={'k': '9'})
        with self.assertRaises(CommandError) as caught:
            self.command('sweep_snr', config=path, out=self.tmp)
        self.assertEqual(caught.exception.returncode, 2)

    def test_tradeoff(self):
        self.command('tradeoff', config=self.config_path, out=self.tmp)
        rows = read_csv(self.path('results.csv'))
        self.assertEqual(set(r.sweep for r in rows), {'tau_p_ms'})
        self.assertEqual(sorted(set(r.x for r in rows)), [0.0, (2 / 15e3) * 1000.0])
        self.assertIn('mmse@10dB', set(r.scheme for r in rows))
        lines = self.read('tradeoff.csv').decode('utf8').splitlines()
        self.assertEqual(len(lines), 1 + 2 * 2)
        self.assertTrue(lines[0].startswith('scheme,gamma,k,tau_p_ms,snr_db'))


class PipelineTests(TempDirTestCase):
    """gen_data -> train -> sweeps on the toy system."""

    def setUp(self):
        super(PipelineTests, self).setUp()
        self.command('gen_data', config=self.config_path, out=self.tmp)
        self.dataset = self.path('trajectories.jsonl')

    def train(self, out, **options):
        os.makedirs(out, exist_ok=True)
        return self.command('train', config=self.config_path, out=out, dataset=self.dataset, **options)

    def test_gen_data(self):
        with open(self.dataset) as f:
            lines = f.read().splitlines()
        self.assertEqual(len(lines), 1 + 16)
        os.makedirs(self.path('again'))
        self.command('gen_data', config=self.config_path, out=self.path('again'))
        self.assertEqual(self.read('trajectories.jsonl'), self.read('again', 'trajectories.jsonl'))
        self.command('gen_data', config=self.config_path, out=self.path('again'), count=5, length=4)
        with open(self.path('again', 'trajectories.jsonl')) as f:
            self.assertEqual(len(f.read().splitlines()), 6)

    def test_train_writes_loss_and_checkpoint(self):
        self.train(self.path('run'))
        lines = self.read('run', 'loss.csv').decode('utf8').splitlines()
        self.assertEqual(lines[0], 'iteration,train_cost,validation_cost')
        self.assertEqual(len(lines), 1 + 4)
        self.assertEqual(lines[1].split(',')[2], '')
        self.assertNotEqual(lines[2].split(',')[2], '')
        self.assertTrue(os.path.exists(self.path('run', 'ddcl.ckpt')))
        output = self.command('inspect_checkpoint', self.path('run', 'ddcl.ckpt'), config=self.config_path)
        self.assertIn('DdclNet(M=2, N=2, K=4, tau=2)', output)
        self.assertIn('reliability', output)

    def test_resume_matches_unbroken_run(self):
        self.train(self.path('unbroken'))
        self.train(self.path('broken'), iterations=2)
        self.train(self.path('broken'), resume=self.path('broken', 'ddcl.ckpt'))
        self.assertEqual(self.read('unbroken', 'loss.csv'), self.read('broken', 'loss.csv'))

    def test_lower_bound_training(self):
        self.train(self.path('lb'), architecture='lower_bound', iterations=2)
        self.assertTrue(os.path.exists(self.path('lb', 'lower_bound.ckpt')))

    def test_zeta_sweep(self):
        self.train(self.path('run'))
        self.command('sweep_zeta', config=self.config_path, out=self.tmp,
            checkpoint=[self.path('run', 'ddcl.ckpt')])
        rows = read_csv(self.path('results.csv'))
        self.assertEqual(set(r.scheme for r in rows), {'zf', 'zf-theo', 'mmse', 'mmse-theo', 'ddcl', 'ddcl-theo'})
        for scheme in ('zf', 'zf-theo', 'mmse', 'mmse-theo'):
            values = [(r.fer, r.ci_half) for r in rows if r.scheme == scheme]
            self.assertEqual(len(values), 2)
            self.assertEqual(values[0], values[1])
        self.assertEqual(sorted(r.x for r in rows if r.scheme == 'ddcl'), [0.0, 1.0])

    def test_tau_sweep(self):
        self.train(self.path('tau1'), tau=1)
        self.train(self.path('tau2'))
        self.command('sweep_tau', config=self.config_path, out=self.tmp,
            checkpoint=[self.path('tau1', 'ddcl.ckpt'), self.path('tau2', 'ddcl.ckpt')])
        rows = read_csv(self.path('results.csv'))
        self.assertEqual(sorted(r.x for r in rows if r.scheme == 'ddcl'), [1.0, 2.0])
        mmse = [r.fer for r in rows if r.scheme == 'mmse-theo']
        self.assertEqual(mmse[0], mmse[1])

    def test_tau_sweep_needs_every_depth(self):
        self.train(self.path('tau2'))
        with self.assertRaises(CommandError) as caught:
            self.command('sweep_tau', config=self.config_path, out=self.tmp,
                checkpoint=[self.path('tau2', 'ddcl.ckpt')])
        self.assertEqual(caught.exception.returncode, 2)

    def test_snr_sweep_with_checkpoint(self):
        self.train(self.path('run'))
        self.command('sweep_snr', config=self.config_path, out=self.tmp,
            checkpoint=[self.path('run', 'ddcl.ckpt')])
        rows = read_csv(self.path('results.csv'))
        self.assertEqual(len([r for r in rows if r.scheme == 'ddcl']), 3)

    def test_corrupt_checkpoint_exit_code(self):
        path = self.path('junk.ckpt')
        with open(path, 'wb') as f:
            f.write(b'not a checkpoint')
        with self.assertRaises(CommandError) as caught:
            self.command('sweep_snr', config=self.config_path, out=self.tmp, checkpoint=[path])
        self.assertEqual(caught.exception.returncode, 4)
