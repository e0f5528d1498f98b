"""Resolved experiment configuration.

Values come from the OTFSLAB_* settings, are overridden by an INI file
([system], [channel], [experiment] and [training] sections, each
validated by its form in otfslab.bench.forms) and finally by
command-line flags.
"""
import configparser
import os

from django.conf import settings

from otfslab.bench.forms import PREDICTIVE_SCHEMES, SECTION_FORMS
from otfslab.channel.paths import ChannelConfig
from otfslab.core.errors import ConfigurationError
from otfslab.core.utils import snr_to_noise_variance
from otfslab.ddcl.training import TrainConfig
from otfslab.link.analytics import MMSE

import logging
logger = logging.getLogger(__name__)

RESOLVED_CONFIG = 'resolved-config.ini'

SNR_CONVENTION = ("SNR is the average received power per data symbol over the "
    "noise power: sigma^2 = P_0 / (K * 10^(SNR/10)).")


def format_value(value):
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, (list, tuple)):
        return ', '.join(format_value(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


class ExperimentConfig(object):

    def __init__(self, values):
        self.values = dict(values)
        for key, value in self.values.items():
            setattr(self, key, value)
        self.check()

    @classmethod
    def defaults(cls):
        values = {}
        for form in SECTION_FORMS:
            for key, setting in form.settings_keys.items():
                values[key] = getattr(settings, setting)
        return values

    @classmethod
    def load(cls, path=None, overrides=None):
        """settings < INI file at `path` < `overrides` (None values skipped)."""
        values = cls.defaults()
        if path:
            values.update(read_ini(path))
        values.update((k, v) for k, v in (overrides or {}).items() if v is not None)
        return cls(values)

    def check(self):
        mn = self.m * self.n
        if self.k > mn:
            raise ConfigurationError("system.k: K=%d exceeds MN=%d" % (self.k, mn))
        if self.max_delay >= mn:
            raise ConfigurationError("channel.max_delay: %d must be below MN=%d" % (self.max_delay, mn))
        if self.mod_order not in (4, 16, 64):
            raise ConfigurationError("system.mod_order: %r is not 4, 16 or 64" % self.mod_order)
        if not self.snr_db:
            raise ConfigurationError("system.snr_db: at least one SNR point is needed")
        if not self.schemes:
            raise ConfigurationError("experiment.schemes: no schemes to evaluate")
        if self.dropping and mn % 2:
            raise ConfigurationError("experiment.dropping: MN=%d can't be halved" % mn)
        if any(not 0 < g <= 1 for g in self.gamma_values):
            raise ConfigurationError("experiment.gamma_values: every gamma must lie in (0, 1]")
        if min(self.trials, self.channels, self.chunk, self.workers) < 1:
            raise ConfigurationError("experiment: trials, channels, chunk and workers must be positive")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigurationError("experiment.seed: %r is not an unsigned 64-bit integer" % self.seed)
        self.channel_config()

    @property
    def mn(self):
        return self.m * self.n

    @property
    def predictive_schemes(self):
        return [s for s in self.schemes if s in PREDICTIVE_SCHEMES]

    @property
    def frame_duration(self):
        """tau_F = N T with T = 1/delta_f, in seconds."""
        return self.n / float(self.subcarrier_spacing_hz)

    def channel_config(self, **changes):
        cfg = ChannelConfig(m=self.m, n=self.n, paths=self.paths, max_delay=self.max_delay,
            max_doppler=self.max_doppler, rho=self.rho, offset_bound=self.offset_bound, nmse=self.nmse)
        return cfg.replace(**changes) if changes else cfg

    def noise_variance(self, snr_db, k=None):
        """sigma^2 at snr_db for K data symbols per frame (experiment K by default)."""
        return snr_to_noise_variance(snr_db, self.power_budget, self.k if k is None else k)

    def train_config(self):
        return TrainConfig(batch_size=self.batch_size, learning_rate=self.learning_rate,
            iterations=self.iterations, patience=self.patience, eval_every=self.eval_every,
            validation_fraction=self.validation_fraction, seed=self.seed, snr_db=self.train_snr_db,
            mod_order=self.mod_order, equalizer=MMSE, ser_rule=self.ser_rule)

    def as_ini(self):
        parser = configparser.ConfigParser(interpolation=None)
        for form in SECTION_FORMS:
            parser[form.section] = dict((key, format_value(self.values[key]))
                for key in form.base_fields)
        return parser

    def write(self, directory):
        path = os.path.join(directory, RESOLVED_CONFIG)
        with open(path, 'w', encoding='utf8') as f:
            f.write('# Resolved otfslab configuration\n# %s\n\n' % SNR_CONVENTION)
            self.as_ini().write(f)
        return path


def read_ini(path):
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path, encoding='utf8') as f:
            parser.read_file(f)
    except configparser.Error as e:
        raise ConfigurationError("%s: %s" % (path, e))
    forms = dict((form.section, form) for form in SECTION_FORMS)
    unknown = [s for s in parser.sections() if s not in forms]
    if unknown:
        raise ConfigurationError("%s: unknown section(s) %s" % (path, ', '.join(unknown)))
    values = {}
    for section in parser.sections():
        values.update(forms[section](dict(parser[section])).cleaned_or_raise())
    return values
