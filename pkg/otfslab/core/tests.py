from io import StringIO
import os
import tempfile

import numpy as np
from django import forms
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase, override_settings

from otfslab.core.errors import ConfigurationError
from otfslab.core.forms import ChoiceListField, FloatListField, Form
from otfslab.core.utils import memoize_property, noise_variance_to_snr, rng_stream, snr_to_noise_variance


class SampleForm(Form):
    section = 'sample'
    count = forms.IntegerField(required=False, min_value=1)
    values = FloatListField(required=False)
    names = ChoiceListField(['a', 'b'], required=False)


class FormTests(SimpleTestCase):

    def test_only_given_keys(self):
        self.assertEqual(SampleForm({'count': '3'}).cleaned_or_raise(), {'count': 3})

    def test_lists(self):
        cleaned = SampleForm({'values': '1, 3/4, -2.5', 'names': 'b, a'}).cleaned_or_raise()
        self.assertEqual(cleaned, {'values': [1.0, 0.75, -2.5], 'names': ['b', 'a']})

    def test_errors_name_the_section(self):
        with self.assertRaisesRegex(ConfigurationError, r'sample\.count'):
            SampleForm({'count': '0'}).cleaned_or_raise()
        with self.assertRaisesRegex(ConfigurationError, 'Unknown key'):
            SampleForm({'colour': 'red'}).cleaned_or_raise()
        with self.assertRaises(ConfigurationError):
            SampleForm({'values': '1, x'}).cleaned_or_raise()
        with self.assertRaises(ConfigurationError):
            SampleForm({'names': 'a, c'}).cleaned_or_raise()


class StreamTests(SimpleTestCase):

    def test_reproducible(self):
        np.testing.assert_array_equal(rng_stream(5, 1, 2).random(8), rng_stream(5, 1, 2).random(8))

    def test_independent(self):
        a = rng_stream(5, 1, 2).random(8)
        for other in (rng_stream(5, 2, 1), rng_stream(5, 1), rng_stream(6, 1, 2)):
            self.assertFalse(np.array_equal(a, other.random(8)))

    def test_snr_conversion(self):
        self.assertAlmostEqual(snr_to_noise_variance(10, 32.0, 32), 0.1)
        self.assertAlmostEqual(snr_to_noise_variance(0, 16.0, 32), 0.5)
        self.assertAlmostEqual(noise_variance_to_snr(snr_to_noise_variance(17.5, 4.0, 8), 4.0, 8), 17.5)

    def test_snr_conversion_follows_data_symbols(self):
        # half the frame carries data: the same budget over K = MN/2 symbols
        self.assertAlmostEqual(snr_to_noise_variance(10, 32.0, 16), 0.2)
        self.assertAlmostEqual(snr_to_noise_variance(20, 32.0, 16) / snr_to_noise_variance(20, 32.0, 32), 2.0)
        self.assertAlmostEqual(noise_variance_to_snr(0.2, 32.0, 16), 10.0)


class MemoizeTests(SimpleTestCase):

    def test_computed_once(self):
        class Counter(object):
            calls = 0

            @property
            @memoize_property
            def value(self):
                self.calls += 1
                return self.calls

        counter = Counter()
        self.assertEqual((counter.value, counter.value), (1, 1))


class JobTests(SimpleTestCase):

    def test_unknown_job(self):
        with self.assertRaises(CommandError):
            call_command('job', 'no_such_job', stdout=StringIO())
        with self.assertRaises(CommandError):
            call_command('job', 'call_command', stdout=StringIO())

    def test_constellation_docs(self):
        with tempfile.TemporaryDirectory() as docs:
            with override_settings(OTFSLAB_DOCS_ROOT=docs):
                call_command('job', 'constellation_docs', stdout=StringIO())
            with open(os.path.join(docs, 'constellations.md')) as f:
                text = f.read()
        self.assertIn('## 16-QAM', text)
        self.assertIn('| `00` | +0.707107 +0.707107j |', text)
