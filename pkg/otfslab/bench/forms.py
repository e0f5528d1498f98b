"""Config-file sections. Each form validates one INI section and knows
which Django setting supplies the default for each of its keys."""
from django import forms

from otfslab.core.forms import ChoiceListField, FloatListField, Form
from otfslab.link.analytics import SER_RULES

SCHEMES = ('zf', 'mmse', 'ddcl', 'lower_bound')
PREDICTIVE_SCHEMES = ('ddcl', 'lower_bound')


class SystemForm(Form):
    section = 'system'
    settings_keys = {
        'm': 'OTFSLAB_M',
        'n': 'OTFSLAB_N',
        'k': 'OTFSLAB_K',
        'mod_order': 'OTFSLAB_MOD_ORDER',
        'power_budget': 'OTFSLAB_POWER_BUDGET',
        'snr_db': 'OTFSLAB_SNR_DB',
        'carrier_hz': 'OTFSLAB_CARRIER_HZ',
        'subcarrier_spacing_hz': 'OTFSLAB_SUBCARRIER_SPACING_HZ',
    }

    m = forms.IntegerField(required=False, min_value=1)
    n = forms.IntegerField(required=False, min_value=1)
    k = forms.IntegerField(required=False, min_value=1)
    mod_order = forms.TypedChoiceField(required=False, coerce=int, empty_value=None,
        choices=[(str(o), str(o)) for o in (4, 16, 64)])
    power_budget = forms.FloatField(required=False, min_value=1e-12)
    snr_db = FloatListField(required=False)
    carrier_hz = forms.FloatField(required=False, min_value=0)
    subcarrier_spacing_hz = forms.FloatField(required=False, min_value=1e-12)

    def clean(self):
        cleaned_data = super(SystemForm, self).clean()
        m, n, k = (cleaned_data.get(key) for key in ('m', 'n', 'k'))
        if None not in (m, n, k) and k > m * n:
            self.add_error('k', "K=%d exceeds MN=%d" % (k, m * n))
        return cleaned_data


class ChannelForm(Form):
    section = 'channel'
    settings_keys = {
        'paths': 'OTFSLAB_PATHS',
        'max_delay': 'OTFSLAB_MAX_DELAY',
        'max_doppler': 'OTFSLAB_MAX_DOPPLER',
        'rho': 'OTFSLAB_GAUSS_MARKOV_RHO',
        'offset_bound': 'OTFSLAB_OFFSET_BOUND',
        'nmse': 'OTFSLAB_NMSE',
        'history': 'OTFSLAB_HISTORY',
    }

    paths = forms.IntegerField(required=False, min_value=1)
    max_delay = forms.IntegerField(required=False, min_value=0)
    max_doppler = forms.FloatField(required=False, min_value=0)
    rho = forms.FloatField(required=False, min_value=0, max_value=1)
    offset_bound = forms.FloatField(required=False, min_value=0)
    nmse = forms.FloatField(required=False, min_value=0)
    history = forms.IntegerField(required=False, min_value=1)


class ExperimentForm(Form):
    section = 'experiment'
    settings_keys = {
        'schemes': 'OTFSLAB_SCHEMES',
        'ser_rule': 'OTFSLAB_SER_RULE',
        'dropping': 'OTFSLAB_DROPPING',
        'fixed_snr_db': 'OTFSLAB_FIXED_SNR_DB',
        'zeta_values': 'OTFSLAB_ZETA_VALUES',
        'tau_values': 'OTFSLAB_TAU_VALUES',
        'gamma_values': 'OTFSLAB_GAMMA_VALUES',
        'tradeoff_snr_db': 'OTFSLAB_TRADEOFF_SNR_DB',
        'validate_channels': 'OTFSLAB_VALIDATE_CHANNELS',
        'validate_snr_db': 'OTFSLAB_VALIDATE_SNR_DB',
        'trials': 'OTFSLAB_MC_TRIALS',
        'channels': 'OTFSLAB_MC_CHANNELS',
        'chunk': 'OTFSLAB_MC_CHUNK',
        'workers': 'OTFSLAB_WORKERS',
        'seed': 'OTFSLAB_SEED',
    }

    schemes = ChoiceListField(SCHEMES, required=False)
    ser_rule = forms.ChoiceField(required=False, choices=[(r, r) for r in SER_RULES])
    dropping = forms.NullBooleanField(required=False)
    fixed_snr_db = forms.FloatField(required=False)
    zeta_values = FloatListField(required=False)
    tau_values = FloatListField(required=False)
    gamma_values = FloatListField(required=False)
    tradeoff_snr_db = FloatListField(required=False)
    validate_channels = forms.IntegerField(required=False, min_value=1)
    validate_snr_db = FloatListField(required=False)
    trials = forms.IntegerField(required=False, min_value=1)
    channels = forms.IntegerField(required=False, min_value=1)
    chunk = forms.IntegerField(required=False, min_value=1)
    workers = forms.IntegerField(required=False, min_value=1)
    seed = forms.IntegerField(required=False, min_value=0, max_value=2 ** 64 - 1)

    def clean_gamma_values(self):
        gammas = self.cleaned_data['gamma_values']
        if any(not 0 < g <= 1 for g in gammas):
            raise forms.ValidationError("Every gamma must lie in (0, 1]")
        return gammas

    def clean_tau_values(self):
        taus = self.cleaned_data['tau_values']
        if any(t != int(t) or t < 1 for t in taus):
            raise forms.ValidationError("History depths must be positive integers")
        return [int(t) for t in taus]

    def clean_zeta_values(self):
        zetas = self.cleaned_data['zeta_values']
        if any(z < 0 for z in zetas):
            raise forms.ValidationError("Offset bounds must be non-negative")
        return zetas


class TrainingForm(Form):
    section = 'training'
    settings_keys = {
        'examples': 'OTFSLAB_TRAIN_EXAMPLES',
        'batch_size': 'OTFSLAB_TRAIN_BATCH',
        'learning_rate': 'OTFSLAB_TRAIN_LEARNING_RATE',
        'iterations': 'OTFSLAB_TRAIN_ITERATIONS',
        'patience': 'OTFSLAB_TRAIN_PATIENCE',
        'eval_every': 'OTFSLAB_TRAIN_EVAL_EVERY',
        'validation_fraction': 'OTFSLAB_TRAIN_VALIDATION_FRACTION',
        'train_snr_db': 'OTFSLAB_TRAIN_SNR_DB',
        'hidden': 'OTFSLAB_LSTM_HIDDEN',
    }

    examples = forms.IntegerField(required=False, min_value=2)
    batch_size = forms.IntegerField(required=False, min_value=1)
    learning_rate = forms.FloatField(required=False, min_value=0)
    iterations = forms.IntegerField(required=False, min_value=1)
    patience = forms.IntegerField(required=False, min_value=1)
    eval_every = forms.IntegerField(required=False, min_value=1)
    validation_fraction = forms.FloatField(required=False, min_value=0, max_value=1)
    train_snr_db = forms.FloatField(required=False)
    hidden = forms.IntegerField(required=False, min_value=1)


SECTION_FORMS = [SystemForm, ChannelForm, ExperimentForm, TrainingForm]
