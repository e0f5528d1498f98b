import os

DEBUG = False

PROJ_ROOT = os.path.dirname(os.path.realpath(__file__))

# Nothing here is persisted in a database; results go to files under
# OTFSLAB_OUTPUT_ROOT.
DATABASES = {}

TIME_ZONE = 'UTC'
USE_TZ = True
USE_I18N = False

OTFSLAB_OUTPUT_ROOT = os.path.realpath(os.path.join(PROJ_ROOT, '..', 'runs'))
OTFSLAB_DOCS_ROOT = os.path.realpath(os.path.join(PROJ_ROOT, '..', 'docs'))

# System defaults
OTFSLAB_M = 8                   # delay bins / subcarriers
OTFSLAB_N = 4                   # Doppler bins / time slots
OTFSLAB_K = 32                  # data symbols per frame (full mode: K = MN)
OTFSLAB_MOD_ORDER = 4           # QPSK
OTFSLAB_POWER_BUDGET = 32.0     # P_0; equals MN so that SNR = 1/sigma^2
OTFSLAB_CARRIER_HZ = 4e9
OTFSLAB_SUBCARRIER_SPACING_HZ = 15e3
OTFSLAB_SNR_DB = [0, 5, 10, 15, 20, 25, 30]

# Channel defaults
OTFSLAB_PATHS = 4
OTFSLAB_MAX_DELAY = 5
OTFSLAB_MAX_DOPPLER = 2
OTFSLAB_GAUSS_MARKOV_RHO = 0.9
OTFSLAB_OFFSET_BOUND = 1.0      # zeta
OTFSLAB_NMSE = 0.01
OTFSLAB_HISTORY = 5             # tau

# Training defaults
OTFSLAB_TRAIN_EXAMPLES = 30000
OTFSLAB_TRAIN_BATCH = 64
OTFSLAB_TRAIN_LEARNING_RATE = 1e-3
OTFSLAB_TRAIN_ITERATIONS = 20000
OTFSLAB_TRAIN_PATIENCE = 10
OTFSLAB_TRAIN_EVAL_EVERY = 100
OTFSLAB_TRAIN_VALIDATION_FRACTION = 0.1
OTFSLAB_TRAIN_SNR_DB = 20.0
OTFSLAB_LSTM_HIDDEN = 32

# Monte Carlo defaults; full-scale curves use at least 10**6 frames per point
OTFSLAB_MC_TRIALS = 100000
OTFSLAB_MC_CHANNELS = 100
OTFSLAB_MC_CHUNK = 10000
OTFSLAB_WORKERS = 1
OTFSLAB_SEED = 2024

# Experiments
OTFSLAB_SCHEMES = ['zf', 'mmse']   # ddcl / lower_bound need --checkpoint
OTFSLAB_SER_RULE = 'nearest-neighbour'   # '-theo' rows, validate_fer and the training objective
OTFSLAB_DROPPING = False
OTFSLAB_FIXED_SNR_DB = 30.0     # zeta and tau sweeps
OTFSLAB_ZETA_VALUES = [1, 2, 3, 4, 5]
OTFSLAB_TAU_VALUES = [2, 3, 4, 5, 6]
OTFSLAB_GAMMA_VALUES = [1.0, 0.75, 0.5]
OTFSLAB_TRADEOFF_SNR_DB = [10, 20, 30]
OTFSLAB_VALIDATE_CHANNELS = 20
OTFSLAB_VALIDATE_SNR_DB = [5, 10, 15, 20]

INSTALLED_APPS = [
    'otfslab.core',
    'otfslab.autodiff',
    'otfslab.channel',
    'otfslab.modem',
    'otfslab.link',
    'otfslab.ddcl',
    'otfslab.bench',
]

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '%(levelname)s %(asctime)s %(module)s %(process)d %(thread)d %(message)s'
        },
        'simple': {
            'format': '%(module)s %(levelname)s %(message)s'
        },
    },
    'handlers': {
        'null': {
            'level': 'DEBUG',
            'class': 'logging.NullHandler',
        },
        'console': {
            'level': 'DEBUG',
            'class': 'logging.StreamHandler',
            'formatter': 'simple'
        },
    },
    'loggers': {
        'django': {
            'handlers': ['console'],
            'propagate': True,
            'level': 'INFO',
        },
        'otfslab': {
            'handlers': ['console'],
            'level': 'WARNING',
        }
    },
}
