# Local settings. Override any OTFSLAB_* default here.
from .default_settings import *

SECRET_KEY = 'otfslab-local'
