import os

from django.conf import settings
from django.core.management import call_command

from otfslab.modem.qam import SUPPORTED_ORDERS, Constellation

import logging
logger = logging.getLogger(__name__)


def constellation_docs():
    """Writes the Gray labeling of every supported QAM order to
    docs/constellations.md."""
    lines = ['# Constellation labelings', '',
        'Unit-average-energy square QAM with Gray labels. The first half of each',
        'label selects the in-phase level, the second half the quadrature level.',
        'Generated by `python manage.py job constellation_docs`.', '']
    for order in SUPPORTED_ORDERS:
        constellation = Constellation(order)
        lines += ['## %d-QAM' % order, '', '| bits | symbol |', '| --- | --- |']
        for bits, point in constellation.labeling_table():
            lines.append('| `%s` | %+.6f %+.6fj |' % (bits, point.real, point.imag))
        lines.append('')
    os.makedirs(settings.OTFSLAB_DOCS_ROOT, exist_ok=True)
    path = os.path.join(settings.OTFSLAB_DOCS_ROOT, 'constellations.md')
    with open(path, 'w', encoding='utf8') as f:
        f.write('\n'.join(lines))
    logger.info("Wrote %s" % path)
    return path


def validate_defaults():
    """Theory-vs-simulation check at the default system settings."""
    call_command('validate_fer', out=os.path.join(settings.OTFSLAB_OUTPUT_ROOT, 'validate_fer'))
