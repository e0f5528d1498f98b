from django.core.management.base import BaseCommand, CommandError

try:
    from pudb import post_mortem
except ImportError:
    from pdb import post_mortem

from otfslab import jobs
from otfslab.core.errors import OtfsLabError

import logging
logger = logging.getLogger(__name__)


class Command(BaseCommand):
    help = "Runs a job, which is a no-arguments function in the project's jobs.py"

    def add_arguments(self, parser):
        parser.add_argument('jobname', type=str)
        parser.add_argument('--pdb', action='store_true', dest='pdb',
            help='Launch into Python debugger on exception')

    def handle(self, jobname, **options):
        job = getattr(jobs, jobname, None)
        if not callable(job) or jobname.startswith('_') or getattr(job, '__module__', None) != jobs.__name__:
            raise CommandError("No job named %r" % jobname, returncode=2)
        try:
            job()
        except Exception as e:
            if options.get('pdb'):
                post_mortem()
            else:
                logger.exception("Exception in job %s" % jobname)
            if isinstance(e, OtfsLabError):
                raise CommandError(str(e), returncode=e.exit_code)
            raise
