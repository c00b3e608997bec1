# meander_nfc/cli.py
"""
``meander-nfc`` console script.

Runs the package's management commands without a Django project:
``meander-nfc power-sweep offset --sweep -0.03 0.03 0.005`` is
``manage.py power_sweep ...`` with a minimal settings object.
"""
import sys

import django
from django.conf import settings
from django.core.management import execute_from_command_line

LOG_LEVELS = {0: "ERROR", 1: "WARNING", 2: "INFO", 3: "DEBUG"}


def _verbosity(argv):
    for i, arg in enumerate(argv):
        if arg in ("-v", "--verbosity") and i + 1 < len(argv):
            return int(argv[i + 1])
        if arg.startswith("--verbosity="):
            return int(arg.partition("=")[2])
    return 1


def configure(verbosity=1):
    if settings.configured:
        return
    settings.configure(
        INSTALLED_APPS=["meander_nfc"],
        LOGGING={
            "version": 1,
            "disable_existing_loggers": False,
            "formatters": {"plain": {"format": "%(levelname)s %(name)s: %(message)s"}},
            "handlers": {"console": {"class": "logging.StreamHandler", "formatter": "plain"}},
            "loggers": {
                "meander_nfc": {"handlers": ["console"], "level": LOG_LEVELS.get(verbosity, "DEBUG")},
            },
        },
    )
    django.setup()


def main(argv=None):
    argv = list(sys.argv if argv is None else argv)
    configure(_verbosity(argv))
    if len(argv) > 1 and not argv[1].startswith("-"):
        argv[1] = argv[1].replace("-", "_")
    execute_from_command_line(["meander-nfc"] + argv[1:])


if __name__ == "__main__":
    main()
