"""
Shared plumbing for the simulator's management commands.

Every command accepts ``--seed``, ``--out-dir``, ``--threads`` and
``--format``. Errors become ``CommandError`` with exit status 2 for bad
input and 3 for failures inside the simulation.
"""
from django.core.management.base import BaseCommand, CommandError

from ..conf import setting
from ..exceptions import (
    InvalidSpec,
    MeanderNFCError,
    RankDeficient,
    ScenarioParseError,
    ScenarioValidationError,
    UnsupportedRate,
)
from ..scenario import run, validate

VALIDATION_ERRORS = (ScenarioParseError, ScenarioValidationError, InvalidSpec, UnsupportedRate, RankDeficient)


class SimulationCommand(BaseCommand):
    def add_arguments(self, parser):
        self.add_simulation_arguments(parser)
        parser.add_argument("--seed", type=int, default=None, help="Master seed (default: MEANDER_NFC_DEFAULT_SEED)")
        parser.add_argument(
            "--out-dir", default=None, help="Directory for output files (default: the scenario's output.dir, else out)"
        )
        parser.add_argument(
            "--threads", type=int, default=None, help="Worker threads for sweep rows; never changes the output"
        )
        parser.add_argument("--format", choices=["csv", "json"], default=None, help="Table format (default: csv)")

    def add_simulation_arguments(self, parser):
        pass

    def handle(self, *args, **options):
        try:
            return self.simulate(**options)
        except VALIDATION_ERRORS as e:
            raise CommandError(str(e), returncode=2)
        except MeanderNFCError as e:
            raise CommandError(f"simulation failed: {e}", returncode=3)

    def simulate(self, **options):
        raise NotImplementedError("Subclasses must implement simulate")

    def seed(self, options):
        return setting("DEFAULT_SEED") if options["seed"] is None else options["seed"]

    def run_scenario(self, data, options):
        """Validate an ad-hoc scenario built from command-line flags and run it."""
        data = dict(data, seed=self.seed(options))
        config = validate(data)
        report = run(config, out_dir=options["out_dir"], threads=options["threads"], fmt=options["format"])
        self.show_report(report)
        return report

    def show_report(self, report):
        for path in report.paths:
            self.stdout.write(f"  {path}")
        if report.errors:
            self.stdout.write(self.style.WARNING(f"{report.errors} row(s) recorded an error"))
        self.stdout.write(self.style.SUCCESS(f"{report.pipeline}: {report.rows} row(s) written"))


def sweep_arguments(parser, variable, default_help):
    parser.add_argument(
        "--sweep",
        nargs=3,
        type=float,
        metavar=("START", "STOP", "STEP"),
        default=None,
        help=f"Sweep {variable} over an inclusive grid ({default_help})",
    )


def sweep_from(options, variable):
    if options["sweep"] is None:
        return []
    start, stop, step = options["sweep"]
    return [{"variable": variable, "start": start, "stop": stop, "step": step}]
