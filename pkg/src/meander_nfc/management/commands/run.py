"""
Management command: run

Runs a scenario file, or every scenario of the bundled reference preset.

Usage:
    meander-nfc run scenario.json --out-dir out/
    meander-nfc run --preset reference --threads 4
"""
from django.core.management.base import CommandError

from ...scenario import load_scenario, reference_scenarios, run, validate
from ..base import SimulationCommand


class Command(SimulationCommand):
    help = "Runs a scenario JSON file or a bundled preset."

    def add_simulation_arguments(self, parser):
        parser.add_argument("scenario", nargs="?", help="Path to a scenario JSON file")
        parser.add_argument("--preset", choices=["reference"], default=None)

    def simulate(self, **options):
        if bool(options["scenario"]) == bool(options["preset"]):
            raise CommandError("give exactly one of a scenario file or --preset", returncode=2)
        if options["preset"]:
            configs = reference_scenarios(self.seed(options))
        else:
            config = load_scenario(options["scenario"])
            if options["seed"] is not None:
                config = validate(dict(config.data, seed=options["seed"]), config.source)
            configs = [config]
        failed = 0
        for config in configs:
            self.stdout.write(f"{config.name} ({config.pipeline}, config {config.hash[:12]})")
            out_dir = options["out_dir"] or config.section("output")["dir"]
            if len(configs) > 1:
                out_dir = f"{out_dir}/{config.name}"
            report = run(config, out_dir=out_dir, threads=options["threads"], fmt=options["format"])
            self.show_report(report)
            failed += report.errors
        if failed:
            self.stdout.write(self.style.WARNING(f"{failed} row(s) failed in total"))
