"""
Management command: protocol_sim

Time-division readout session of N sensor tags under framed slotted Aloha.
"""
from django.core.management.base import CommandError

from ..base import SimulationCommand, sweep_arguments, sweep_from


class Command(SimulationCommand):
    help = "Runs a multi-tag readout session."

    def add_simulation_arguments(self, parser):
        parser.add_argument("--tags", type=int, default=4, help="Number of tags")
        parser.add_argument("--duration", type=float, default=60.0, help="Session length (s)")
        parser.add_argument("--slots", type=int, default=4, help="Slots per round")
        parser.add_argument("--slot-duration", type=float, default=None, help="Seconds; calibrated when omitted")
        parser.add_argument("--target-rate", type=float, default=1.5, help="Per-tag read rate for calibration (Hz)")
        parser.add_argument(
            "--calibrate-for", type=int, default=None, help="Tag count the slot is sized for (default: --tags)"
        )
        parser.add_argument("--link-ber", type=float, default=0.0)
        sweep_arguments(parser, "the tag count", "one summary row per count")

    def simulate(self, **options):
        if options["tags"] < 1:
            raise CommandError("--tags must be at least 1", returncode=2)
        self.run_scenario(
            {
                "name": "protocol",
                "pipeline": "protocol",
                "tags": [{"uid": i + 1, "sensor_kind": "temperature"} for i in range(options["tags"])],
                "frame": {
                    "slots_per_round": options["slots"],
                    "slot_duration": options["slot_duration"],
                    "target_rate": options["target_rate"],
                    "calibrate_for": options["calibrate_for"] or options["tags"],
                },
                "session": {"duration": options["duration"], "link_ber": options["link_ber"]},
                "sweeps": sweep_from(options, "n_tags"),
            },
            options,
        )
