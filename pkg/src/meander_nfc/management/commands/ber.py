"""
Management command: ber

Bit error rate against input power for the NFC-A schemes, on the twin
bridge or the single-coil baseline.
"""
from ..base import SimulationCommand, sweep_arguments, sweep_from


class Command(SimulationCommand):
    help = "Simulates BER against input power."

    def add_simulation_arguments(self, parser):
        parser.add_argument(
            "--scheme",
            action="append",
            default=None,
            help="ook-106, bpsk-212, bpsk-424 or bpsk-848; repeat for several (default: bpsk-212)",
        )
        parser.add_argument("--single-coil", action="store_true", default=False, help="Single-coil baseline")
        parser.add_argument("--bits", type=int, default=None, help="Payload bits per power point")
        parser.add_argument("--margin-db", type=float, default=None, help="Eb/N0 margin at -10 dBm")
        sweep_arguments(parser, "input power in dBm", "default: -30 to +10 in 2 dB steps")

    def simulate(self, **options):
        self.run_scenario(
            {
                "name": "ber",
                "pipeline": "ber",
                "channel": {
                    "schemes": options["scheme"] or ["bpsk-212"],
                    "single_coil": options["single_coil"],
                    "bits_per_point": options["bits"],
                    "margin_db": options["margin_db"],
                },
                "sweeps": sweep_from(options, "P_in_dBm"),
            },
            options,
        )
