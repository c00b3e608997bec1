"""
Management command: impedance

Reader impedance curve, twin-coil difference ratio and the stray
capacitance that reproduces a measured balanced band.
"""
from ..base import SimulationCommand, sweep_arguments, sweep_from


class Command(SimulationCommand):
    help = "Sweeps reader impedance over frequency and reports twin-coil balance."

    def add_simulation_arguments(self, parser):
        parser.add_argument("--R", type=float, default=18.0, help="Reader resistance (ohm)")
        parser.add_argument("--L", type=float, default=2.2e-6, help="Reader inductance (H)")
        parser.add_argument("--n-caps", type=int, default=4)
        parser.add_argument("--mismatch", type=float, default=0.005, help="Relative capacitor mismatch of the twin")
        parser.add_argument("--f-start", type=float, default=11e6)
        parser.add_argument("--f-stop", type=float, default=15e6)
        parser.add_argument("--points", type=int, default=801)
        sweep_arguments(parser, "the capacitor mismatch", "one table row per value")

    def simulate(self, **options):
        self.run_scenario(
            {
                "name": "impedance",
                "pipeline": "impedance",
                "reader_circuit": {"R": options["R"], "L": options["L"], "n_caps": options["n_caps"]},
                "impedance": {
                    "f_start": options["f_start"],
                    "f_stop": options["f_stop"],
                    "n_points": options["points"],
                    "mismatch": options["mismatch"],
                },
                "sweeps": sweep_from(options, "mismatch"),
            },
            options,
        )
