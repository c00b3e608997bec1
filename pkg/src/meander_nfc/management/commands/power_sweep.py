"""
Management command: power_sweep

Output power and efficiency of a tag on a meander reader against lateral
offset, height or input power.
"""
from ..base import SimulationCommand, sweep_arguments, sweep_from


class Command(SimulationCommand):
    help = "Sweeps wireless power transfer to a sensor tag."

    def add_simulation_arguments(self, parser):
        parser.add_argument("variable", choices=["offset", "height", "P_in"], help="Quantity to sweep")
        parser.add_argument("--P-in", type=float, default=0.1, help="Input power (W)")
        parser.add_argument("--height", type=float, default=0.005, help="Tag height above the wire surface (m)")
        parser.add_argument("--n-runs", type=int, default=10)
        parser.add_argument("--panel-width", type=float, default=0.4)
        parser.add_argument("--panel-height", type=float, default=0.4)
        parser.add_argument("--tag-diameter", type=float, default=0.03)
        parser.add_argument("--tag-turns", type=int, default=6)
        sweep_arguments(parser, "the chosen variable", "default: a single point")

    def simulate(self, **options):
        self.run_scenario(
            {
                "name": f"power-{options['variable']}",
                "pipeline": "power",
                "reader": {
                    "kind": "meander",
                    "n_runs": options["n_runs"],
                    "panel_width": options["panel_width"],
                    "panel_height": options["panel_height"],
                },
                "tags": [{"uid": 1, "diameter": options["tag_diameter"], "turns": options["tag_turns"]}],
                "power": {"P_in": options["P_in"], "height": options["height"]},
                "sweeps": sweep_from(options, options["variable"]),
            },
            options,
        )
