"""
Management command: field_map

Biot-Savart field map of a reader coil on a plane, plus the depth-decay
ratio used to compare surface confinement.

Usage:
    meander-nfc field-map --reader meander --n-runs 6
    meander-nfc field-map --reader helical --origin 0 0 0.2 --v-axis 0 1 0
    meander-nfc field-map --coil my_coil.json
"""
import json
from pathlib import Path

from ...exceptions import ScenarioParseError
from ..base import SimulationCommand


class Command(SimulationCommand):
    help = "Computes the magnetic field map of a reader coil."

    def add_simulation_arguments(self, parser):
        parser.add_argument("--reader", choices=["meander", "twin-meander", "helical"], default="meander")
        parser.add_argument("--coil", help="CoilPath JSON file; overrides --reader")
        parser.add_argument("--n-runs", type=int, default=6)
        parser.add_argument("--panel-width", type=float, default=0.3)
        parser.add_argument("--panel-height", type=float, default=0.5)
        parser.add_argument("--wire-spacing", type=float, default=0.04)
        parser.add_argument("--circumference", type=float, default=0.8)
        parser.add_argument("--turns", type=int, default=4)
        parser.add_argument("--origin", nargs=3, type=float, default=None, help="Grid origin (m)")
        parser.add_argument("--u-axis", nargs=3, type=float, default=[1.0, 0.0, 0.0])
        parser.add_argument("--v-axis", nargs=3, type=float, default=[0.0, 0.0, -1.0])
        parser.add_argument("--shape", nargs=2, type=int, default=[41, 11])
        parser.add_argument("--grid-spacing", type=float, default=0.0075)
        parser.add_argument("--current", type=float, default=1.0, help="Drive current (A)")

    def simulate(self, **options):
        if options["coil"]:
            reader = {"kind": "path", "coil": _read_coil(options["coil"])}
        else:
            reader = {
                "kind": options["reader"],
                "n_runs": options["n_runs"],
                "panel_width": options["panel_width"],
                "panel_height": options["panel_height"],
                "wire_spacing": options["wire_spacing"],
                "circumference": options["circumference"],
                "turns": options["turns"],
            }
        self.run_scenario(
            {
                "name": "field-map",
                "pipeline": "field-map",
                "reader": reader,
                "field_map": {
                    "origin": options["origin"],
                    "u_axis": options["u_axis"],
                    "v_axis": options["v_axis"],
                    "shape": options["shape"],
                    "spacing": options["grid_spacing"],
                    "current": options["current"],
                },
            },
            options,
        )


def _read_coil(path):
    try:
        return json.loads(Path(path).read_text())
    except OSError as e:
        raise ScenarioParseError(f"cannot read coil: {e.strerror}", path=str(path))
    except json.JSONDecodeError as e:
        raise ScenarioParseError(e.msg, path=str(path), line=e.lineno, column=e.colno)
