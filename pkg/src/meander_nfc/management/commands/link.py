"""
Management command: link

Coupling between a meander reader and one tag: mutual inductance, k,
reflected impedance and the bridge output it produces.
"""
from pathlib import Path

from ...circuit import BridgeConfig, SensorCircuit, bridge_output, impedance, reflected_impedance
from ...conf import setting
from ...export import provenance, write_json
from ...power import LinkTemplate
from ...scenario import reference_tag_center, validate
from ..base import SimulationCommand


class Command(SimulationCommand):
    help = "Reports k, M and reflected impedance for one reader/tag pose."

    def add_simulation_arguments(self, parser):
        parser.add_argument("--offset", type=float, default=0.0, help="Lateral tag offset across the runs (m)")
        parser.add_argument("--height", type=float, default=0.005, help="Tag height above the wire surface (m)")
        parser.add_argument("--n-runs", type=int, default=10)
        parser.add_argument("--panel-width", type=float, default=0.4)
        parser.add_argument("--panel-height", type=float, default=0.4)
        parser.add_argument("--tag-diameter", type=float, default=0.03)
        parser.add_argument("--tag-turns", type=int, default=6)

    def simulate(self, **options):
        config = validate(
            {
                "name": "link",
                "seed": self.seed(options),
                "reader": {
                    "kind": "meander",
                    "n_runs": options["n_runs"],
                    "panel_width": options["panel_width"],
                    "panel_height": options["panel_height"],
                },
                "tags": [{"uid": 1, "diameter": options["tag_diameter"], "turns": options["tag_turns"]}],
            }
        )
        tag = config.tags[0]
        template = LinkTemplate(
            config.reader_paths[0],
            tag.coil,
            config.reader_circuit,
            SensorCircuit.from_q(tag.L, tag.Q, load=tag.load),
            reference_tag_center(config.reader_spec),
            options["height"],
            max_seg_len=config.max_seg_len,
        )
        k = template.coupling(options["offset"])
        link = template.link(k).link
        f0 = setting("CARRIER_HZ")
        z_reader = impedance(config.reader_circuit, f0)
        dz = reflected_impedance(link, impedance(template.sensor, f0))
        v_out = bridge_output(BridgeConfig(), z_reader + dz, z_reader)
        result = {
            "k": k,
            "M_H": link.M,
            "delta_Z_ohm": dz,
            "bridge_output_V": v_out,
            "provenance": provenance(config.hash, config.seed),
        }
        write_json(Path(options["out_dir"] or "out") / "link.json", result)
        self.stdout.write(f"k = {k:.5f}, M = {link.M:.4g} H, dZ = {dz.real:.4g}{dz.imag:+.4g}j ohm")
        self.stdout.write(self.style.SUCCESS(f"bridge output |V| = {abs(v_out):.4g} V"))
