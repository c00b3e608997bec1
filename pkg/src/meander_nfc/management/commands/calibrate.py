"""
Management command: calibrate

Fits a meander garment coil to measured inductance and resistance, then
reports the achieved values, Q and the tuning capacitors.

Usage:
    meander-nfc calibrate --L 2.2e-6 --R 18
    meander-nfc calibrate --L 3.0e-6 --R 23 --n-caps 5
"""
from pathlib import Path

from ...export import provenance, write_json
from ...geometry import make_circular_coil
from ...scenario import calibrate_garment
from ..base import SimulationCommand


class Command(SimulationCommand):
    help = "Calibrates meander geometry and circuit to measured L and R."

    def add_simulation_arguments(self, parser):
        parser.add_argument("--L", type=float, required=True, help="Target inductance (H)")
        parser.add_argument("--R", type=float, required=True, help="Measured resistance (ohm)")
        parser.add_argument("--Q", type=float, default=None, help="Target Q (default: 2 pi f0 L / R)")
        parser.add_argument("--k", type=float, default=None, help="Target k at the reference tag")
        parser.add_argument("--n-caps", type=int, default=4, help="Distributed tuning capacitors")
        parser.add_argument("--panel-width", type=float, default=0.5)
        parser.add_argument("--max-height", type=float, default=1.0)
        parser.add_argument("--wire-spacing", type=float, default=0.04)
        parser.add_argument(
            "--reference-tag",
            action="store_true",
            default=False,
            help="Also report k for a 3 cm, 6-turn tag between the central runs",
        )

    def simulate(self, **options):
        result = calibrate_garment(
            {"L": options["L"], "R": options["R"], "Q": options["Q"], "k_at_reference_tag": options["k"]},
            panel_width=options["panel_width"],
            max_height=options["max_height"],
            wire_spacing=options["wire_spacing"],
            n_caps=options["n_caps"],
            reference_tag=make_circular_coil(0.03, 6) if options["reference_tag"] else None,
        )
        report = dict(result.report(), provenance=provenance(seed=self.seed(options)))
        path = write_json(Path(options["out_dir"] or "out") / "calibration.json", report)
        self.stdout.write(
            f"{result.spec.n_runs} runs, {result.spec.panel_height:.3f} m tall: "
            f"L = {result.achieved_L:.4g} H (target {result.target_L:.4g}, {100 * result.residual:+.2f}%), "
            f"Q = {result.Q:.2f} (target {result.target_Q:.2f})"
        )
        if result.k_reference is not None:
            target = "-" if result.target_k is None else f"{result.target_k:.4f}"
            self.stdout.write(f"  reference tag k = {result.k_reference:.4f} (target {target})")
        self.stdout.write(f"  {path}")
        self.stdout.write(self.style.SUCCESS(f"{result.circuit.n_caps} x {result.circuit.C_each * 1e12:.1f} pF"))
