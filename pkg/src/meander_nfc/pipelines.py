# meander_nfc/pipelines.py
"""
Scenario pipelines.

Each pipeline turns a validated ScenarioConfig into flat files. Sweep
points are evaluated independently (optionally on a thread pool) and
written in grid order, so the thread count never changes the output.
"""
import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import geometry, magnetics
from .circuit import (
    BridgeConfig,
    SensorCircuit,
    calibrate_stray_capacitance,
    impedance,
    impedance_difference_ratio,
    q_factor,
)
from .conf import setting
from .exceptions import MeanderNFCError
from .export import provenance, write_json, write_table
from .phy import (
    ChannelTemplate,
    calibrate_noise_density,
    calibrate_single_coil_leak,
    carrier_leak_from_bridge,
    default_power_grid,
    link_gain_from_bridge,
    simulate_ber,
    threshold_crossing,
)
from .power import LinkTemplate, PowerLink, max_powered_tags, motion_power_profile, output_power
from .protocol import run_session
from .scenario import reference_tag_center

logger = logging.getLogger(__name__)


@dataclass
class RunReport:
    pipeline: str
    paths: list = field(default_factory=list)
    rows: int = 0
    errors: int = 0

    @property
    def ok(self):
        return self.errors == 0


class Pipeline:
    """Base class for scenario pipelines."""

    name = None
    short_description = None
    columns = ()

    def __call__(self, config, out_dir=None, threads=None, fmt=None):
        self.config = config
        self.out_dir = Path(out_dir or config.section("output")["dir"])
        self.fmt = fmt or config.section("output")["format"] or setting("OUTPUT_FORMAT")
        self.threads = max(1, int(threads or setting("THREADS")))
        self.header = provenance(config.hash, config.seed, scenario=config.name, pipeline=self.name)
        self.report = RunReport(self.name)
        logger.info("running %s pipeline for %r", self.name, config.name)
        self.prepare()
        self.run()
        return self.report

    def prepare(self):
        pass

    def run(self):
        rows = self.evaluate_all(self.points())
        self.write(self.name.replace("-", "_"), self.sweep_columns() + list(self.columns) + ["error"], rows)

    def points(self):
        sweeps = self.config.sweeps
        if not sweeps:
            return [{}]
        names = [s.variable for s in sweeps]
        return [dict(zip(names, values)) for values in itertools.product(*(s.values for s in sweeps))]

    def sweep_columns(self):
        return [s.variable for s in self.config.sweeps]

    def evaluate(self, point, seed):
        raise NotImplementedError("Subclasses must implement evaluate")

    def _row(self, indexed):
        idx, point = indexed
        coords = [point[name] for name in self.sweep_columns()]
        try:
            return coords + list(self.evaluate(point, np.random.SeedSequence([self.config.seed, idx]))) + [""]
        except MeanderNFCError as e:
            logger.warning("%s row %d %r failed: %s", self.name, idx, point, e)
            return coords + [math.nan] * len(self.columns) + [str(e)]

    def evaluate_all(self, points):
        indexed = list(enumerate(points))
        if self.threads == 1 or len(indexed) == 1:
            rows = [self._row(p) for p in indexed]
        else:
            with ThreadPoolExecutor(max_workers=self.threads) as pool:
                rows = list(pool.map(self._row, indexed))
        self.report.errors += sum(1 for r in rows if r[-1])
        return rows

    def write(self, stem, columns, rows, header=None):
        path = write_table(self.out_dir / stem, columns, rows, header or self.header, self.fmt)
        self.report.paths.append(path)
        self.report.rows += len(rows)
        return path

    def write_summary(self, stem, data):
        path = write_json(self.out_dir / f"{stem}.json", dict(data, provenance=self.header))
        self.report.paths.append(path)
        return path


def _meander_half(spec):
    return spec.half if isinstance(spec, geometry.TwinMeanderSpec) else spec


class FieldMapPipeline(Pipeline):
    name = "field-map"
    short_description = "Biot-Savart field map of the reader coil"
    columns = ("x", "y", "z", "Bx", "By", "Bz", "B_abs")

    def filaments(self):
        sets = [geometry.discretize(p, self.config.max_seg_len) for p in self.config.reader_paths]
        merged = sets[0]
        for other in sets[1:]:
            merged = merged.merge(other)
        return merged

    def probes(self):
        """Surface probes and inward normals for the depth-decay figure."""
        spec = _meander_half(self.config.reader_spec)
        if isinstance(spec, geometry.MeanderSpec):
            xs = (np.arange(spec.n_runs - 1) + 0.5) * spec.wire_spacing
            probes = np.column_stack([xs, np.full_like(xs, spec.panel_height / 2), np.zeros_like(xs)])
            return probes, np.tile([0.0, 0.0, -1.0], (len(xs), 1))
        reader = self.config.section("reader")
        if reader["kind"] == "helical":
            radius = reader["circumference"] / (2 * np.pi)
            phi = np.linspace(0, 2 * np.pi, 8, endpoint=False) + np.pi / 8
            radial = np.column_stack([np.cos(phi), np.sin(phi), np.zeros_like(phi)])
            probes = radius * radial + [0.0, 0.0, reader["pitch"] * reader["turns"] / 2]
            return probes, -radial
        return None, None

    def run(self):
        fm = self.config.section("field_map")
        filaments = self.filaments()
        grid = magnetics.field_map(filaments, fm["current"], self.config.field_grid)
        if self.fmt == "csv":
            path = grid.export(self.out_dir / "field_map.csv", self.header)
            self.report.paths.append(path)
            self.report.rows += int(np.prod(grid.grid.shape))
        else:
            self.write("field_map", list(self.columns), list(grid.rows()))
        summary = {"masked_samples": int(grid.mask.sum()), "wire_length_m": filaments.total_length}
        probes, normals = self.probes()
        if probes is not None:
            shallow, deep = fm["depths"]
            summary["depth_decay_ratio"] = magnetics.depth_decay_ratio(
                filaments, probes, normals, shallow, deep, fm["current"]
            )
        self.write_summary("field_map_summary", summary)


class ImpedancePipeline(Pipeline):
    name = "impedance"
    short_description = "Reader impedance curve and twin-coil balance"
    columns = ("band_lo_Hz", "band_hi_Hz", "band_width_Hz", "covers_subcarrier_band")

    def prepare(self):
        im = self.config.section("impedance")
        self.freqs = np.linspace(im["f_start"], im["f_stop"], im["n_points"])
        self.reader = self.config.reader_circuit

    def twin(self, mismatch):
        return replace(self.reader, C_each=self.reader.C_each * (1 + mismatch))

    def evaluate(self, point, seed):
        mismatch = point.get("mismatch", self.config.section("impedance")["mismatch"])
        z1 = impedance(self.reader, self.freqs)
        z2 = impedance(self.twin(mismatch), self.freqs)
        ratio = impedance_difference_ratio(z1, z2, self.freqs)
        f0 = setting("CARRIER_HZ")
        fs = f0 / setting("SUBCARRIER_DIVIDER")
        return [*ratio.band, ratio.width, ratio.covers(f0 - fs, f0 + fs)]

    def run(self):
        if self.config.sweeps:
            return super().run()
        mismatch = self.config.section("impedance")["mismatch"]
        z1 = impedance(self.reader, self.freqs)
        z2 = impedance(self.twin(mismatch), self.freqs)
        ratio = impedance_difference_ratio(z1, z2, self.freqs)
        rows = list(zip(self.freqs, z1.real, z1.imag, z2.real, z2.imag, ratio.ratio))
        self.write("impedance", ["f_Hz", "Re", "Im", "Re_twin", "Im_twin", "difference_ratio"], rows)
        f0 = setting("CARRIER_HZ")
        summary = {
            "Q": q_factor(self.reader, f0),
            "C_each_F": self.reader.C_each,
            "n_caps": self.reader.n_caps,
            "twin_band_Hz": list(ratio.band),
        }
        try:
            stray = calibrate_stray_capacitance(
                self.reader, self.config.section("impedance")["target_band"], self.freqs
            )
            summary["stray_capacitance_F"] = stray.parasitic_C
        except MeanderNFCError as e:
            logger.warning("stray capacitance calibration failed: %s", e)
            summary["stray_capacitance_error"] = str(e)
        self.write_summary("impedance_summary", summary)


class PowerPipeline(Pipeline):
    name = "power"
    short_description = "Wireless power transfer sweeps"
    columns = ("k", "P_out_W", "efficiency", "outage")

    def center(self):
        explicit = self.config.section("power")["center"]
        if explicit is not None:
            return tuple(explicit)
        spec = _meander_half(self.config.reader_spec)
        if isinstance(spec, geometry.MeanderSpec):
            return reference_tag_center(spec)
        return tuple(self.config.reader_paths[0].centroid[:2])

    def prepare(self):
        tag = self.config.tags[0]
        pw = self.config.section("power")
        self.template = LinkTemplate(
            self.config.reader_paths[0],
            tag.coil,
            self.config.reader_circuit,
            SensorCircuit.from_q(tag.L, tag.Q, load=tag.load),
            self.center(),
            pw["height"],
            pw["P_in"],
            self.config.max_seg_len,
        )
        # shared by every row
        self.template.reference_load

    def evaluate(self, point, seed):
        t = self.template
        P_in = point.get("P_in", t.P_in)
        if "motion" in point:
            result = motion_power_profile(t, [self.config.motions[point["motion"]]])[0]
        else:
            k = t.coupling(point.get("offset", 0.0), point.get("height"))
            link = PowerLink.from_k(t.reader, t.sensor, k, P_in)
            result = output_power(link, t.reference_load)
        return [result.k, result.efficiency * P_in, result.efficiency, result.outage]

    def run(self):
        super().run()
        link = self.template.reference_link
        self.write_summary(
            "power_summary",
            {
                "k_reference": link.link.k,
                "figure_of_merit": link.figure_of_merit,
                "optimal_load_ohm": self.template.reference_load,
                "max_powered_tags": max_powered_tags(link),
            },
        )


class BERPipeline(Pipeline):
    name = "ber"
    short_description = "Bit error rate against input power"
    columns = ("bits", "errors", "ber", "sync_failures")

    def prepare(self):
        ch = self.config.section("channel")
        reader = self.config.reader_circuit
        f0 = setting("CARRIER_HZ")
        bridge = BridgeConfig()
        z1 = impedance(reader, f0)
        z2 = impedance(replace(reader, C_each=reader.C_each * (1 + ch["mismatch"])), f0)
        template = ChannelTemplate(
            link_gain_from_bridge(bridge, z1, ch["delta_z"]),
            carrier_leak_from_bridge(bridge, z1, z2),
        )
        template = calibrate_noise_density(template, p_ref_dbm=ch["p_ref_dbm"], margin_db=ch["margin_db"])
        if ch["single_coil"]:
            template = calibrate_single_coil_leak(template, ch["shift_db"])
        self.template = template
        self.bits = ch["bits_per_point"] or 20 * int(round(1 / setting("BER_TARGET")))

    def points(self):
        if self.config.sweeps:
            return super().points()
        return [{"P_in_dBm": p} for p in default_power_grid()]

    def sweep_columns(self):
        return super().sweep_columns() or ["P_in_dBm"]

    def evaluate(self, point, seed):
        p = point["P_in_dBm"]
        point_ber = simulate_ber(
            self.scheme,
            self.template.channel_at(p),
            self.bits,
            self.config.receiver,
            seed,
            self.config.section("channel")["frame_bits"],
            p_dbm=p,
        )
        self.points_by_scheme[self.scheme.name].append(point_ber)
        return [point_ber.bits_sent, point_ber.bit_errors, point_ber.ber, point_ber.sync_failures]

    def run(self):
        self.points_by_scheme = {}
        columns = self.sweep_columns() + list(self.columns) + ["scheme", "config_hash", "error"]
        for scheme in self.config.schemes:
            self.scheme = scheme
            self.points_by_scheme[scheme.name] = []
            rows = self.evaluate_all(self.points())
            rows = [r[:-1] + [scheme.name, self.config.hash, r[-1]] for r in rows]
            self.write(f"ber_{scheme.name.replace('-', '_')}", columns, rows)
        self.write_summary(
            "ber_summary",
            {
                "noise_density": self.template.noise_density,
                "carrier_leak": self.template.carrier_leak,
                "link_gain": self.template.link_gain,
                "threshold_dBm": {
                    name: threshold_crossing(points) for name, points in self.points_by_scheme.items()
                },
            },
        )


class ProtocolPipeline(Pipeline):
    name = "protocol"
    short_description = "Multi-tag time-division readout session"
    columns = ("slot_duration_s", "mean_rate_Hz", "mean_loss", "collisions")

    def tags(self, n):
        tags = [t.descriptor for t in self.config.tags]
        uid = max(t.uid for t in tags)
        while len(tags) < n:
            uid += 1
            tags.append(replace(tags[-1], uid=uid))
        return tags[:n]

    def prepare(self):
        # the same frame serves every swept tag count
        self.frame = self.config.frame

    def session(self, point, seed):
        se = self.config.section("session")
        n = int(point.get("n_tags", len(self.config.tags)))
        result = run_session(
            self.tags(n),
            self.frame,
            point.get("link_ber", se["link_ber"]),
            se["duration"],
            seed,
            [tuple(o) for o in se["outages"]],
        )
        return self.frame, result

    def evaluate(self, point, seed):
        cfg, result = self.session(point, seed)
        return [cfg.slot_duration, result.mean_rate, result.mean_loss, result.collisions]

    def run(self):
        if self.config.sweeps:
            return super().run()
        cfg, result = self.session({}, np.random.SeedSequence([self.config.seed, 0]))
        paths = result.export(self.out_dir, "session", self.header)
        self.report.paths.extend(paths)
        self.report.rows = sum(len(r) for r in result.series.values())
        logger.info("session: %d tags at %.3f Hz mean, slot %.4f s", len(result.series), result.mean_rate,
                    cfg.slot_duration)


PIPELINES = {
    cls.name: cls
    for cls in (FieldMapPipeline, ImpedancePipeline, PowerPipeline, BERPipeline, ProtocolPipeline)
}


def get_pipeline(name):
    try:
        return PIPELINES[name]()
    except KeyError:
        raise MeanderNFCError(f"unknown pipeline {name!r}") from None
