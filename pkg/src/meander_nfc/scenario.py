# meander_nfc/scenario.py
"""
Declarative experiment layer.

A scenario is a JSON document. ``load_scenario`` merges it over
``DEFAULTS``, builds every domain object it names and reports all problems
at once, keyed by field path (``tags[1].placement.rotation``).
"""
import copy
import hashlib
import json
import logging
import math
import numbers
from bisect import bisect_left
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import brentq

from . import geometry, magnetics
from .circuit import ReaderCircuit, q_factor
from .conf import setting
from .exceptions import (
    CalibrationFailure,
    MeanderNFCError,
    ScenarioParseError,
    ScenarioValidationError,
)
from .phy import ModulationScheme, ReceiverConfig
from .protocol import (
    FrameConfig,
    LinearCalibration,
    SensorKind,
    TagDescriptor,
    calibrate_frame_timing,
    fit_calibration,
)

logger = logging.getLogger(__name__)

PIPELINES = ("field-map", "impedance", "power", "ber", "protocol")
READER_KINDS = ("meander", "twin-meander", "helical", "path")
SWEEP_VARIABLES = {
    "field-map": (),
    "impedance": ("mismatch",),
    "power": ("offset", "height", "P_in", "motion"),
    "ber": ("P_in_dBm",),
    "protocol": ("n_tags", "link_ber"),
}

DEFAULTS = {
    "name": "scenario",
    "pipeline": "impedance",
    "reader": {
        "kind": "meander",
        "panel_width": 0.3,
        "panel_height": 0.5,
        "wire_spacing": 0.04,
        "wire_radius": 0.005,
        "n_runs": 6,
        "separation": 0.05,
        "circumference": 0.8,
        "turns": 4,
        "pitch": 0.1,
        "wrap_radius": None,
        "max_seg_len": None,
    },
    "reader_circuit": {"R": 18.0, "L": 2.2e-6, "n_caps": 4, "C_each": None, "parasitic_C": 0.0},
    "tag_defaults": {
        "sensor_kind": "generic",
        "diameter": 0.03,
        "turns": 6,
        "pitch": 1e-3,
        "wire_radius": 2e-4,
        "L": 3.0e-6,
        "Q": 34.0,
        "load": 70.0,
        "placement": None,
        "calibration": {"slope": 1.0, "intercept": 0.0},
        "ratio_baseline": 0.0,
        "ratio_noise": 0.0,
    },
    "tags": [],
    "impedance": {"f_start": 11e6, "f_stop": 15e6, "n_points": 801, "mismatch": 0.005, "target_band": 0.2e6},
    "power": {"P_in": 0.1, "height": 0.005, "center": None, "motions": []},
    "channel": {
        "schemes": ["bpsk-212"],
        "delta_z": 1.0,
        "mismatch": 0.005,
        "single_coil": False,
        "shift_db": 13.0,
        "p_ref_dbm": -10.0,
        "margin_db": None,
        "bits_per_point": None,
        "frame_bits": 2000,
    },
    "receiver": {},
    "frame": {
        "slots_per_round": 4,
        "slot_duration": None,
        "target_rate": 1.5,
        "calibrate_for": 4,
        "per_read_payload": 64,
        "bitrate": 106,
    },
    "session": {"duration": 60.0, "link_ber": 0.0, "outages": []},
    "field_map": {
        "origin": None,
        "u_axis": [1.0, 0.0, 0.0],
        "v_axis": [0.0, 0.0, -1.0],
        "shape": [41, 11],
        "spacing": 0.0075,
        "current": 1.0,
        "depths": [0.01, 0.05],
    },
    "sweeps": [],
    "output": {"dir": "out", "format": None},
}


def _merge(base, override):
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def canonical_json(data):
    return json.dumps(data, sort_keys=True, separators=(",", ":"), allow_nan=False)


def canonical_hash(data):
    """sha256 of the sorted-key compact serialization."""
    if isinstance(data, ScenarioConfig):
        data = data.data
    return hashlib.sha256(canonical_json(data).encode()).hexdigest()


@dataclass(frozen=True)
class Sweep:
    variable: str
    values: tuple

    def __len__(self):
        return len(self.values)


def sweep_grid(start, stop, step):
    """Inclusive grid; n = round((stop - start) / step) + 1."""
    n = int(round((stop - start) / step)) + 1
    return tuple(float(start + i * step) for i in range(n))


@dataclass(frozen=True, eq=False)
class TagSpec:
    descriptor: TagDescriptor
    coil: geometry.CoilPath  # at the origin, lowest turn at z = 0
    path: geometry.CoilPath  # placed
    L: float
    Q: float
    load: float


@dataclass(eq=False)
class ScenarioConfig:
    data: dict
    source: Path = None
    reader_paths: list = field(default_factory=list)
    reader_spec: object = None
    reader_circuit: ReaderCircuit = None
    tags: list = field(default_factory=list)
    receiver: ReceiverConfig = None
    schemes: list = field(default_factory=list)
    motions: list = field(default_factory=list)
    sweeps: list = field(default_factory=list)
    field_grid: magnetics.GridSpec = None
    frame: FrameConfig = None

    @property
    def name(self):
        return self.data["name"]

    @property
    def seed(self):
        return self.data["seed"]

    @property
    def pipeline(self):
        return self.data["pipeline"]

    @property
    def hash(self):
        return canonical_hash(self.data)

    def section(self, name):
        return self.data[name]

    @property
    def max_seg_len(self):
        explicit = self.data["reader"]["max_seg_len"]
        if explicit:
            return explicit
        spacing = self.data["reader"]["wire_spacing"]
        return min(spacing / 4, setting("MAX_SEGMENT_LENGTH"))

    @property
    def row_count(self):
        return math.prod(len(s) for s in self.sweeps) if self.sweeps else None


class _Collector:
    def __init__(self):
        self.errors = defaultdict(list)

    def add(self, path, message):
        self.errors[path].append(str(message))

    def build(self, path, fn, *args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (MeanderNFCError, ValueError, TypeError, KeyError) as e:
            self.add(path, e.args[0] if isinstance(e, KeyError) else e)
            return None

    def number(self, section, key, positive=False, minimum=None, integer=False, optional=False):
        value = section
        for part in key.split("."):
            value = value.get(part) if isinstance(value, dict) else None
        return self.value(key, value, positive, minimum, integer, optional)

    def value(self, path, value, positive=False, minimum=None, integer=False, optional=False):
        if value is None:
            if not optional:
                self.add(path, "This field is required.")
            return None
        if isinstance(value, bool) or not isinstance(value, numbers.Real):
            self.add(path, f"Expected a number, got {value!r}.")
            return None
        if not math.isfinite(value):
            self.add(path, "Must be finite.")
        elif integer and int(value) != value:
            self.add(path, f"Expected an integer, got {value!r}.")
        elif positive and value <= 0:
            self.add(path, "Must be positive.")
        elif minimum is not None and value < minimum:
            self.add(path, f"Must be >= {minimum}.")
        else:
            return int(value) if integer else float(value)
        return None


def _reader(c, data, base_dir):
    r = data["reader"]
    kind = r.get("kind")
    if kind not in READER_KINDS:
        c.add("reader.kind", f"Unknown reader kind {kind!r}; expected one of {', '.join(READER_KINDS)}.")
        return None, []
    if kind == "path":
        return _reader_from_file(c, r, base_dir)
    num = {k: c.number(data, f"reader.{k}", positive=True, optional=True)
           for k in ("panel_width", "panel_height", "wire_spacing", "wire_radius", "circumference", "pitch")}
    n_runs = c.number(data, "reader.n_runs", integer=True, minimum=2)
    wrap = c.number(data, "reader.wrap_radius", positive=True, optional=True)
    if kind == "helical":
        turns = c.number(data, "reader.turns", integer=True, minimum=1)
        if None in (num["circumference"], num["pitch"], num["wire_radius"], turns):
            return None, []
        path = c.build("reader", geometry.make_helical_body_coil, num["circumference"], turns, num["pitch"], num["wire_radius"])
        return None, [path] if path else []
    if None in (num["panel_width"], num["panel_height"], num["wire_spacing"], num["wire_radius"], n_runs):
        return None, []
    half = geometry.MeanderSpec(num["panel_width"], num["panel_height"], num["wire_spacing"], num["wire_radius"], n_runs)
    if kind == "meander":
        path = c.build("reader", geometry.make_meander, half)
        paths = [path] if path else []
        spec = half
    else:
        separation = c.number(data, "reader.separation", minimum=0.0)
        if separation is None:
            return None, []
        spec = geometry.TwinMeanderSpec(half, separation)
        pair = c.build("reader", geometry.make_twin_meander, spec)
        paths = list(pair) if pair else []
    if wrap and paths:
        paths = [c.build("reader.wrap_radius", geometry.wrap_on_cylinder, p, wrap) for p in paths]
        paths = [p for p in paths if p is not None]
    return spec, paths


def _reader_from_file(c, r, base_dir):
    coil = r.get("coil")
    if coil is None and r.get("file"):
        file = Path(r["file"])
        if not file.is_absolute() and base_dir is not None:
            file = base_dir / file
        try:
            coil = json.loads(file.read_text())
        except (OSError, json.JSONDecodeError) as e:
            c.add("reader.file", f"Cannot read coil file: {e}")
            return None, []
    if coil is None:
        c.add("reader.coil", "A path reader needs an inline 'coil' or a 'file'.")
        return None, []
    path = c.build("reader.coil", geometry.CoilPath.from_dict, coil)
    return None, [path] if path else []


def _placement(c, path, value):
    if value is None:
        return geometry.Placement()
    if not isinstance(value, dict):
        c.add(path, "Expected an object with translation and rotation or axis/angle.")
        return None
    translation = value.get("translation", [0.0, 0.0, 0.0])
    if "axis" in value:
        angle = c.value(f"{path}.angle", value.get("angle", 0.0))
        if angle is None:
            return None
        return c.build(path, geometry.Placement.about_axis, value["axis"], angle, translation)
    return c.build(path, geometry.Placement, translation, value.get("rotation", np.eye(3).tolist()))


def _calibration(c, path, value):
    if isinstance(value, dict) and "points" in value:
        return c.build(path, fit_calibration, value["points"])
    if not isinstance(value, dict):
        c.add(path, "Expected {slope, intercept} or {points}.")
        return None
    slope = c.value(f"{path}.slope", value.get("slope", 1.0))
    intercept = c.value(f"{path}.intercept", value.get("intercept", 0.0))
    if None in (slope, intercept):
        return None
    return c.build(path, LinearCalibration, slope, intercept)


def _uid(value):
    if isinstance(value, str):
        return int(value, 16)
    if isinstance(value, bool) or not isinstance(value, int):
        raise TypeError(f"uid must be an integer or hex string, got {value!r}")
    return value


def _tags(c, data):
    tags = data["tags"]
    if not isinstance(tags, list):
        c.add("tags", "Expected a list.")
        return []
    built, seen = [], set()
    for i, raw in enumerate(tags):
        p = f"tags[{i}]"
        if not isinstance(raw, dict):
            c.add(p, "Expected an object.")
            continue
        t = _merge(data["tag_defaults"], raw)
        tags[i] = t
        if "uid" not in raw:
            c.add(f"{p}.uid", "This field is required.")
            continue
        uid = c.build(f"{p}.uid", _uid, raw["uid"])
        if uid is not None and uid in seen:
            c.add(f"{p}.uid", f"Duplicate uid {uid:#x}.")
        seen.add(uid)
        diameter = c.value(f"{p}.diameter", t["diameter"], positive=True)
        turns = c.value(f"{p}.turns", t["turns"], integer=True, minimum=1)
        pitch = c.value(f"{p}.pitch", t["pitch"], positive=True)
        radius = c.value(f"{p}.wire_radius", t["wire_radius"], positive=True)
        L = c.value(f"{p}.L", t["L"], positive=True)
        Q = c.value(f"{p}.Q", t["Q"], positive=True)
        load = c.value(f"{p}.load", t["load"], minimum=0.0)
        baseline = c.value(f"{p}.ratio_baseline", t["ratio_baseline"])
        noise = c.value(f"{p}.ratio_noise", t["ratio_noise"], minimum=0.0)
        placement = _placement(c, f"{p}.placement", t["placement"])
        calibration = _calibration(c, f"{p}.calibration", t["calibration"])
        kind = c.build(f"{p}.sensor_kind", SensorKind, t["sensor_kind"])
        if None in (uid, diameter, turns, pitch, radius, L, Q, load, baseline, noise, placement, calibration, kind):
            continue
        path = c.build(p, geometry.make_circular_coil, diameter, turns, pitch, radius)
        descriptor = c.build(p, TagDescriptor, uid, kind, calibration, placement, baseline, noise)
        if path is not None and descriptor is not None:
            built.append(TagSpec(descriptor, path, geometry.place(path, placement), L, Q, load))
    return built


def _sweeps(c, data):
    pipeline = data["pipeline"]
    allowed = SWEEP_VARIABLES.get(pipeline, ())
    sweeps = []
    if not isinstance(data["sweeps"], list):
        c.add("sweeps", "Expected a list.")
        return sweeps
    for i, s in enumerate(data["sweeps"]):
        p = f"sweeps[{i}]"
        if not isinstance(s, dict):
            c.add(p, "Expected an object.")
            continue
        variable = s.get("variable")
        if variable not in allowed:
            c.add(f"{p}.variable", f"{variable!r} cannot be swept in the {pipeline!r} pipeline.")
            continue
        if variable == "motion":
            sweeps.append(Sweep("motion", tuple(range(len(data["power"]["motions"])))))
            if not data["power"]["motions"]:
                c.add(p, "A motion sweep needs power.motions.")
            continue
        if "values" in s:
            values = s["values"]
            if not isinstance(values, list) or not values:
                c.add(f"{p}.values", "Expected a non-empty list.")
                continue
            sweeps.append(Sweep(variable, tuple(values)))
            continue
        start = c.value(f"{p}.start", s.get("start"))
        stop = c.value(f"{p}.stop", s.get("stop"))
        step = c.value(f"{p}.step", s.get("step"), positive=True)
        if None in (start, stop, step):
            continue
        if stop < start:
            c.add(p, "Sweep range is empty (stop < start).")
            continue
        sweeps.append(Sweep(variable, sweep_grid(start, stop, step)))
    return sweeps


def _motions(c, data):
    motions = []
    for i, m in enumerate(data["power"]["motions"]):
        if not isinstance(m, dict):
            c.add(f"power.motions[{i}]", "Expected an object.")
            continue
        if "seed" not in m:
            c.add(f"power.motions[{i}].seed", "This field is required.")
            continue
        motion = c.build(f"power.motions[{i}]", lambda: geometry.MotionPerturbation(**m))
        if motion is not None:
            motions.append(motion)
    return motions


def _is_number(value):
    return isinstance(value, numbers.Real) and not isinstance(value, bool) and math.isfinite(value)


def _frame(c, data):
    """The session frame, calibrated once for ``calibrate_for`` tags when no slot is given."""
    fr = {"frame": data["frame"]}
    slots = c.number(fr, "frame.slots_per_round", integer=True, minimum=1)
    slot = c.number(fr, "frame.slot_duration", positive=True, optional=True)
    rate = c.number(fr, "frame.target_rate", positive=True)
    n_tags = c.number(fr, "frame.calibrate_for", integer=True, minimum=1)
    payload = c.number(fr, "frame.per_read_payload", integer=True, minimum=1)
    bitrate = c.number(fr, "frame.bitrate", positive=True)
    if None in (slots, payload, bitrate):
        return None
    if isinstance(data["frame"], dict) and data["frame"].get("slot_duration") is not None:
        if slot is None:
            return None
        return c.build("frame.slot_duration", FrameConfig, slots, slot, payload, bitrate)
    if None in (rate, n_tags):
        return None
    return c.build("frame.target_rate", calibrate_frame_timing, n_tags, rate, slots, payload, bitrate)


def validate(data, source=None):
    """Build a ScenarioConfig from a parsed document or raise ScenarioValidationError."""
    c = _Collector()
    if not isinstance(data, dict):
        raise ScenarioValidationError({"": ["Scenario must be a JSON object."]})
    if "seed" not in data:
        c.add("seed", "This field is required.")
    unknown = sorted(set(data) - set(DEFAULTS) - {"seed"})
    for key in unknown:
        c.add(key, "Unknown field.")
    data = _merge(DEFAULTS, {k: v for k, v in data.items() if k not in unknown})
    if "seed" in data:
        if isinstance(data["seed"], bool) or not isinstance(data["seed"], int) or data["seed"] < 0:
            c.add("seed", "Seed must be a non-negative integer.")
    if data["pipeline"] not in PIPELINES:
        c.add("pipeline", f"Unknown pipeline {data['pipeline']!r}; expected one of {', '.join(PIPELINES)}.")
    base_dir = Path(source).parent if source else None
    config = ScenarioConfig(data, Path(source) if source else None)
    config.reader_spec, config.reader_paths = _reader(c, data, base_dir)

    rc = data["reader_circuit"]
    scoped = {"reader_circuit": rc}
    R = c.number(scoped, "reader_circuit.R", positive=True)
    L = c.number(scoped, "reader_circuit.L", positive=True)
    n_caps = c.number(scoped, "reader_circuit.n_caps", integer=True, minimum=1)
    parasitic = c.number(scoped, "reader_circuit.parasitic_C", minimum=0.0)
    c_each = c.number(scoped, "reader_circuit.C_each", positive=True, optional=True)
    if None not in (R, L, n_caps, parasitic):
        if c_each is None:
            config.reader_circuit = c.build("reader_circuit", ReaderCircuit.tuned, R, L, n_caps, None, parasitic)
        else:
            config.reader_circuit = c.build("reader_circuit", ReaderCircuit, R, L, n_caps, c_each, parasitic)

    config.tags = _tags(c, data)
    receiver = data["receiver"]
    if isinstance(receiver, dict):
        config.receiver = c.build("receiver", lambda: ReceiverConfig(**receiver))
    else:
        c.add("receiver", "Expected an object.")
    for i, name in enumerate(data["channel"]["schemes"]):
        scheme = c.build(f"channel.schemes[{i}]", ModulationScheme.parse, name)
        if scheme is not None:
            config.schemes.append(scheme)
    if not data["channel"]["schemes"]:
        c.add("channel.schemes", "At least one scheme is required.")
    ch = {"channel": data["channel"]}
    c.number(ch, "channel.delta_z", positive=True)
    c.number(ch, "channel.mismatch", minimum=0.0)
    c.number(ch, "channel.frame_bits", integer=True, minimum=1)
    c.number(ch, "channel.bits_per_point", integer=True, minimum=1, optional=True)

    config.frame = _frame(c, data)
    se = {"session": data["session"]}
    c.number(se, "session.duration", positive=True)
    ber = data["session"]["link_ber"]
    values = ber if isinstance(ber, list) else [ber]
    if not values or not all(_is_number(b) and 0 <= b <= 0.5 for b in values):
        c.add("session.link_ber", "Link BER must lie in [0, 0.5].")
    pw = {"power": data["power"]}
    c.number(pw, "power.P_in", minimum=0.0)
    c.number(pw, "power.height", positive=True)
    config.motions = _motions(c, data)

    im = {"impedance": data["impedance"]}
    f_start = c.number(im, "impedance.f_start", positive=True)
    f_stop = c.number(im, "impedance.f_stop", positive=True)
    c.number(im, "impedance.n_points", integer=True, minimum=2)
    if f_start and f_stop and f_stop <= f_start:
        c.add("impedance.f_stop", "Must exceed f_start.")

    fm = data["field_map"]
    if data["pipeline"] == "field-map":
        config.field_grid = c.build("field_map", _field_grid, fm, config.reader_paths)

    if data["pipeline"] in ("power",) and not config.tags:
        c.add("tags", "The power pipeline needs at least one tag.")
    if data["pipeline"] == "protocol" and not config.tags:
        c.add("tags", "The protocol pipeline needs at least one tag.")

    config.sweeps = _sweeps(c, data)
    fmt = data["output"]["format"]
    if fmt not in (None, "csv", "json"):
        c.add("output.format", "Expected 'csv' or 'json'.")
    if c.errors:
        raise ScenarioValidationError(dict(c.errors))
    return config


def _field_grid(fm, reader_paths):
    origin = fm["origin"]
    if origin is None:
        if not reader_paths:
            raise ValueError("field map needs a reader")
        points = np.vstack([p.points for p in reader_paths])
        lo, hi = points.min(axis=0), points.max(axis=0)
        origin = [lo[0], 0.5 * (lo[1] + hi[1]), 0.0]
    return magnetics.GridSpec(origin, fm["u_axis"], fm["v_axis"], tuple(fm["shape"]), fm["spacing"])


def parse_scenario(text, source=None):
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ScenarioParseError(e.msg, path=str(source) if source else None, line=e.lineno, column=e.colno)
    return validate(data, source)


def load_scenario(path):
    """Parse and validate a scenario file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ScenarioParseError(f"cannot read scenario: {e.strerror}", path=str(path))
    config = parse_scenario(text, path)
    logger.debug("loaded scenario %s (%s)", config.name, config.hash[:12])
    return config


def save_scenario(config, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = config.data if isinstance(config, ScenarioConfig) else config
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
    return path


@dataclass(frozen=True)
class GarmentCalibration:
    spec: geometry.MeanderSpec
    circuit: ReaderCircuit
    target_L: float
    achieved_L: float
    Q: float
    k_reference: float = None
    target_Q: float = None
    target_k: float = None

    @property
    def residual(self):
        return (self.achieved_L - self.target_L) / self.target_L

    def report(self):
        return {
            "n_runs": self.spec.n_runs,
            "panel_width": self.spec.panel_width,
            "panel_height": self.spec.panel_height,
            "wire_spacing": self.spec.wire_spacing,
            "target_L": self.target_L,
            "achieved_L": self.achieved_L,
            "residual": self.residual,
            "R": self.circuit.R,
            "target_Q": self.target_Q,
            "Q": self.Q,
            "C_each": self.circuit.C_each,
            "n_caps": self.circuit.n_caps,
            "target_k": self.target_k,
            "k_reference": self.k_reference,
        }


def reference_tag_center(spec):
    """(x, y) midway between the two central runs of a meander."""
    mid = (spec.n_runs - 1) // 2
    return ((mid + 0.5) * spec.wire_spacing, 0.5 * spec.panel_height)


def calibrate_garment(targets, panel_width=0.5, max_height=1.0, min_height=0.05, wire_spacing=0.04,
                      wire_radius=0.005, n_caps=4, f0=None, max_seg_len=None, reference_tag=None):
    """
    Fit meander run count and panel height to ``targets['L']``; R is taken
    as given. ``Q`` defaults to the one implied by L and R, and
    ``k_at_reference_tag`` is optional; both are reported next to the
    achieved values, not fitted. k is measured for ``reference_tag`` (a
    CoilPath at the origin) 5 mm above the panel between the central runs.
    """
    f0 = setting("CARRIER_HZ") if f0 is None else f0
    seg = max_seg_len or setting("CALIBRATION_SEGMENT_LENGTH")
    target_L = float(targets["L"])
    R = float(targets["R"])
    if target_L <= 0 or R <= 0:
        raise CalibrationFailure("calibration targets must be positive")
    max_runs = int(math.floor(panel_width / wire_spacing + 1e-9)) + 1
    if max_runs < 2:
        raise CalibrationFailure("panel is too narrow for two runs")

    def inductance(n_runs, height):
        spec = geometry.MeanderSpec(panel_width, height, wire_spacing, wire_radius, n_runs)
        L = magnetics.self_inductance(geometry.discretize(geometry.make_meander(spec), seg))
        logger.debug("calibration: n_runs=%d height=%.4f L=%.4g H", n_runs, height, L)
        return L

    run_counts = list(range(2, max_runs + 1))
    tall = [None] * len(run_counts)

    class _ByRuns:
        def __len__(self):
            return len(run_counts)

        def __getitem__(self, i):
            if tall[i] is None:
                tall[i] = inductance(run_counts[i], max_height)
            return tall[i]

    idx = bisect_left(_ByRuns(), target_L)
    if idx == len(run_counts):
        best = tall[-1] if tall[-1] is not None else inductance(run_counts[-1], max_height)
        residual = (best - target_L) / target_L
        if residual < -0.10:
            raise CalibrationFailure(
                f"largest meander reaches {best:.3g} H, target {target_L:.3g} H", residual=residual, best=best
            )
        n_runs, height, achieved = run_counts[-1], max_height, best
    else:
        n_runs = run_counts[idx]
        low = inductance(n_runs, min_height)
        if low > target_L:
            residual = (low - target_L) / target_L
            if residual > 0.10:
                raise CalibrationFailure(
                    f"smallest {n_runs}-run meander is already {low:.3g} H", residual=residual, best=low
                )
            height, achieved = min_height, low
        else:
            height = brentq(lambda h: inductance(n_runs, h) - target_L, min_height, max_height, xtol=1e-7)
            achieved = inductance(n_runs, height)

    spec = geometry.MeanderSpec(panel_width, height, wire_spacing, wire_radius, n_runs)
    circuit = ReaderCircuit.tuned(R, achieved, n_caps, f0)
    k_ref = None
    if reference_tag is not None:
        cx, cy = reference_tag_center(spec)
        placed = geometry.place(reference_tag, geometry.Placement((cx, cy, wire_radius + 5e-3)))
        k_ref = magnetics.coupling_coefficient(
            geometry.discretize(geometry.make_meander(spec), seg), geometry.discretize(placed, seg)
        )
    target_Q = targets.get("Q")
    target_Q = 2 * math.pi * f0 * target_L / R if target_Q is None else float(target_Q)
    target_k = targets.get("k_at_reference_tag")
    target_k = None if target_k is None else float(target_k)
    result = GarmentCalibration(spec, circuit, target_L, achieved, q_factor(circuit, f0), k_ref, target_Q, target_k)
    logger.info(
        "calibrated garment: %d runs, %.3f m tall, L=%.4g H (target %.4g), Q=%.2f (target %.2f)",
        n_runs, height, achieved, target_L, result.Q, target_Q,
    )
    if k_ref is not None:
        logger.info("reference tag k=%.4f (target %s)", k_ref, "none" if target_k is None else f"{target_k:.4f}")
    return result


def run(config, out_dir=None, threads=None, fmt=None):
    """Execute the scenario's pipeline and write its output files."""
    from .pipelines import get_pipeline

    return get_pipeline(config.pipeline)(config, out_dir=out_dir, threads=threads, fmt=fmt)


def reference_scenarios(seed=0):
    """Desk-scale reference experiments, one validated config each."""
    tag = {"uid": 1, "sensor_kind": "temperature", "calibration": {"slope": 100.0, "intercept": 30.0},
           "ratio_noise": 0.001}
    tops = {"kind": "meander", "panel_width": 0.4, "panel_height": 0.4, "n_runs": 10}
    # both session sizes share the 4-tag frame
    frame = {"calibrate_for": 4}
    docs = [
        {"name": "field-meander", "pipeline": "field-map", "reader": tops},
        {"name": "field-twin-meander", "pipeline": "field-map",
         "reader": {"kind": "twin-meander", "panel_width": 0.2, "panel_height": 0.4, "n_runs": 5}},
        {"name": "field-helical", "pipeline": "field-map",
         "reader": {"kind": "helical", "circumference": 0.8, "turns": 4, "pitch": 0.1},
         "field_map": {"origin": [0.0, 0.0, 0.2], "u_axis": [1.0, 0.0, 0.0], "v_axis": [0.0, 1.0, 0.0],
                       "shape": [21, 21], "spacing": 0.0125}},
        {"name": "impedance-tops", "pipeline": "impedance", "reader": tops},
        {"name": "impedance-bottoms", "pipeline": "impedance",
         "reader_circuit": {"R": 23.0, "L": 3.0e-6, "n_caps": 5}},
        {"name": "power-misalignment", "pipeline": "power", "reader": tops, "tags": [tag],
         "power": {"P_in": 0.2}, "sweeps": [{"variable": "offset", "start": -0.03, "stop": 0.03, "step": 0.005}]},
        {"name": "power-distance", "pipeline": "power", "reader": tops, "tags": [tag],
         "power": {"P_in": 0.2}, "sweeps": [{"variable": "height", "values": [0.005, 0.01, 0.02, 0.05, 0.1]}]},
        {"name": "power-motion", "pipeline": "power", "reader": tops, "tags": [tag],
         "power": {"P_in": 0.2, "motions": [
             {"name": "standing", "mode": "stretch", "amplitude": 0.0, "seed": seed},
             {"name": "arm-raise", "mode": "stretch", "amplitude": 0.05, "seed": seed},
             {"name": "torso-bend", "mode": "bend", "amplitude": 0.2, "spatial_wavelength": 0.2, "seed": seed},
             {"name": "walking", "mode": "random-smooth", "amplitude": 0.001, "spatial_wavelength": 0.2,
              "seed": seed},
             {"name": "sitting-legs-crossed", "mode": "stretch", "amplitude": 0.0, "seed": seed,
              "coil_contact": True},
         ]},
         "sweeps": [{"variable": "motion"}]},
        {"name": "ber-twin-bridge", "pipeline": "ber",
         "channel": {"schemes": ["ook-106", "bpsk-212", "bpsk-424", "bpsk-848"]}},
        {"name": "ber-single-coil", "pipeline": "ber",
         "channel": {"schemes": ["bpsk-212"], "single_coil": True}},
        {"name": "session-4-tags", "pipeline": "protocol", "frame": frame,
         "tags": [dict(tag, uid=i + 1) for i in range(4)], "session": {"duration": 120.0}},
        {"name": "session-8-tags", "pipeline": "protocol", "frame": frame,
         "tags": [dict(tag, uid=i + 1) for i in range(8)], "session": {"duration": 120.0}},
    ]
    return [validate(dict(doc, seed=seed)) for doc in docs]
