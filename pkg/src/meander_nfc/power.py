# meander_nfc/power.py
"""
Wireless power transfer from a garment reader coil to a sensor tag.

Efficiencies are AC-to-AC: power dissipated in the tag load over real power
delivered into the reader terminals. An optional rectifier factor scales the
output for system studies.
"""
import logging
import math
from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np

from . import geometry, magnetics
from .circuit import InductiveLink, ReaderCircuit, SensorCircuit, impedance, q_factor
from .conf import setting
from .exceptions import DegenerateImpedance, InvalidSpec

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PowerLink:
    reader: ReaderCircuit
    sensor: SensorCircuit
    link: InductiveLink
    P_in: float = 0.1

    def __post_init__(self):
        if self.P_in < 0:
            raise InvalidSpec("P_in must be >= 0")
        expected = self.link.k * math.sqrt(self.reader.L * self.sensor.L_s)
        if not math.isclose(self.link.M, expected, rel_tol=1e-9, abs_tol=1e-30):
            raise InvalidSpec("link M is inconsistent with k and the circuit inductances")

    @classmethod
    def from_k(cls, reader, sensor, k, P_in=0.1, f=None):
        return cls(reader, sensor, InductiveLink.from_k(k, reader.L, sensor.L_s, f), P_in)

    @property
    def f(self):
        return self.link.f

    @property
    def figure_of_merit(self):
        """k^2 Q_r Q_s"""
        return self.link.k**2 * q_factor(self.reader, self.f) * q_factor(self.sensor, self.f)


@dataclass(frozen=True)
class PowerResult:
    P_out: float
    efficiency: float
    k: float = 0.0
    outage: bool = False


def _sensor_coil_impedance(link):
    # tag coil and its tuning capacitor, without the load
    return impedance(link.sensor.switched("shorted"), link.f)


def optimal_load(link):
    """R_s sqrt(1 + k^2 Q_r Q_s), with the reactance that cancels the tag's own."""
    r_opt = link.sensor.R_s * math.sqrt(1.0 + link.figure_of_merit)
    return complex(r_opt, -_sensor_coil_impedance(link).imag)


def max_efficiency(figure_of_merit):
    x = figure_of_merit
    return x / (1.0 + math.sqrt(1.0 + x)) ** 2


def _mesh_currents(link, z_load, extra_loads=0):
    w = 2 * np.pi * link.f
    zm = 1j * w * link.link.M
    z_tag = _sensor_coil_impedance(link) + z_load
    n = 1 + extra_loads
    z = np.zeros((n + 1, n + 1), dtype=complex)
    z[0, 0] = impedance(link.reader, link.f)
    for i in range(1, n + 1):
        z[i, i] = z_tag
        z[0, i] = z[i, 0] = zm
    v = np.zeros(n + 1, dtype=complex)
    v[0] = 1.0
    return np.linalg.solve(z, v)


def transfer_efficiency(link, z_load):
    """Exact two-mesh solve: P_load / P_in."""
    if z_load == 0:
        raise DegenerateImpedance("load impedance is zero")
    i1, i2 = _mesh_currents(link, z_load)
    p_in = 0.5 * (1.0 * np.conj(i1)).real
    if p_in <= 0:
        return 0.0
    p_load = 0.5 * abs(i2) ** 2 * z_load.real
    return float(p_load / p_in)


def output_power(link, z_load, rectifier_efficiency=None):
    rect = setting("RECTIFIER_EFFICIENCY") if rectifier_efficiency is None else rectifier_efficiency
    eff = transfer_efficiency(link, z_load) * rect
    return PowerResult(P_out=eff * link.P_in, efficiency=eff, k=link.link.k)


def per_tag_power(link, z_load, n_tags):
    """Load power of each of ``n_tags`` identical, mutually uncoupled tags."""
    currents = _mesh_currents(link, z_load, extra_loads=n_tags - 1)
    p_in = 0.5 * np.conj(currents[0]).real
    p_tag = 0.5 * abs(currents[1]) ** 2 * z_load.real
    return link.P_in * p_tag / p_in * setting("RECTIFIER_EFFICIENCY")


def max_powered_tags(link, z_load=None, threshold=None, limit=100):
    """Largest tag count whose per-tag output stays at or above ``threshold`` watts."""
    threshold = setting("LED_THRESHOLD_W") if threshold is None else threshold
    z_load = optimal_load(link) if z_load is None else z_load
    count = 0
    for n in range(1, limit + 1):
        if per_tag_power(link, z_load, n) < threshold:
            break
        count = n
    return count


@dataclass(frozen=True)
class LinkTemplate:
    """
    Geometry plus circuits for sweeps that recompute k from the coil shapes.

    ``tag_path`` is centered on the z axis with its lowest turn at z = 0.
    ``center`` is the (x, y) reference pose on the reader panel; ``height``
    is measured from the reader conductor surface to the lowest tag turn.
    """

    reader_path: geometry.CoilPath
    tag_path: geometry.CoilPath
    reader: ReaderCircuit
    sensor: SensorCircuit
    center: tuple
    height: float = 5e-3
    P_in: float = 0.1
    max_seg_len: float = None

    @property
    def _seg(self):
        return self.max_seg_len or setting("MAX_SEGMENT_LENGTH")

    @cached_property
    def reader_filaments(self):
        return geometry.discretize(self.reader_path, self._seg)

    @cached_property
    def reader_self_L(self):
        return magnetics.self_inductance(self.reader_filaments)

    @cached_property
    def tag_self_L(self):
        return magnetics.self_inductance(geometry.discretize(self.tag_path, self._seg))

    def tag_pose(self, offset=0.0, height=None):
        height = self.height if height is None else height
        z = self.reader_path.wire_radius + height
        cx, cy = self.center
        return geometry.Placement((cx + offset, cy, z))

    def coupling(self, offset=0.0, height=None, reader_filaments=None, reader_L=None):
        reader_filaments = self.reader_filaments if reader_filaments is None else reader_filaments
        reader_L = self.reader_self_L if reader_L is None else reader_L
        tag = geometry.discretize(geometry.place(self.tag_path, self.tag_pose(offset, height)), self._seg)
        m = magnetics.mutual_inductance(reader_filaments, tag)
        return m / math.sqrt(reader_L * self.tag_self_L)

    def link(self, k, reader=None):
        return PowerLink.from_k(reader or self.reader, self.sensor, k, self.P_in)

    @cached_property
    def reference_link(self):
        return self.link(self.coupling())

    @cached_property
    def reference_load(self):
        return optimal_load(self.reference_link)


def _result(template, k, reader=None):
    return output_power(template.link(k, reader), template.reference_load)


def sweep_misalignment(template, offsets):
    """Lateral offsets (m) across the runs; load fixed at the centered optimum."""
    return [_result(template, template.coupling(offset=float(x))) for x in offsets]


def sweep_distance(template, heights):
    return [_result(template, template.coupling(height=float(h))) for h in heights]


def motion_power_profile(template, motions, P_in=None):
    """
    One PowerResult per motion. The reader is deformed, its inductance
    rescaled with the geometry, and the load kept at the standing optimum.
    Coil-contact poses report an outage with zero output.
    """
    if P_in is not None:
        template = replace(template, P_in=P_in)
    results = []
    for motion in motions:
        if motion.coil_contact:
            logger.info("motion %r shorts the reader halves, reporting outage", motion.name or motion.mode.value)
            results.append(PowerResult(0.0, 0.0, 0.0, outage=True))
            continue
        if motion.amplitude == 0:
            results.append(_result(template, template.reference_link.link.k))
            continue
        path = geometry.deform(template.reader_path, motion)
        filaments = geometry.discretize(path, template._seg)
        L_geom = magnetics.self_inductance(filaments)
        k = template.coupling(reader_filaments=filaments, reader_L=L_geom)
        reader = replace(template.reader, L=template.reader.L * L_geom / template.reader_self_L)
        results.append(_result(template, k, reader))
    return results
