# meander_nfc/circuit.py
"""
Lumped reader and sensor resonators, reflected impedance and the bridge.

Impedances are complex ohms. Frequency arguments may be scalars or numpy
arrays; every function broadcasts.
"""
import logging
import math
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np
from scipy.optimize import brentq

from .conf import setting
from .exceptions import CalibrationFailure, DegenerateImpedance, InvalidSpec
from .export import write_csv

logger = logging.getLogger(__name__)


def _omega(f):
    f = np.asarray(f, dtype=float)
    if np.any(f <= 0):
        raise InvalidSpec("frequency must be positive")
    return 2 * np.pi * f


def _scalar(value):
    return complex(value) if np.ndim(value) == 0 else value


@dataclass(frozen=True)
class ReaderCircuit:
    R: float
    L: float
    n_caps: int = 1
    C_each: float = 1e-9
    parasitic_C: float = 0.0

    def __post_init__(self):
        if self.R <= 0 or self.L <= 0 or self.C_each <= 0:
            raise InvalidSpec("reader R, L and C_each must be positive")
        if int(self.n_caps) != self.n_caps or self.n_caps < 1:
            raise InvalidSpec("n_caps must be a positive integer")
        if self.parasitic_C < 0:
            raise InvalidSpec("parasitic_C must be >= 0")

    @classmethod
    def tuned(cls, R, L, n_caps, f0=None, parasitic_C=0.0):
        """Reader whose distributed capacitors resonate ``L`` at ``f0``."""
        f0 = setting("CARRIER_HZ") if f0 is None else f0
        return cls(R, L, n_caps, tune_distributed_caps(R, L, f0, n_caps), parasitic_C)

    @property
    def C_series(self):
        return self.C_each / self.n_caps


class ModState(str, Enum):
    OPEN = "open"
    SHORTED = "shorted"


@dataclass(frozen=True)
class SensorCircuit:
    """
    Tag resonator. ``load`` is the IC/rectifier surrogate in series with the
    coil; load modulation shorts it.
    """

    R_s: float
    L_s: float
    C_s: float
    load: complex = 70.0
    mod_state: ModState = ModState.OPEN

    def __post_init__(self):
        if self.R_s <= 0 or self.L_s <= 0 or self.C_s <= 0:
            raise InvalidSpec("sensor R_s, L_s and C_s must be positive")
        object.__setattr__(self, "mod_state", ModState(self.mod_state))

    @classmethod
    def from_q(cls, L_s, Q_s, f0=None, load=70.0):
        f0 = setting("CARRIER_HZ") if f0 is None else f0
        w0 = 2 * np.pi * f0
        return cls(R_s=w0 * L_s / Q_s, L_s=L_s, C_s=1 / (w0**2 * L_s), load=load)

    @property
    def R(self):
        return self.R_s

    @property
    def L(self):
        return self.L_s

    @property
    def C_series(self):
        return self.C_s

    @property
    def Q_s(self):
        return q_factor(self, resonant_frequency(self))

    def switched(self, state):
        return replace(self, mod_state=ModState(state))


@dataclass(frozen=True)
class InductiveLink:
    M: float
    k: float
    f: float

    def __post_init__(self):
        if abs(self.k) > 1 + 1e-9:
            raise InvalidSpec(f"|k| must not exceed 1, got {self.k}")

    @classmethod
    def from_k(cls, k, L_reader, L_sensor, f=None):
        f = setting("CARRIER_HZ") if f is None else f
        return cls(M=k * math.sqrt(L_reader * L_sensor), k=k, f=f)


@dataclass(frozen=True)
class BridgeConfig:
    R_amp: float = None
    V_in: float = None

    def __post_init__(self):
        if self.R_amp is None:
            object.__setattr__(self, "R_amp", setting("R_AMP"))
        if self.V_in is None:
            object.__setattr__(self, "V_in", setting("V_IN"))
        if self.R_amp <= 0 or self.V_in <= 0:
            raise InvalidSpec("R_amp and V_in must be positive")


def resonant_frequency(c):
    return 1.0 / (2 * np.pi * math.sqrt(c.L * c.C_series))


def impedance(c, f):
    """Terminal impedance of a reader or sensor resonator at ``f``."""
    w = _omega(f)
    if isinstance(c, SensorCircuit):
        z = c.R_s + 1j * w * c.L_s + 1 / (1j * w * c.C_s)
        if c.mod_state is ModState.OPEN:
            z = z + c.load
        return _scalar(z)
    z = c.R + 1j * w * c.L + c.n_caps / (1j * w * c.C_each)
    if c.parasitic_C:
        z = 1 / (1 / z + 1j * w * c.parasitic_C)
    return _scalar(z)


def q_factor(c, f):
    return 2 * np.pi * f * c.L / c.R


def tune_distributed_caps(R, L, f0, n_caps):
    """Per-capacitor value so ``n_caps`` equal series capacitors resonate ``L`` at ``f0``."""
    if int(n_caps) != n_caps or n_caps < 1:
        raise InvalidSpec("n_caps must be >= 1")
    return n_caps / ((2 * np.pi * f0) ** 2 * L)


def reflected_impedance(link, z_sensor):
    """(2 pi f M)^2 / Z_sensor"""
    if z_sensor == 0:
        raise DegenerateImpedance("sensor impedance is zero")
    return (2 * np.pi * link.f * link.M) ** 2 / z_sensor


def input_impedance(z_reader, dz):
    return z_reader + dz


def mesh_input_impedance(z_reader, f, sensors, mutuals, tag_mutuals=None):
    """
    Reader input impedance from the full mesh equations.

    ``mutuals`` are reader-to-tag mutual inductances; ``tag_mutuals`` is an
    optional symmetric tag-to-tag matrix.
    """
    w = 2 * np.pi * f
    n = len(sensors)
    z = np.zeros((n + 1, n + 1), dtype=complex)
    z[0, 0] = z_reader
    for i, (sensor, m) in enumerate(zip(sensors, mutuals), start=1):
        z[i, i] = impedance(sensor, f)
        z[0, i] = z[i, 0] = 1j * w * m
    if tag_mutuals is not None:
        tm = np.asarray(tag_mutuals, dtype=float)
        for i in range(n):
            for j in range(n):
                if i != j:
                    z[i + 1, j + 1] = 1j * w * tm[i, j]
    v = np.zeros(n + 1, dtype=complex)
    v[0] = 1.0
    currents = np.linalg.solve(z, v)
    if currents[0] == 0:
        raise DegenerateImpedance("reader mesh current is zero")
    return complex(1.0 / currents[0])


def loaded_input_impedance(z_reader, f, sensors, mutuals, tag_mutuals=None):
    """
    Reader impedance with several tags present.

    Reflected impedances add while the tags are mutually uncoupled; if any
    tag pair has k above 0.01 the mesh equations are solved instead.
    """
    if tag_mutuals is not None and len(sensors) > 1:
        tm = np.abs(np.asarray(tag_mutuals, dtype=float))
        ls = np.array([s.L_s for s in sensors])
        k_tt = tm / np.sqrt(np.outer(ls, ls))
        np.fill_diagonal(k_tt, 0.0)
        if k_tt.max() > 0.01:
            logger.debug("tag-tag coupling %.3g exceeds 0.01, solving mesh equations", k_tt.max())
            return mesh_input_impedance(z_reader, f, sensors, mutuals, tag_mutuals)
    dz = sum(
        reflected_impedance(InductiveLink(m, 0.0, f), impedance(s, f))
        for s, m in zip(sensors, mutuals)
    )
    return input_impedance(z_reader, dz)


@dataclass(frozen=True, eq=False)
class DifferenceRatio:
    freqs: np.ndarray
    ratio: np.ndarray
    band: tuple

    @property
    def width(self):
        return self.band[1] - self.band[0]

    def covers(self, lo, hi):
        return self.width > 0 and self.band[0] <= lo and self.band[1] >= hi


def impedance_difference_ratio(z1, z2, freqs, threshold=None):
    """
    |z1 - z2| / |z1| over ``freqs`` and the widest contiguous band below
    ``threshold``. An empty band is returned as (0.0, 0.0).
    """
    threshold = setting("BALANCE_THRESHOLD") if threshold is None else threshold
    freqs = np.asarray(freqs, dtype=float)
    z1 = np.asarray(z1, dtype=complex)
    z2 = np.asarray(z2, dtype=complex)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.abs(z1 - z2) / np.abs(z1)
    ok = np.concatenate([[False], ratio < threshold, [False]])
    edges = np.flatnonzero(np.diff(ok.astype(int)))
    starts, stops = edges[::2], edges[1::2] - 1
    if len(starts) == 0:
        return DifferenceRatio(freqs, ratio, (0.0, 0.0))
    widths = freqs[stops] - freqs[starts]
    best = int(np.argmax(widths))
    return DifferenceRatio(freqs, ratio, (float(freqs[starts[best]]), float(freqs[stops[best]])))


def calibrate_stray_capacitance(reader, target_band=0.2e6, freqs=None, threshold=None):
    """
    Shunt capacitance that makes the coil-vs-ideal-RLC balanced band
    ``target_band`` wide.
    """
    if freqs is None:
        freqs = np.linspace(11e6, 15e6, 4001)
    ideal = impedance(replace(reader, parasitic_C=0.0), freqs)
    threshold = setting("BALANCE_THRESHOLD") if threshold is None else threshold

    def band_error(cp):
        z = impedance(replace(reader, parasitic_C=cp), freqs)
        return impedance_difference_ratio(z, ideal, freqs, threshold).width - target_band

    w0 = 2 * np.pi * resonant_frequency(reader)
    hi = threshold / (w0 * reader.R)
    lo = hi * 1e-6
    if band_error(lo) < 0 or band_error(hi) > 0:
        raise CalibrationFailure(f"no shunt capacitance gives a {target_band:.3g} Hz band")
    cp = brentq(band_error, lo, hi, xtol=1e-18)
    logger.debug("stray capacitance %.4g F gives band error %.3g Hz", cp, band_error(cp))
    return replace(reader, parasitic_C=cp)


def bridge_output(cfg, z_in_1, z_in_2):
    """-R_amp (V_in / Z_in_1 - V_in / Z_in_2)"""
    if z_in_1 == 0 or z_in_2 == 0:
        raise DegenerateImpedance("bridge branch impedance is zero")
    if z_in_1 == z_in_2:
        return 0j
    return complex(-cfg.R_amp * (cfg.V_in / z_in_1 - cfg.V_in / z_in_2))


def bridge_first_order(cfg, z, dz):
    """Linearized output for a tag adding ``dz`` to branch 1 of a balanced bridge."""
    if z == 0:
        raise DegenerateImpedance("bridge branch impedance is zero")
    return complex(cfg.R_amp * cfg.V_in * dz / z**2)


def impedance_curve(c, freqs):
    return np.asarray(impedance(c, np.asarray(freqs, dtype=float)), dtype=complex)


def export_impedance_curve(path, freqs, z, header=None):
    rows = ((f, v.real, v.imag) for f, v in zip(freqs, np.asarray(z, dtype=complex)))
    return write_csv(path, ["f_Hz", "Re", "Im"], rows, header)
