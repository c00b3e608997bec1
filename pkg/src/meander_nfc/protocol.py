# meander_nfc/protocol.py
"""
Framed slotted Aloha inventory and time-division readout of sensor tags.

Each round has ``slots_per_round`` slots; every tag answers in one slot
drawn uniformly at random. Only singleton slots deliver data.
"""
import logging
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .exceptions import InvalidSpec, RankDeficient
from .export import write_csv, write_json

logger = logging.getLogger(__name__)


class SensorKind(str, Enum):
    TEMPERATURE = "temperature"
    BEND = "bend"
    GENERIC = "generic"


@dataclass(frozen=True)
class LinearCalibration:
    """physical = ratio * slope + intercept"""

    slope: float
    intercept: float
    residuals: tuple = ()

    def __post_init__(self):
        if not math.isfinite(self.slope) or self.slope == 0 or not math.isfinite(self.intercept):
            raise InvalidSpec("calibration slope must be finite and non-zero")


@dataclass(frozen=True)
class TagDescriptor:
    uid: int
    sensor_kind: SensorKind = SensorKind.GENERIC
    calibration: LinearCalibration = LinearCalibration(1.0, 0.0)
    position: object = None
    ratio_baseline: float = 0.0
    ratio_noise: float = 0.0

    def __post_init__(self):
        if not 0 <= self.uid < 2**64:
            raise InvalidSpec(f"uid must be a 64-bit identifier, got {self.uid!r}")
        if self.ratio_noise < 0:
            raise InvalidSpec("ratio_noise must be >= 0")
        object.__setattr__(self, "sensor_kind", SensorKind(self.sensor_kind))


@dataclass(frozen=True)
class FrameConfig:
    slots_per_round: int = 4
    slot_duration: float = 0.07
    per_read_payload: int = 64
    bitrate: int = 106  # kbps

    def __post_init__(self):
        if int(self.slots_per_round) != self.slots_per_round or self.slots_per_round < 1:
            raise InvalidSpec("slots_per_round must be a positive integer")
        if self.per_read_payload <= 0 or self.bitrate <= 0:
            raise InvalidSpec("payload and bitrate must be positive")
        if self.slot_duration < self.airtime:
            raise InvalidSpec(
                f"slot_duration {self.slot_duration} s is shorter than the payload airtime {self.airtime:.3g} s"
            )

    @property
    def airtime(self):
        return self.per_read_payload / (self.bitrate * 1e3)

    @property
    def round_duration(self):
        return self.slots_per_round * self.slot_duration


def _check_unique(tags):
    uids = [t.uid for t in tags]
    if len(set(uids)) != len(uids):
        raise InvalidSpec("tag uids must be unique")


def inventory_round(n_tags, cfg, seed=None):
    """(singletons, collisions, empties) for one round."""
    if n_tags < 0:
        raise InvalidSpec("n_tags must be >= 0")
    rng = np.random.default_rng(seed)
    counts = np.bincount(rng.integers(0, cfg.slots_per_round, size=n_tags), minlength=cfg.slots_per_round)
    return int(np.sum(counts == 1)), int(np.sum(counts > 1)), int(np.sum(counts == 0))


@dataclass(frozen=True, eq=False)
class RoundStats:
    singletons: np.ndarray
    collisions: np.ndarray
    empties: np.ndarray

    @property
    def rounds(self):
        return len(self.singletons)


def simulate_rounds(n_tags, cfg, n_rounds, seed=None):
    """Vectorized ``inventory_round`` repeated ``n_rounds`` times."""
    rng = np.random.default_rng(seed)
    slots = cfg.slots_per_round
    picks = rng.integers(0, slots, size=(n_rounds, n_tags))
    flat = picks + slots * np.arange(n_rounds)[:, None]
    counts = np.bincount(flat.ravel(), minlength=n_rounds * slots).reshape(n_rounds, slots)
    return RoundStats((counts == 1).sum(axis=1), (counts > 1).sum(axis=1), (counts == 0).sum(axis=1))


def expected_throughput(G):
    """Slotted Aloha successes per slot, G e^-G."""
    if np.any(np.asarray(G) < 0):
        raise InvalidSpec("offered load must be >= 0")
    return G * np.exp(-G)


def simulate_throughput(G, n_slots=100_000, seed=None):
    """Fraction of slots with exactly one of Poisson(G) transmissions."""
    rng = np.random.default_rng(seed)
    return float(np.mean(rng.poisson(G, size=n_slots) == 1))


def decode_sensor(value, cal):
    return value * cal.slope + cal.intercept


def fit_calibration(points):
    """Ordinary least-squares line through (ratio, physical) pairs."""
    data = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(data) < 2:
        raise RankDeficient("at least two calibration points are required")
    a = np.column_stack([data[:, 0], np.ones(len(data))])
    if np.linalg.matrix_rank(a) < 2:
        raise RankDeficient("calibration ratios are all equal")
    (slope, intercept), *_ = np.linalg.lstsq(a, data[:, 1], rcond=None)
    residuals = data[:, 1] - (slope * data[:, 0] + intercept)
    return LinearCalibration(float(slope), float(intercept), tuple(float(r) for r in residuals))


def calibrate_frame_timing(n_tags, target_rate, slots_per_round=4, per_read_payload=64, bitrate=106):
    """
    Slot duration giving each of ``n_tags`` an expected ``target_rate`` (Hz)
    of successful reads.
    """
    if n_tags < 1 or target_rate <= 0:
        raise InvalidSpec("n_tags and target_rate must be positive")
    p_single = (1 - 1 / slots_per_round) ** (n_tags - 1)
    slot = p_single / (target_rate * slots_per_round)
    return FrameConfig(slots_per_round, slot, per_read_payload, bitrate)


class ReadStatus(str, Enum):
    OK = "ok"
    LOST = "lost"


@dataclass(frozen=True)
class Reading:
    t: float
    value: float
    status: ReadStatus


@dataclass
class SessionResult:
    duration: float
    rounds: int
    series: dict = field(default_factory=dict)  # uid -> list[Reading]
    collisions: int = 0

    def ok_count(self, uid):
        return sum(1 for r in self.series[uid] if r.status is ReadStatus.OK)

    def achieved_rate(self, uid):
        return self.ok_count(uid) / self.duration

    def loss_fraction(self, uid):
        readings = self.series[uid]
        return 1 - self.ok_count(uid) / len(readings) if readings else 1.0

    @property
    def mean_rate(self):
        return float(np.mean([self.achieved_rate(uid) for uid in self.series])) if self.series else 0.0

    @property
    def mean_loss(self):
        return float(np.mean([self.loss_fraction(uid) for uid in self.series])) if self.series else 1.0

    def summary(self):
        return {
            "duration_s": self.duration,
            "rounds": self.rounds,
            "collisions": self.collisions,
            "tags": {
                f"{uid:016x}": {
                    "achieved_rate_hz": self.achieved_rate(uid),
                    "loss_fraction": self.loss_fraction(uid),
                    "reads": len(readings),
                }
                for uid, readings in self.series.items()
            },
        }

    def export(self, out_dir, prefix="session", header=None):
        """One CSV per tag plus a JSON summary; returns the written paths."""
        paths = []
        for uid, readings in self.series.items():
            rows = ((r.t, r.value, r.status.value) for r in readings)
            paths.append(write_csv(f"{out_dir}/{prefix}_{uid:016x}.csv", ["t_s", "value", "status"], rows, header))
        paths.append(write_json(f"{out_dir}/{prefix}_summary.json", self.summary()))
        return paths


def _in_outage(t, outages):
    return any(start <= t < end for start, end in outages)


def run_session(tags, cfg, link_ber, duration, seed=None, outages=()):
    """
    Back-to-back inventory rounds for ``duration`` seconds.

    ``link_ber`` is a per-tag bit error rate (or one value for all). A
    singleton read survives with probability (1 - BER)^payload; reads
    completing inside an ``outages`` interval are lost.
    """
    _check_unique(tags)
    if duration <= 0:
        raise InvalidSpec("duration must be positive")
    bers = np.broadcast_to(np.asarray(link_ber, dtype=float), (len(tags),))
    if np.any((bers < 0) | (bers > 0.5)):
        raise InvalidSpec("per-tag BER must lie in [0, 0.5]")
    rng = np.random.default_rng(seed)
    n_rounds = int(math.floor(duration / cfg.round_duration + 1e-9))
    p_ok = (1 - bers) ** cfg.per_read_payload
    result = SessionResult(duration, n_rounds, {t.uid: [] for t in tags})
    for r in range(n_rounds):
        start = r * cfg.round_duration
        slots = rng.integers(0, cfg.slots_per_round, size=len(tags))
        counts = np.bincount(slots, minlength=cfg.slots_per_round)
        result.collisions += int(np.sum(counts > 1))
        survive = rng.random(len(tags)) < p_ok
        noise = rng.standard_normal(len(tags))
        for i, tag in enumerate(tags):
            t = start + (slots[i] + 1) * cfg.slot_duration
            ok = counts[slots[i]] == 1 and survive[i] and not _in_outage(t, outages)
            if ok:
                ratio = tag.ratio_baseline + tag.ratio_noise * noise[i]
                reading = Reading(t, float(decode_sensor(ratio, tag.calibration)), ReadStatus.OK)
            else:
                reading = Reading(t, float("nan"), ReadStatus.LOST)
            result.series[tag.uid].append(reading)
    logger.debug("session: %d rounds, %d collisions, mean rate %.3f Hz", n_rounds, result.collisions, result.mean_rate)
    return result
