# meander_nfc/geometry.py
"""
Coil centerlines and their straight-filament discretization.

Coordinates are in meters. A reader panel lies in the z = 0 plane with its
runs parallel to y; +z points away from the body.
"""
import json
import logging
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.spatial.transform import Rotation

from .conf import setting
from .exceptions import InvalidSpec

logger = logging.getLogger(__name__)

MIN_POINT_SEPARATION = 1e-9
DEFAULT_WIRE_RADIUS = 5e-3  # half of the ~1 cm knitted conductor width
POINTS_PER_TURN = 64


@dataclass(frozen=True, eq=False)
class CoilPath:
    points: np.ndarray
    closed: bool = False
    wire_radius: float = DEFAULT_WIRE_RADIUS

    def __post_init__(self):
        points = np.array(self.points, dtype=float)
        if points.ndim != 2 or points.shape[1] != 3 or len(points) < 2:
            raise InvalidSpec("CoilPath needs at least 2 three-dimensional points")
        if not np.all(np.isfinite(points)):
            raise InvalidSpec("CoilPath points must be finite")
        if not self.wire_radius > 0:
            raise InvalidSpec(f"wire_radius must be positive, got {self.wire_radius!r}")
        steps = np.linalg.norm(np.diff(points, axis=0), axis=1)
        if np.any(steps <= MIN_POINT_SEPARATION):
            raise InvalidSpec("consecutive CoilPath points must be distinct")
        if self.closed and np.linalg.norm(points[0] - points[-1]) <= MIN_POINT_SEPARATION:
            raise InvalidSpec("closed CoilPath must not repeat its first point")
        points.setflags(write=False)
        object.__setattr__(self, "points", points)

    def edges(self):
        """(start, end) arrays of every straight edge, closing edge included."""
        starts = self.points
        ends = np.roll(self.points, -1, axis=0)
        if not self.closed:
            starts, ends = starts[:-1], ends[:-1]
        return starts, ends

    @property
    def length(self):
        starts, ends = self.edges()
        return float(math.fsum(np.linalg.norm(ends - starts, axis=1)))

    @property
    def centroid(self):
        return self.points.mean(axis=0)

    def translated(self, offset):
        return CoilPath(self.points + np.asarray(offset, dtype=float), self.closed, self.wire_radius)

    def to_dict(self):
        return {
            "points": self.points.tolist(),
            "closed": bool(self.closed),
            "wire_radius": float(self.wire_radius),
        }

    @classmethod
    def from_dict(cls, data):
        try:
            return cls(data["points"], bool(data.get("closed", False)), float(data["wire_radius"]))
        except KeyError as e:
            raise InvalidSpec(f"CoilPath JSON is missing {e.args[0]!r}")

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class MeanderSpec:
    panel_width: float
    panel_height: float
    wire_spacing: float = 0.04
    wire_radius: float = DEFAULT_WIRE_RADIUS
    n_runs: int = 2

    def validate(self):
        if self.panel_width <= 0 or self.panel_height <= 0:
            raise InvalidSpec("panel dimensions must be positive")
        if int(self.n_runs) != self.n_runs or self.n_runs < 2:
            raise InvalidSpec(f"n_runs must be an integer >= 2, got {self.n_runs!r}")
        if self.wire_radius <= 0:
            raise InvalidSpec("wire_radius must be positive")
        if self.wire_spacing <= 2 * self.wire_radius:
            raise InvalidSpec(
                f"wire_spacing {self.wire_spacing} must exceed twice the wire radius {self.wire_radius}"
            )
        span = (self.n_runs - 1) * self.wire_spacing
        if span > self.panel_width * (1 + 1e-12):
            raise InvalidSpec(
                f"{self.n_runs} runs at {self.wire_spacing} m spacing need {span:.4f} m "
                f"but the panel is {self.panel_width} m wide"
            )

    @property
    def run_span(self):
        """Distance between the first and last run."""
        return (self.n_runs - 1) * self.wire_spacing

    @property
    def wire_length(self):
        return self.n_runs * self.panel_height + self.run_span


@dataclass(frozen=True)
class TwinMeanderSpec:
    half: MeanderSpec
    separation: float = 0.05

    def validate(self):
        self.half.validate()
        if self.separation < 0:
            raise InvalidSpec("separation must be >= 0")


@dataclass(frozen=True, eq=False)
class Placement:
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))

    def __post_init__(self):
        t = np.array(self.translation, dtype=float).reshape(3)
        r = np.array(self.rotation, dtype=float).reshape(3, 3)
        if not np.allclose(r @ r.T, np.eye(3), rtol=0, atol=1e-9):
            raise InvalidSpec("Placement rotation must be orthonormal")
        object.__setattr__(self, "translation", t)
        object.__setattr__(self, "rotation", r)

    @classmethod
    def about_axis(cls, axis, angle, translation=(0.0, 0.0, 0.0)):
        axis = np.asarray(axis, dtype=float)
        axis = axis / np.linalg.norm(axis)
        return cls(np.asarray(translation, dtype=float), Rotation.from_rotvec(axis * angle).as_matrix())

    @property
    def is_identity(self):
        return not np.any(self.translation) and np.array_equal(self.rotation, np.eye(3))

    def compose(self, other):
        """Placement equal to applying ``other`` first, then ``self``."""
        return Placement(
            self.rotation @ other.translation + self.translation,
            self.rotation @ other.rotation,
        )


class MotionMode(str, Enum):
    STRETCH = "stretch"
    BEND = "bend"
    RANDOM_SMOOTH = "random-smooth"


@dataclass(frozen=True)
class MotionPerturbation:
    """
    Parametric garment deformation.

    ``amplitude`` is a strain for stretch, a bend angle in radians per
    ``spatial_wavelength`` of arc for bend, and a displacement in meters for
    random-smooth. ``coil_contact`` marks poses where the two reader halves
    touch (e.g. sitting with legs crossed).
    """

    mode: MotionMode = MotionMode.STRETCH
    amplitude: float = 0.0
    spatial_wavelength: float = 0.1
    seed: int = 0
    name: str = ""
    coil_contact: bool = False

    def __post_init__(self):
        object.__setattr__(self, "mode", MotionMode(self.mode))
        if self.amplitude < 0:
            raise InvalidSpec("motion amplitude must be >= 0")
        if self.spatial_wavelength <= 0:
            raise InvalidSpec("spatial_wavelength must be positive")


@dataclass(frozen=True, eq=False)
class FilamentSet:
    starts: np.ndarray
    ends: np.ndarray
    wire_radius: float

    def __post_init__(self):
        starts = np.array(self.starts, dtype=float).reshape(-1, 3)
        ends = np.array(self.ends, dtype=float).reshape(-1, 3)
        if starts.shape != ends.shape or len(starts) == 0:
            raise InvalidSpec("FilamentSet needs matching, non-empty start and end arrays")
        if np.any(np.linalg.norm(ends - starts, axis=1) <= 0):
            raise InvalidSpec("every filament segment must have positive length")
        if not self.wire_radius > 0:
            raise InvalidSpec("wire_radius must be positive")
        object.__setattr__(self, "starts", starts)
        object.__setattr__(self, "ends", ends)

    def __len__(self):
        return len(self.starts)

    @property
    def vectors(self):
        return self.ends - self.starts

    @property
    def lengths(self):
        return np.linalg.norm(self.vectors, axis=1)

    @property
    def midpoints(self):
        return 0.5 * (self.starts + self.ends)

    @property
    def total_length(self):
        return float(math.fsum(self.lengths))

    @property
    def segments(self):
        return list(zip(self.starts, self.ends))

    def merge(self, other):
        """Both sets driven by the same current; wire radius of ``self`` is kept."""
        return FilamentSet(
            np.vstack([self.starts, other.starts]),
            np.vstack([self.ends, other.ends]),
            self.wire_radius,
        )


def make_meander(spec):
    """Serpentine path of ``n_runs`` parallel runs alternating direction."""
    spec.validate()
    h = spec.panel_height
    points = []
    for i in range(spec.n_runs):
        x = i * spec.wire_spacing
        if i % 2 == 0:
            points.extend([(x, 0.0, 0.0), (x, h, 0.0)])
        else:
            points.extend([(x, h, 0.0), (x, 0.0, 0.0)])
    return CoilPath(np.array(points), closed=False, wire_radius=spec.wire_radius)


def make_twin_meander(spec):
    spec.validate()
    first = make_meander(spec.half)
    shift = spec.half.panel_width + spec.separation
    return first, first.translated((shift, 0.0, 0.0))


def _helix(radius, turns, pitch, wire_radius, points_per_turn):
    if int(turns) != turns or turns < 1:
        raise InvalidSpec(f"turns must be an integer >= 1, got {turns!r}")
    if points_per_turn < 64:
        raise InvalidSpec("at least 64 points per turn are required")
    if not wire_radius > 0 or 2 * radius <= 2 * wire_radius:
        raise InvalidSpec("coil diameter must exceed twice the wire radius")
    if turns == 1:
        theta = np.linspace(0.0, 2 * np.pi, points_per_turn, endpoint=False)
        points = np.column_stack([radius * np.cos(theta), radius * np.sin(theta), np.zeros_like(theta)])
        return CoilPath(points, closed=True, wire_radius=wire_radius)
    if pitch <= 2 * wire_radius:
        raise InvalidSpec("pitch must exceed twice the wire radius for stacked turns")
    n = int(turns) * points_per_turn
    theta = np.linspace(0.0, 2 * np.pi * turns, n + 1)
    points = np.column_stack(
        [radius * np.cos(theta), radius * np.sin(theta), pitch * theta / (2 * np.pi)]
    )
    return CoilPath(points, closed=False, wire_radius=wire_radius)


def make_circular_coil(diameter, turns, pitch=1e-3, wire_radius=2e-4, points_per_turn=POINTS_PER_TURN):
    """Tag coil: ``turns`` loops stacked along +z, centered on the z axis."""
    return _helix(diameter / 2, turns, pitch, wire_radius, points_per_turn)


def make_helical_body_coil(circumference, turns, pitch=0.1, wire_radius=DEFAULT_WIRE_RADIUS,
                           points_per_turn=128):
    """Body-scale helix around the torso axis (z), radius C / 2 pi."""
    return _helix(circumference / (2 * np.pi), turns, pitch, wire_radius, points_per_turn)


def place(path, placement):
    if placement.is_identity:
        return path
    points = path.points @ placement.rotation.T + placement.translation
    return CoilPath(points, path.closed, path.wire_radius)


def wrap_on_cylinder(path, radius, axis_x=0.0):
    """
    Wrap a planar panel around a vertical cylinder (the torso).

    x is taken as arc length measured from ``axis_x``; the panel bulges
    toward -z so z stays the outward normal at ``axis_x``.
    """
    if radius <= 0:
        raise InvalidSpec("wrap radius must be positive")
    p = path.points
    phi = (p[:, 0] - axis_x) / radius
    r = radius + p[:, 2]
    points = np.column_stack([axis_x + r * np.sin(phi), p[:, 1], r * np.cos(phi) - radius])
    return CoilPath(points, path.closed, path.wire_radius)


def _bend(points, p):
    # cylindrical bend about an axis parallel to y; arc length along x kept
    radius = p.spatial_wavelength / p.amplitude
    x0 = points[:, 0].mean()
    phi = (points[:, 0] - x0) / radius
    r = radius - points[:, 2]
    return np.column_stack([x0 + r * np.sin(phi), points[:, 1], radius - r * np.cos(phi)])


def _random_smooth(points, p):
    rng = np.random.default_rng(p.seed)
    k = 2 * np.pi / p.spatial_wavelength
    displaced = points.copy()
    n_modes = 4
    for axis in range(3):
        field = np.zeros(len(points))
        for _ in range(n_modes):
            direction = rng.normal(size=2)
            direction /= np.linalg.norm(direction)
            phase = rng.uniform(0, 2 * np.pi)
            field += np.sin(k * (points[:, 0] * direction[0] + points[:, 1] * direction[1]) + phase)
        scale = 1.0 if axis == 2 else 0.25
        displaced[:, axis] += p.amplitude * scale * field / np.sqrt(n_modes)
    return displaced


def deform(path, p):
    """Apply a motion perturbation; deterministic for a fixed seed."""
    if p.amplitude == 0:
        return path
    points = path.points
    if p.mode is MotionMode.STRETCH:
        c = points.mean(axis=0)
        scale = np.array([1.0 + p.amplitude, 1.0 + p.amplitude, 1.0])
        points = c + (points - c) * scale
    elif p.mode is MotionMode.BEND:
        points = _bend(points, p)
    else:
        points = _random_smooth(points, p)
    return CoilPath(points, path.closed, path.wire_radius)


def discretize(path, max_seg_len=None):
    """Split every edge into equal pieces no longer than ``max_seg_len``."""
    if max_seg_len is None:
        max_seg_len = setting("MAX_SEGMENT_LENGTH")
    if max_seg_len <= 0:
        raise InvalidSpec("max_seg_len must be positive")
    starts, ends = path.edges()
    lengths = np.linalg.norm(ends - starts, axis=1)
    counts = np.maximum(1, np.ceil(lengths / max_seg_len - 1e-9).astype(int))
    seg_starts, seg_ends = [], []
    for a, b, n in zip(starts, ends, counts):
        t = np.linspace(0.0, 1.0, n + 1)[:, None]
        nodes = a + (b - a) * t
        nodes[-1] = b
        seg_starts.append(nodes[:-1])
        seg_ends.append(nodes[1:])
    return FilamentSet(np.vstack(seg_starts), np.vstack(seg_ends), path.wire_radius)


def default_segment_length(spec):
    """min(wire_spacing / 4, MAX_SEGMENT_LENGTH)"""
    return min(spec.wire_spacing / 4, setting("MAX_SEGMENT_LENGTH"))
