# meander_nfc/magnetics.py
"""
Magnetoquasistatic inductance and field computations on filament sets.

Mutual inductance between distinct coils is the Neumann double line
integral, evaluated with an analytic inner integral over each straight
segment and Gauss-Legendre quadrature on the outer one. Self inductance uses
the same machinery with the kernel 1/sqrt(r^2 + a^2): the wire carries its
current on the surface, so the centerline couples to a filament one wire
radius away. The segment self term is the exact closed form of that kernel.
"""
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.constants import mu_0
from scipy.special import ellipe, ellipk, ellipkm1, roots_legendre

from .conf import setting
from .exceptions import InvalidSpec, OverlapError
from .export import sidecar_path, write_csv, write_json

logger = logging.getLogger(__name__)

MU0_4PI = mu_0 / (4 * np.pi)
CHUNK_ELEMENTS = 1_000_000

_GL4 = roots_legendre(4)
_GL16 = roots_legendre(16)


def _unit_nodes(rule):
    x, w = rule
    return 0.5 * (x + 1.0), 0.5 * w


GL4_NODES, GL4_WEIGHTS = _unit_nodes(_GL4)
GL16_NODES, GL16_WEIGHTS = _unit_nodes(_GL16)


def _segment_potential(points, starts, ends, lengths, reg2=0.0):
    """
    Integral of 1/|P - r| (or its regularized form) along each segment.

    ``points`` has shape (K, 3) and is paired row-wise with the K segments.
    """
    d_a = np.sqrt(np.sum((points - starts) ** 2, axis=-1) + reg2)
    d_b = np.sqrt(np.sum((points - ends) ** 2, axis=-1) + reg2)
    s = d_a + d_b
    return np.log((s + lengths) / (s - lengths))


def segment_self_term(length, wire_radius):
    """Partial self inductance of a straight round wire (surface current)."""
    x = np.asarray(length, dtype=float) / wire_radius
    return (mu_0 * np.asarray(length) / (2 * np.pi)) * (
        np.arcsinh(x) - np.sqrt(1.0 + 1.0 / x**2) + 1.0 / x
    )


def _graded_rule(lengths, wire_radius):
    """
    Composite 16-point rule on [0, t, 1 - t, 1] per segment.

    Segments that touch or nearly touch vary on the scale of the wire radius
    at their ends, so the end panels shrink to a few radii.
    """
    t = np.minimum(0.25, 4.0 * wire_radius / lengths)[:, None]
    lo = np.hstack([np.zeros_like(t), t, 1.0 - t])
    width = np.hstack([t, 1.0 - 2.0 * t, t])
    nodes = (lo[:, :, None] + width[:, :, None] * GL16_NODES[None, None, :]).reshape(len(t), -1)
    weights = (width[:, :, None] * GL16_WEIGHTS[None, None, :]).reshape(len(t), -1)
    return nodes, weights


def _outer_integral(a, b, rows, cols, nodes, weights, reg2):
    """Quadrature over segments ``a[rows]`` of the potential of ``b[cols]``."""
    k = len(rows)
    nodes = np.broadcast_to(nodes, (k, np.shape(nodes)[-1]))
    weights = np.broadcast_to(weights, nodes.shape)
    q = nodes.shape[1]
    pts = a.starts[rows][:, None, :] + nodes[:, :, None] * a.vectors[rows][:, None, :]
    phi = _segment_potential(
        pts.reshape(k * q, 3),
        np.repeat(b.starts[cols], q, axis=0),
        np.repeat(b.ends[cols], q, axis=0),
        np.repeat(b.lengths[cols], q),
        reg2,
    ).reshape(k, q)
    return np.sum(phi * weights, axis=1)


def _directed_sum(a, b, wire_radius, regularized, same):
    """Sum over ordered pairs (i in a, j in b) of l_i (u_i . u_j) Phi_j(segment i)."""
    la, lb = a.lengths, b.lengths
    ua = a.vectors / la[:, None]
    ub = b.vectors / lb[:, None]
    mid_a, mid_b = a.midpoints, b.midpoints
    reg2 = wire_radius**2 if regularized else 0.0
    close_limit = setting("CLOSE_PAIR_RADII") * wire_radius
    m = len(b)
    chunk = max(1, CHUNK_ELEMENTS // max(m, 1))
    partials = []
    for lo in range(0, len(a), chunk):
        rows = np.arange(lo, min(lo + chunk, len(a)))
        cos = ua[rows] @ ub.T
        dist = np.linalg.norm(mid_a[rows, None, :] - mid_b[None, :, :], axis=-1)
        gap = dist - 0.5 * (la[rows, None] + lb[None, :])
        d_a = np.sqrt(np.sum((mid_a[rows, None, :] - b.starts[None]) ** 2, axis=-1) + reg2)
        d_b = np.sqrt(np.sum((mid_a[rows, None, :] - b.ends[None]) ** 2, axis=-1) + reg2)
        s = d_a + d_b
        with np.errstate(divide="ignore", invalid="ignore"):
            phi = np.log((s + lb[None, :]) / (s - lb[None, :]))
        near = gap < wire_radius
        # midpoint rule only once the pair is well separated on the segment scale too
        close = (gap < np.maximum(close_limit, la[rows, None] + lb[None, :])) & ~near
        if same:
            diag = rows - lo, rows
            near[diag] = False
            close[diag] = False
        ii, jj = np.nonzero(close)
        if len(ii):
            phi[ii, jj] = _outer_integral(a, b, rows[ii], jj, GL4_NODES, GL4_WEIGHTS, reg2)
        ii, jj = np.nonzero(near)
        if len(ii):
            nodes, weights = _graded_rule(la[rows[ii]], wire_radius)
            phi[ii, jj] = _outer_integral(a, b, rows[ii], jj, nodes, weights, reg2)
        if same:
            phi[rows - lo, rows] = 0.0
        partials.append(np.sum(la[rows, None] * cos * phi))
    return math.fsum(partials)


def _point_segment_distance(points, starts, ends):
    """Distance matrix (P, S) from points to segments."""
    vec = ends - starts
    rel = points[:, None, :] - starts[None, :, :]
    t = np.clip(np.sum(rel * vec[None], axis=-1) / np.sum(vec * vec, axis=-1)[None], 0.0, 1.0)
    foot = starts[None] + t[..., None] * vec[None]
    return np.linalg.norm(points[:, None, :] - foot, axis=-1)


def min_distance(a, b):
    """Smallest sampled distance between two filament sets."""
    best = np.inf
    for x, y in ((a, b), (b, a)):
        probes = np.vstack([x.starts, x.midpoints, x.ends[-1:]])
        chunk = max(1, CHUNK_ELEMENTS // len(y))
        for lo in range(0, len(probes), chunk):
            d = _point_segment_distance(probes[lo:lo + chunk], y.starts, y.ends)
            best = min(best, float(d.min()))
    return best


def mutual_inductance(a, b):
    """Neumann mutual inductance (H) between two non-overlapping filament sets."""
    limit = a.wire_radius + b.wire_radius
    gap = min_distance(a, b)
    if gap <= limit:
        raise OverlapError(f"filament sets come within {gap:.3e} m, below the wire radius sum {limit:.3e} m")
    scale = max(a.wire_radius, b.wire_radius)
    forward = _directed_sum(a, b, scale, regularized=False, same=False)
    backward = _directed_sum(b, a, scale, regularized=False, same=False)
    return MU0_4PI * 0.5 * (forward + backward)


def self_inductance(a):
    """Self inductance (H) of one filament set."""
    diagonal = math.fsum(segment_self_term(a.lengths, a.wire_radius))
    cross = _directed_sum(a, a, a.wire_radius, regularized=True, same=True)
    return diagonal + MU0_4PI * cross


def coupling_coefficient(a, b):
    return mutual_inductance(a, b) / math.sqrt(self_inductance(a) * self_inductance(b))


@dataclass(frozen=True, eq=False)
class LinkMatrix:
    self_L: np.ndarray
    mutual_M: np.ndarray

    @property
    def k(self):
        norm = np.sqrt(np.outer(self.self_L, self.self_L))
        return self.mutual_M / norm

    @property
    def inductance_matrix(self):
        full = np.array(self.mutual_M, dtype=float)
        np.fill_diagonal(full, self.self_L)
        return full

    def is_passive(self, tol=1e-15):
        return bool(np.all(np.linalg.eigvalsh(self.inductance_matrix) >= -tol))


def link_matrix(sets):
    """Self and mutual inductances of every coil in ``sets``."""
    n = len(sets)
    self_L = np.array([self_inductance(s) for s in sets])
    mutual = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            mutual[i, j] = mutual[j, i] = mutual_inductance(sets[i], sets[j])
    return LinkMatrix(self_L, mutual)


def coaxial_loop_mutual_inductance(r1, r2, distance):
    """Maxwell's elliptic-integral mutual inductance of two coaxial circular loops."""
    denom = (r1 + r2) ** 2 + distance**2
    m = 4 * r1 * r2 / denom
    m1 = ((r1 - r2) ** 2 + distance**2) / denom
    k = math.sqrt(m)
    return mu_0 * math.sqrt(r1 * r2) * ((2 / k - k) * ellipkm1(m1) - (2 / k) * ellipe(m))


def circular_loop_self_inductance(radius, wire_radius):
    """mu0 R (ln(8R/a) - 2), thin round wire with surface current."""
    return mu_0 * radius * (math.log(8 * radius / wire_radius) - 2.0)


@dataclass(frozen=True, eq=False)
class GridSpec:
    """Plane of ``shape`` samples spanned by ``u_axis`` and ``v_axis`` from ``origin``."""

    origin: np.ndarray
    u_axis: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0]))
    v_axis: np.ndarray = field(default_factory=lambda: np.array([0.0, 1.0, 0.0]))
    shape: tuple = (21, 21)
    spacing: float = 0.01

    def __post_init__(self):
        u = np.asarray(self.u_axis, dtype=float)
        v = np.asarray(self.v_axis, dtype=float)
        if self.spacing <= 0:
            raise InvalidSpec("grid spacing must be positive")
        if len(self.shape) != 2 or min(self.shape) < 1:
            raise InvalidSpec("grid shape must be two positive counts")
        if not (np.isclose(u @ u, 1) and np.isclose(v @ v, 1) and abs(u @ v) < 1e-9):
            raise InvalidSpec("grid axes must be orthonormal")
        object.__setattr__(self, "origin", np.asarray(self.origin, dtype=float))
        object.__setattr__(self, "u_axis", u)
        object.__setattr__(self, "v_axis", v)
        object.__setattr__(self, "shape", tuple(int(n) for n in self.shape))

    def points(self):
        nu, nv = self.shape
        iu, iv = np.meshgrid(np.arange(nu), np.arange(nv), indexing="ij")
        return (
            self.origin
            + (iu[..., None] * self.spacing) * self.u_axis
            + (iv[..., None] * self.spacing) * self.v_axis
        )


@dataclass(frozen=True, eq=False)
class BFieldGrid:
    grid: GridSpec
    values: np.ndarray  # (nu, nv, 3) tesla, NaN where masked
    mask: np.ndarray  # True where a sample lies inside a wire

    @property
    def magnitude(self):
        return np.linalg.norm(self.values, axis=-1)

    def rows(self):
        pts = self.grid.points().reshape(-1, 3)
        vals = self.values.reshape(-1, 3)
        mag = self.magnitude.reshape(-1)
        for p, b, m in zip(pts, vals, mag):
            yield (*p, *b, m)

    def export(self, path, header=None):
        path = write_csv(path, ["x", "y", "z", "Bx", "By", "Bz", "B_abs"], self.rows(), header)
        g = self.grid
        write_json(
            sidecar_path(path),
            {
                "origin": g.origin,
                "u_axis": g.u_axis,
                "v_axis": g.v_axis,
                "shape": list(g.shape),
                "spacing": g.spacing,
                "masked": int(self.mask.sum()),
                "units": "T",
            },
        )
        return path


def field_at(a, points, current=1.0):
    """Biot-Savart field (T) of ``a`` carrying ``current`` at (P, 3) points."""
    points = np.asarray(points, dtype=float).reshape(-1, 3)
    out = np.zeros_like(points)
    if current == 0:
        return out
    chunk = max(1, CHUNK_ELEMENTS // len(a))
    for lo in range(0, len(points), chunk):
        p = points[lo:lo + chunk, None, :]
        r1 = p - a.starts[None]
        r2 = p - a.ends[None]
        n1 = np.linalg.norm(r1, axis=-1)
        n2 = np.linalg.norm(r2, axis=-1)
        denom = n1 * n2 * (n1 * n2 + np.sum(r1 * r2, axis=-1))
        with np.errstate(divide="ignore", invalid="ignore"):
            factor = np.where(denom > 0, (n1 + n2) / denom, 0.0)
        out[lo:lo + chunk] = np.sum(np.cross(r1, r2) * factor[..., None], axis=1)
    return MU0_4PI * current * out


def field_map(a, current, grid):
    pts = grid.points().reshape(-1, 3)
    inside = np.zeros(len(pts), dtype=bool)
    chunk = max(1, CHUNK_ELEMENTS // len(a))
    for lo in range(0, len(pts), chunk):
        d = _point_segment_distance(pts[lo:lo + chunk], a.starts, a.ends)
        inside[lo:lo + chunk] = d.min(axis=1) < a.wire_radius
    values = field_at(a, pts, current)
    values[inside] = np.nan
    if inside.any():
        logger.debug("field_map masked %d of %d samples", int(inside.sum()), len(pts))
    shape = grid.shape
    return BFieldGrid(grid, values.reshape(*shape, 3), inside.reshape(shape))


def depth_decay_ratio(a, probes, normals, shallow=0.01, deep=0.05, current=1.0):
    """
    mean |B| at ``deep`` over mean |B| at ``shallow``.

    Probes sit on the coil surface; each is pushed along its unit normal by
    the two depths. Smaller means the field is confined closer to the surface.
    """
    probes = np.asarray(probes, dtype=float).reshape(-1, 3)
    normals = np.asarray(normals, dtype=float).reshape(-1, 3)
    normals = normals / np.linalg.norm(normals, axis=1, keepdims=True)
    b_shallow = np.linalg.norm(field_at(a, probes + shallow * normals, current), axis=1)
    b_deep = np.linalg.norm(field_at(a, probes + deep * normals, current), axis=1)
    return float(b_deep.mean() / b_shallow.mean())
