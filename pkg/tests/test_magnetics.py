"""Tests for Neumann inductances, coupling and Biot-Savart field maps."""

import math

import numpy as np
import pytest
from scipy.constants import mu_0

from meander_nfc.exceptions import OverlapError
from meander_nfc.geometry import (
    CoilPath,
    MeanderSpec,
    Placement,
    discretize,
    make_circular_coil,
    make_helical_body_coil,
    make_meander,
    place,
)
from meander_nfc.magnetics import (
    GridSpec,
    circular_loop_self_inductance,
    coaxial_loop_mutual_inductance,
    coupling_coefficient,
    depth_decay_ratio,
    field_at,
    field_map,
    link_matrix,
    mutual_inductance,
    self_inductance,
)


def _loop(radius, wire_radius, points_per_turn, z=0.0):
    theta = np.linspace(0.0, 2 * np.pi, points_per_turn, endpoint=False)
    points = np.column_stack([radius * np.cos(theta), radius * np.sin(theta), np.full_like(theta, z)])
    return CoilPath(points, closed=True, wire_radius=wire_radius)


def _one_segment_per_edge(path):
    return discretize(path, max_seg_len=10.0)


@pytest.mark.parametrize("separation", [0.005, 0.01, 0.02, 0.05])
def test_coaxial_loops_match_maxwell(separation):
    a = _one_segment_per_edge(make_circular_coil(0.03, 1, wire_radius=1e-4, points_per_turn=256))
    b = _one_segment_per_edge(
        place(make_circular_coil(0.03, 1, wire_radius=1e-4, points_per_turn=256), Placement((0, 0, separation)))
    )

    expected = coaxial_loop_mutual_inductance(0.015, 0.015, separation)
    assert mutual_inductance(a, b) == pytest.approx(expected, rel=0.01)


def test_mutual_inductance_is_symmetric():
    reader = discretize(make_meander(MeanderSpec(0.2, 0.2, n_runs=4)), 0.01)
    tag = discretize(place(make_circular_coil(0.03, 2), Placement((0.06, 0.1, 0.01))), 0.002)

    assert mutual_inductance(reader, tag) == mutual_inductance(tag, reader)


def test_far_coils_do_not_couple():
    a = discretize(make_circular_coil(0.03, 1), 0.002)
    b = discretize(place(make_circular_coil(0.03, 1), Placement((10.0, 0, 0))), 0.002)

    assert abs(mutual_inductance(a, b)) < 1e-12


def test_overlapping_coils_are_rejected():
    a = discretize(make_circular_coil(0.03, 1), 0.002)
    b = discretize(place(make_circular_coil(0.03, 1), Placement((0, 0, 1e-4))), 0.002)

    with pytest.raises(OverlapError):
        mutual_inductance(a, b)


def test_loop_self_inductance_matches_textbook():
    loop = _one_segment_per_edge(_loop(0.02, 5e-4, 64))

    assert self_inductance(loop) == pytest.approx(circular_loop_self_inductance(0.02, 5e-4), rel=0.05)


def test_self_inductance_converges_under_refinement():
    values = [self_inductance(_one_segment_per_edge(_loop(0.02, 2e-4, n))) for n in (16, 32, 64, 128)]
    diffs = np.abs(np.diff(values))

    assert all(v > 0 for v in values)
    assert diffs[0] > diffs[1] > diffs[2]


def test_self_inductance_scales_with_size():
    small = make_meander(MeanderSpec(0.2, 0.3, wire_spacing=0.04, wire_radius=0.005, n_runs=4))
    large = make_meander(MeanderSpec(0.4, 0.6, wire_spacing=0.08, wire_radius=0.01, n_runs=4))

    ratio = self_inductance(discretize(large, 0.01)) / self_inductance(discretize(small, 0.005))
    assert ratio == pytest.approx(2.0, rel=1e-9)


def test_orthogonal_loop_does_not_couple_to_straight_wire():
    wire = discretize(CoilPath([[-0.5, 0, 0], [0.5, 0, 0]], wire_radius=2e-4), 0.01)
    loop = discretize(place(make_circular_coil(0.04, 1), Placement.about_axis((0, 1, 0), math.pi / 2)), 0.002)

    assert abs(coupling_coefficient(wire, loop)) < 1e-6


def test_nearly_coincident_loops_couple_strongly():
    m = coaxial_loop_mutual_inductance(0.02, 0.02, 2e-6)
    l = circular_loop_self_inductance(0.02, 1e-6)

    assert 0.9 < m / l < 1.0


def test_tag_over_meander_coupling_band():
    spec = MeanderSpec(0.4, 0.4, wire_spacing=0.04, wire_radius=0.005, n_runs=10)
    reader = discretize(make_meander(spec), 0.01)
    pose = Placement((4.5 * spec.wire_spacing, spec.panel_height / 2, spec.wire_radius + 0.005))
    tag = discretize(place(make_circular_coil(0.03, 6), pose), 0.002)

    k = coupling_coefficient(reader, tag)
    assert 0.02 <= abs(k) <= 0.08


def test_link_matrix_is_passive():
    a = discretize(make_circular_coil(0.03, 2), 0.002)
    b = discretize(place(make_circular_coil(0.03, 2), Placement((0.005, 0, 0.01))), 0.002)
    links = link_matrix([a, b])

    det = np.linalg.det(links.inductance_matrix)
    assert det >= -1e-15
    assert links.is_passive()
    assert abs(links.k[0, 1]) < 1


def test_long_wire_field_matches_infinite_wire():
    wire = discretize(CoilPath([[-5, 0, 0], [5, 0, 0]], wire_radius=1e-3), 0.05)
    b = field_at(wire, [[0.0, 0.01, 0.0]], current=1.0)[0]

    assert np.linalg.norm(b) == pytest.approx(mu_0 / (2 * math.pi * 0.01), rel=0.01)
    assert abs(b[0]) < 1e-12


def test_field_map_zero_current():
    coil = discretize(make_circular_coil(0.03, 1), 0.002)
    grid = GridSpec((-0.01, -0.01, 0.02), shape=(5, 5), spacing=0.005)

    assert np.all(field_map(coil, 0.0, grid).values == 0)


def test_field_map_is_linear_in_current():
    coil = discretize(make_circular_coil(0.03, 1), 0.002)
    grid = GridSpec((-0.01, -0.01, 0.02), shape=(5, 5), spacing=0.005)

    np.testing.assert_allclose(field_map(coil, 2.0, grid).values, 2 * field_map(coil, 1.0, grid).values, rtol=1e-12)


def test_field_map_superposition():
    a = discretize(make_circular_coil(0.03, 1), 0.002)
    b = discretize(place(make_circular_coil(0.03, 1), Placement((0.05, 0, 0))), 0.002)
    grid = GridSpec((-0.02, -0.02, 0.01), shape=(9, 5), spacing=0.01)

    joint = field_map(a.merge(b), 1.0, grid).values
    separate = field_map(a, 1.0, grid).values + field_map(b, 1.0, grid).values
    scale = np.nanmax(np.abs(joint))
    np.testing.assert_allclose(joint, separate, rtol=0, atol=1e-12 * scale)


def test_field_map_masks_points_inside_the_wire():
    wire = discretize(CoilPath([[-0.1, 0, 0], [0.1, 0, 0]], wire_radius=0.005), 0.01)
    grid = GridSpec((0.0, -0.002, 0.0), v_axis=(0.0, 1.0, 0.0), u_axis=(0.0, 0.0, 1.0), shape=(1, 3), spacing=0.01)
    result = field_map(wire, 1.0, grid)

    assert result.mask[0, 0]
    assert np.all(np.isnan(result.values[0, 0]))
    assert not result.mask[0, 1]


def test_field_map_export(tmp_path):
    coil = discretize(make_circular_coil(0.03, 1), 0.002)
    grid = GridSpec((-0.01, -0.01, 0.02), shape=(3, 4), spacing=0.01)
    path = field_map(coil, 1.0, grid).export(tmp_path / "field.csv", {"config_hash": "abc"})

    lines = path.read_text().splitlines()
    assert lines[0] == "# config_hash: abc"
    assert "x,y,z,Bx,By,Bz,B_abs" in lines
    assert len([l for l in lines if not l.startswith("#")]) == 1 + 12
    assert (tmp_path / "field.csv.json").exists()


def test_meander_confines_field_better_than_helix():
    spec = MeanderSpec(0.3, 0.5, wire_spacing=0.04, wire_radius=0.005, n_runs=6)
    meander = discretize(make_meander(spec), 0.01)
    helix_path = make_helical_body_coil(0.8, 4, pitch=0.1)
    helix = discretize(helix_path, 0.01)
    assert helix.total_length == pytest.approx(meander.total_length, rel=0.01)

    xs = (np.arange(spec.n_runs - 1) + 0.5) * spec.wire_spacing
    m_probes = np.column_stack([xs, np.full_like(xs, 0.25), np.zeros_like(xs)])
    m_normals = np.tile([0.0, 0.0, -1.0], (len(xs), 1))

    radius = 0.8 / (2 * math.pi)
    phi = np.linspace(0, 2 * np.pi, 8, endpoint=False) + np.pi / 8
    radial = np.column_stack([np.cos(phi), np.sin(phi), np.zeros_like(phi)])
    h_probes = radius * radial + [0.0, 0.0, 0.2]

    meander_ratio = depth_decay_ratio(meander, m_probes, m_normals)
    helix_ratio = depth_decay_ratio(helix, h_probes, -radial)
    assert meander_ratio < helix_ratio
