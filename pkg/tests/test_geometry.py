"""Tests for coil paths, placements, deformations and discretization."""

import math

import numpy as np
import pytest

from meander_nfc.exceptions import InvalidSpec
from meander_nfc.geometry import (
    CoilPath,
    FilamentSet,
    MeanderSpec,
    MotionMode,
    MotionPerturbation,
    Placement,
    TwinMeanderSpec,
    deform,
    discretize,
    make_circular_coil,
    make_helical_body_coil,
    make_meander,
    make_twin_meander,
    place,
    wrap_on_cylinder,
)
from meander_nfc.magnetics import min_distance


def _pairwise(points):
    return np.linalg.norm(points[:, None, :] - points[None, :, :], axis=-1)


def test_smallest_meander_is_a_u():
    path = make_meander(MeanderSpec(0.1, 0.1, wire_spacing=0.1, wire_radius=0.005, n_runs=2))

    assert len(path.points) == 4
    assert path.length == pytest.approx(0.3, rel=1e-12)


def test_meander_length_is_runs_plus_connectors():
    spec = MeanderSpec(0.3, 0.5, wire_spacing=0.04, wire_radius=0.005, n_runs=6)
    path = make_meander(spec)

    assert path.length == pytest.approx(6 * 0.5 + 5 * 0.04, rel=1e-12)
    assert spec.wire_length == pytest.approx(path.length)


def test_tops_panel_spacing_builds():
    path = make_meander(MeanderSpec(0.4, 0.4, wire_spacing=0.04, wire_radius=0.005, n_runs=10))

    assert not path.closed
    assert path.wire_radius == 0.005


def test_meander_rejects_runs_that_do_not_fit():
    with pytest.raises(InvalidSpec, match="wide"):
        make_meander(MeanderSpec(0.1, 0.3, wire_spacing=0.04, n_runs=5))


def test_meander_rejects_touching_runs():
    with pytest.raises(InvalidSpec):
        make_meander(MeanderSpec(0.3, 0.3, wire_spacing=0.008, wire_radius=0.005, n_runs=3))


def test_twin_meander_separation():
    half = MeanderSpec(0.2, 0.3, wire_spacing=0.04, n_runs=4)
    a, b = make_twin_meander(TwinMeanderSpec(half, separation=0.05))

    distance = np.linalg.norm(b.centroid - a.centroid)
    assert abs(distance - 0.25) < 1e-12


def test_twin_meander_abutting_halves_do_not_intersect():
    half = MeanderSpec(0.2, 0.3, wire_spacing=0.04, n_runs=4)
    a, b = make_twin_meander(TwinMeanderSpec(half, separation=0.0))

    assert min_distance(discretize(a, 0.05), discretize(b, 0.05)) > 2 * half.wire_radius


def test_twin_meander_halves_are_congruent():
    half = MeanderSpec(0.3, 0.4, wire_spacing=0.04, n_runs=7)
    a, b = make_twin_meander(TwinMeanderSpec(half))

    la = np.sort(discretize(a, 0.01).lengths)
    lb = np.sort(discretize(b, 0.01).lengths)
    np.testing.assert_allclose(la, lb, rtol=1e-12)


def test_tag_coil_length():
    path = make_circular_coil(0.03, 6)

    assert path.length == pytest.approx(6 * math.pi * 0.03, rel=1e-3)


def test_single_turn_coil_is_a_planar_loop():
    path = make_circular_coil(0.04, 1)

    assert path.closed
    assert np.all(path.points[:, 2] == 0)
    assert path.length == pytest.approx(math.pi * 0.04, rel=1e-3)


def test_application_tag_geometry():
    path = make_circular_coil(0.04, 6)
    radii = np.hypot(path.points[:, 0], path.points[:, 1])

    np.testing.assert_allclose(radii, 0.02, rtol=1e-12)
    assert path.points[:, 2].max() == pytest.approx(6 * 1e-3)


def test_circular_coil_rejects_too_few_points_per_turn():
    with pytest.raises(InvalidSpec, match="64"):
        make_circular_coil(0.03, 2, points_per_turn=32)


def test_circular_coil_rejects_fractional_turns():
    with pytest.raises(InvalidSpec):
        make_circular_coil(0.03, 2.5)


def test_helical_body_coil_radius():
    path = make_helical_body_coil(0.9, 4)
    radii = np.hypot(path.points[:, 0], path.points[:, 1])

    np.testing.assert_allclose(radii, 0.9 / (2 * math.pi), rtol=1e-12)
    assert 0.9 / (2 * math.pi) == pytest.approx(0.143, abs=1e-3)


def test_helical_body_coil_single_loop():
    path = make_helical_body_coil(0.9, 1)

    assert path.closed


def test_identity_placement_is_bitwise():
    path = make_circular_coil(0.03, 3)

    assert np.array_equal(place(path, Placement()).points, path.points)


def test_translation_shifts_z():
    path = make_circular_coil(0.03, 3)
    moved = place(path, Placement((0.0, 0.0, 0.01)))

    np.testing.assert_allclose(moved.points[:, 2], path.points[:, 2] + 0.01, rtol=0, atol=1e-15)


def test_rotations_compose():
    path = make_meander(MeanderSpec(0.2, 0.2, n_runs=3))
    quarter = Placement.about_axis((0, 0, 1), math.pi / 2)
    half = Placement.about_axis((0, 0, 1), math.pi)

    twice = place(place(path, quarter), quarter)
    np.testing.assert_allclose(twice.points, place(path, half).points, rtol=0, atol=1e-12)
    np.testing.assert_allclose(quarter.compose(quarter).rotation, half.rotation, atol=1e-12)


def test_rigid_transform_preserves_distances():
    path = make_circular_coil(0.03, 2)
    moved = place(path, Placement.about_axis((1, 2, 3), 0.7, (0.1, -0.2, 0.3)))

    np.testing.assert_allclose(_pairwise(moved.points), _pairwise(path.points), rtol=1e-12, atol=1e-15)


def test_placement_rejects_non_orthonormal_rotation():
    with pytest.raises(InvalidSpec):
        Placement(rotation=np.diag([1.0, 2.0, 1.0]))


def test_wrap_on_cylinder_keeps_run_lengths():
    path = make_meander(MeanderSpec(0.3, 0.4, n_runs=6))
    wrapped = wrap_on_cylinder(path, radius=0.15)

    assert wrapped.points[:, 2].max() <= 1e-12
    # runs stay parallel to the cylinder axis
    assert wrapped.length == pytest.approx(path.length, rel=0.02)


def test_deform_zero_amplitude_is_identity():
    path = make_meander(MeanderSpec(0.2, 0.2, n_runs=3))

    for mode in MotionMode:
        assert deform(path, MotionPerturbation(mode, 0.0)) is path


def test_deform_is_seed_deterministic():
    path = make_meander(MeanderSpec(0.3, 0.4, n_runs=6))
    motion = MotionPerturbation(MotionMode.RANDOM_SMOOTH, 0.005, spatial_wavelength=0.2, seed=3)

    first = deform(path, motion)
    second = deform(path, motion)
    other = deform(path, MotionPerturbation(MotionMode.RANDOM_SMOOTH, 0.005, spatial_wavelength=0.2, seed=4))

    assert np.array_equal(first.points, second.points)
    assert not np.array_equal(first.points, other.points)


def test_stretch_scales_planar_length():
    path = make_meander(MeanderSpec(0.3, 0.5, n_runs=6))
    stretched = deform(path, MotionPerturbation(MotionMode.STRETCH, 0.05))

    assert stretched.length / path.length == pytest.approx(1.05, abs=0.005)


def test_bend_preserves_arc_length_across_runs():
    path = make_meander(MeanderSpec(0.3, 0.5, n_runs=6))
    bent = deform(path, MotionPerturbation(MotionMode.BEND, 0.2, spatial_wavelength=0.2))

    assert bent.length == pytest.approx(path.length, rel=0.01)
    assert not np.allclose(bent.points[:, 2], 0.0)


def test_discretize_straight_line():
    path = CoilPath([[0, 0, 0], [1, 0, 0]], wire_radius=1e-3)
    filaments = discretize(path, 0.1)

    assert len(filaments) == 10
    np.testing.assert_allclose(filaments.lengths, 0.1, rtol=1e-12)


def test_discretize_preserves_length_and_bounds_segments():
    path = make_circular_coil(0.03, 6)
    filaments = discretize(path, 1e-3)

    assert filaments.lengths.max() <= 1e-3 * (1 + 1e-12)
    assert filaments.total_length == pytest.approx(path.length, rel=1e-9)


def test_halving_segment_length_doubles_count():
    path = make_circular_coil(0.03, 2)
    chord = float(np.linalg.norm(path.points[1] - path.points[0]))
    h = chord / 1.75

    assert len(discretize(path, h / 2)) >= 2 * len(discretize(path, h))


def test_filament_set_rejects_zero_length_segments():
    with pytest.raises(InvalidSpec):
        FilamentSet([[0, 0, 0]], [[0, 0, 0]], 1e-3)


def test_coil_path_json_round_trip():
    path = make_circular_coil(0.03, 2)
    loaded = CoilPath.from_json(path.to_json())

    assert np.array_equal(loaded.points, path.points)
    assert loaded.closed == path.closed
    assert loaded.wire_radius == path.wire_radius


def test_coil_path_json_requires_wire_radius():
    with pytest.raises(InvalidSpec, match="wire_radius"):
        CoilPath.from_dict({"points": [[0, 0, 0], [1, 0, 0]]})


def test_coil_path_rejects_repeated_points():
    with pytest.raises(InvalidSpec):
        CoilPath([[0, 0, 0], [0, 0, 0], [1, 0, 0]])
