"""Wire layout builders, the geometry file and layout validation."""

import math
import os
import sys

import numpy as np
import pytest
from scipy.integrate import trapezoid

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from atomfiber.chipgeom import (GeometryError, GeometryFileError, SpiralSpec, build_loading_layout, build_separated_pair,
                                build_side_wire, build_spiral_pair, build_straight_pair, build_u_pair,
                                layout_from_text, layout_to_text, read_geometry, solve_spiral_winding,
                                spiral_arclength, strip_filaments, write_geometry)
from atomfiber.layout import GuidePath, WireCircuit, WireLayout, WireSegment
from atomfiber.validator import ValidationError, validate_layout


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------

D = 57.5e-6


def _reference_spiral(points_per_turn=512):
    return SpiralSpec(inner=200e-6, outer=3e-3, length=25e-3, d=D, points_per_turn=points_per_turn)


def _arms(circuit, path):
    """+d arm and -d arm vertices matched to the centerline points."""
    verts = circuit.vertices()
    n = len(path.points)
    plus = verts[1:1 + n]
    minus = verts[-1 - n:-1][::-1]
    return plus, minus


# ---------------------------------------------------------------------------
# Spiral pair
# ---------------------------------------------------------------------------

class TestSpiralPair:
    def test_path_length_matches_request(self):
        _, path = build_spiral_pair(_reference_spiral())
        assert path.length == pytest.approx(25e-3, rel=5e-3)

    def test_more_than_two_turns(self):
        theta, b = solve_spiral_winding(_reference_spiral())
        assert theta / (2 * math.pi) > 2.0
        assert 200e-6 + b * theta == pytest.approx(3e-3, rel=1e-9)

    def test_arclength_matches_dense_quadrature(self):
        theta, b = solve_spiral_winding(_reference_spiral())
        t = np.linspace(0.0, theta, 400001)
        dense = trapezoid(np.hypot(200e-6 + b * t, b), t)
        assert spiral_arclength(200e-6, b, theta) == pytest.approx(dense, rel=1e-6)

    def test_arms_are_two_d_apart(self):
        circuit, path = build_spiral_pair(_reference_spiral())
        plus, minus = _arms(circuit, path)
        gap = np.linalg.norm(plus - minus, axis=1)
        assert np.allclose(gap, 2 * D, rtol=1e-9)

    def test_path_runs_inward(self):
        _, path = build_spiral_pair(_reference_spiral())
        r = np.hypot(path.points[:, 0], path.points[:, 1])
        assert r[0] == pytest.approx(3e-3, rel=1e-9)
        assert r[-1] == pytest.approx(200e-6, rel=1e-9)
        assert path.half_separation == D

    def test_single_connected_circuit_with_leads(self):
        circuit, path = build_spiral_pair(_reference_spiral(128))
        report = validate_layout(WireLayout([circuit]))
        assert report.passed, report.findings
        # leads reach the pads 5 mm back from the outer end
        pad = circuit.vertices()[0]
        assert np.linalg.norm(pad[:2] - path.points[0, :2]) > 4.9e-3

    def test_resolution_doubling_converges(self):
        _, coarse = build_spiral_pair(_reference_spiral(256))
        _, fine = build_spiral_pair(_reference_spiral(512))
        assert abs(fine.length - coarse.length) / fine.length < 1e-3

    def test_degenerate_radii(self):
        spec = SpiralSpec(inner=1e-3, outer=1e-3, length=25e-3, d=D)
        with pytest.raises(GeometryError, match="inner < outer"):
            build_spiral_pair(spec)

    def test_half_separation_above_inner_radius(self):
        spec = SpiralSpec(inner=50e-6, outer=3e-3, length=25e-3, d=D)
        with pytest.raises(GeometryError, match="below inner radius"):
            build_spiral_pair(spec)

    def test_coarse_resolution_rejected(self):
        with pytest.raises(GeometryError):
            build_spiral_pair(_reference_spiral(16))

    def test_arms_overlapping_neighbouring_turn(self):
        # many turns packed into a small annulus: turn spacing below 2d
        spec = SpiralSpec(inner=200e-6, outer=600e-6, length=60e-3, d=D)
        with pytest.raises(GeometryError, match="self-intersect"):
            build_spiral_pair(spec)


# ---------------------------------------------------------------------------
# Straight and auxiliary layouts
# ---------------------------------------------------------------------------

class TestStraightLayouts:
    def test_straight_pair_arms(self):
        circuit, path = build_straight_pair(10e-3, D)
        verts = circuit.vertices()
        assert len(circuit.segments) == 3
        assert verts[0][1] == pytest.approx(D)
        assert verts[-1][1] == pytest.approx(-D)
        assert abs(verts[0][1] - verts[-1][1]) == pytest.approx(115e-6)
        assert path.length == pytest.approx(10e-3)
        assert np.allclose(path.points[:, 1], 0.0)

    def test_straight_pair_zero_separation(self):
        with pytest.raises(GeometryError, match="Half-separation"):
            build_straight_pair(10e-3, 0.0)

    def test_reference_meter_long_pair(self):
        circuit, path = build_straight_pair(1.0, D)
        assert path.length == pytest.approx(1.0)
        assert circuit.length == pytest.approx(2.0 + 2 * D)

    def test_separated_pair_is_two_circuits(self):
        wires, path = build_separated_pair(10e-3, 20e-6)
        assert [w.name for w in wires] == ["wire_a", "wire_b"]
        a0, a1 = wires[0].vertices()
        b0, b1 = wires[1].vertices()
        assert (a1 - a0)[0] > 0 and (b1 - b0)[0] < 0
        assert path.half_separation == 20e-6

    def test_side_wire(self):
        circuit, path = build_side_wire(20e-3, y=1e-4)
        assert circuit.name == "single"
        assert np.allclose(path.points[:, 1], 1e-4)

    def test_loading_layout_names(self):
        layout, _ = build_loading_layout(10e-3, D)
        assert layout.names == ["single", "pair"]

    def test_u_pair_leads_point_away_from_guide(self):
        layout, path = build_u_pair(4e-3, 100e-6, 3e-3)
        ua, ub = layout.circuit("u_a").vertices(), layout.circuit("u_b").vertices()
        assert ua[0][1] > 100e-6 and ua[-1][1] > 100e-6
        assert ub[0][1] < -100e-6 and ub[-1][1] < -100e-6
        assert validate_layout(layout).passed
        assert layout.circuit("u_a").cross_section == (200e-6, 5e-6)


class TestStripFilaments:
    def test_filaments_span_the_width(self):
        circuit, _ = build_side_wire(10e-3)
        strands = strip_filaments(circuit, 5)
        ys = sorted(s[0][1] for s in strands)
        assert len(strands) == 5
        assert ys[-1] - ys[0] == pytest.approx(0.8 * 45e-6)

    def test_single_filament_is_the_centerline(self):
        circuit, _ = build_straight_pair(10e-3, D)
        (only,) = strip_filaments(circuit, 1)
        assert np.array_equal(only, circuit.vertices())

    def test_count_must_be_positive(self):
        circuit, _ = build_side_wire(10e-3)
        with pytest.raises(GeometryError):
            strip_filaments(circuit, 0)


# ---------------------------------------------------------------------------
# Geometry file
# ---------------------------------------------------------------------------

class TestGeometryFile:
    def test_file_reproduces_layout_exactly(self, tmp_path):
        circuit, _ = build_spiral_pair(_reference_spiral(64 * 2))
        layout = WireLayout([circuit])
        target = tmp_path / "spiral.geom"
        write_geometry(layout, str(target))
        back = read_geometry(str(target))
        assert back.names == ["spiral"]
        assert np.array_equal(back.circuit("spiral").vertices(), circuit.vertices())
        assert back.circuit("spiral").cross_section == circuit.cross_section

    def test_comments_and_undeclared_circuits(self):
        text = "# two loose segments\nw 0 0 0 1 0 0\nw 1 0 0 1 1 0  # corner\n"
        layout = layout_from_text(text)
        assert layout.names == ["w"]
        assert layout.circuit("w").waveform_ref == "w"
        assert len(layout.circuit("w").segments) == 2

    def test_declared_waveform_reference(self):
        text = "!circuit a 4.5e-05 5e-06 drive\na 0 0 0 1 0 0\n"
        assert layout_from_text(text).circuit("a").waveform_ref == "drive"

    def test_short_segment_line_has_hint(self):
        with pytest.raises(GeometryFileError) as ei:
            layout_from_text("w 0 0 0 1 0\n")
        msg = str(ei.value)
        assert "Syntax error at line 1" in msg
        assert "^" in msg
        assert "Hint: A segment line needs six coordinates" in msg

    def test_missing_file(self, tmp_path):
        with pytest.raises(GeometryFileError, match="not found"):
            read_geometry(str(tmp_path / "absent.geom"))

    def test_text_lists_every_segment(self):
        circuit, _ = build_straight_pair(10e-3, D)
        text = layout_to_text(WireLayout([circuit]))
        assert sum(1 for line in text.splitlines() if line.startswith("pair ")) == 3


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

class TestValidateLayout:
    def test_valid_pair_has_no_findings(self):
        circuit, _ = build_straight_pair(10e-3, D)
        report = validate_layout(WireLayout([circuit]))
        assert report.passed
        assert report.findings == []

    def test_gap_between_segments(self):
        circuit = WireCircuit("gappy", [WireSegment((0, 0, 0), (1e-3, 0, 0)), WireSegment((2e-3, 0, 0), (3e-3, 0, 0))])
        report = validate_layout(WireLayout([circuit]))
        assert not report.passed
        assert any("disconnected at index 1" in f for f in report.findings)

    def test_zero_length_segment(self):
        # below the connection tolerance but not exactly degenerate
        circuit = WireCircuit("dot", [WireSegment((0, 0, 0), (1e-3, 0, 0)), WireSegment((1e-3, 0, 0), (1e-3 + 1e-13, 0, 0))])
        report = validate_layout(WireLayout([circuit]))
        assert any("zero-length segment" in f for f in report.findings)

    def test_crossing_wires(self):
        a = WireCircuit.from_vertices("a", [(-1e-3, 0, 0), (1e-3, 0, 0)])
        b = WireCircuit.from_vertices("b", [(0, -1e-3, 0), (0, 1e-3, 0)])
        report = validate_layout(WireLayout([a, b]))
        assert any("self-intersection between 'a'[0] and 'b'[0]" in f for f in report.findings)

    def test_crossing_at_different_heights_is_allowed(self):
        a = WireCircuit.from_vertices("a", [(-1e-3, 0, 0), (1e-3, 0, 0)])
        b = WireCircuit.from_vertices("b", [(0, -1e-3, 1e-3), (0, 1e-3, 1e-3)])
        assert validate_layout(WireLayout([a, b])).passed

    def test_duplicate_names(self):
        a, _ = build_side_wire(10e-3)
        b, _ = build_side_wire(10e-3, y=1e-3)
        report = validate_layout(WireLayout([a, b]))
        assert not report.passed

    def test_raise_if_failed(self):
        circuit = WireCircuit("empty", [])
        report = validate_layout(WireLayout([circuit]))
        with pytest.raises(ValidationError, match="Validation failed:\ncircuit 'empty': no segments"):
            report.raise_if_failed()


class TestGuidePath:
    def test_frame_is_right_handed(self):
        path = GuidePath.from_points([(0, 0, 0), (1e-3, 0, 0), (1e-3, 1e-3, 0)])
        c, t, n, up = path.frame_at(1.5e-3)
        assert np.allclose(c, (1e-3, 0.5e-3, 0))
        assert np.allclose(t, (0, 1, 0))
        assert np.allclose(n, (-1, 0, 0))
        assert np.allclose(up, (0, 0, 1))

    def test_arclength_is_cumulative(self):
        path = GuidePath.from_points([(0, 0, 0), (3e-3, 4e-3, 0)])
        assert path.length == pytest.approx(5e-3)
        assert np.allclose(path.point_at(2.5e-3), (1.5e-3, 2e-3, 0))

    def test_repeated_point_is_rejected(self):
        with pytest.raises(GeometryError, match="strictly increasing"):
            GuidePath.from_points([(0, 0, 0), (1e-3, 0, 0), (1e-3, 0, 0), (2e-3, 0, 0)])

    def test_non_increasing_arclength_is_rejected(self):
        points = np.array([(0, 0, 0), (1e-3, 0, 0), (2e-3, 0, 0)], dtype=float)
        with pytest.raises(GeometryError, match="strictly increasing"):
            GuidePath(points=points, arclength=np.array([0.0, 2e-3, 1e-3]))

    def test_single_point_is_rejected(self):
        with pytest.raises(GeometryError, match="at least two"):
            GuidePath.from_points([(0, 0, 0)])


class TestWireSegment:
    def test_degenerate_segment_is_rejected(self):
        with pytest.raises(GeometryError, match="Zero-length segment"):
            WireSegment((1e-3, 0, 0), (1e-3, 0, 0))

    def test_non_finite_endpoint_is_rejected(self):
        with pytest.raises(GeometryError, match="must be finite"):
            WireSegment((0, 0, 0), (math.nan, 0, 0))

    def test_repeated_vertex_is_rejected(self):
        with pytest.raises(GeometryError, match="Zero-length"):
            WireCircuit.from_vertices("w", [(0, 0, 0), (1e-3, 0, 0), (1e-3, 0, 0)])

    def test_degenerate_row_in_geometry_file(self):
        text = "pair 0 0 0 1e-3 0 0\npair 1e-3 0 0 1e-3 0 0\n"
        with pytest.raises(GeometryFileError, match="circuit 'pair': Zero-length"):
            layout_from_text(text)

    def test_builders_produce_valid_segments(self):
        circuit, path = build_spiral_pair(_reference_spiral(64))
        assert all(seg.length > 0 for seg in circuit.segments)
        assert np.all(np.diff(path.arclength) > 0)
