"""Closed-form guide parameters, field-zero search, transverse sections and bias scans."""

import math
import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from atomfiber.chipgeom import build_side_wire, build_straight_pair
from atomfiber.constants import CODATA, species
from atomfiber.guideprops import (FieldZeroError, GuideDoesNotFormError, ScanRow, ScanTable, SectionError,
                                  find_field_zero, guide_scan, potential_along_path, section_at,
                                  side_guide_analytic, two_wire_analytic, two_wire_threshold,
                                  utrap_bias_for_depth, with_bias_magnitude)
from atomfiber.layout import WireLayout
from atomfiber.magnetics import BiasWaveform, CurrentWaveform, FieldModel


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------

D = 57.5e-6
GAUSS = 1e-4


def _pair(bias_gauss=10.0, current=1.0, length=20e-3):
    circuit, path = build_straight_pair(length, D)
    model = FieldModel(WireLayout([circuit]), {"pair": CurrentWaveform.constant("pair", current)},
                       BiasWaveform.vertical_bias(bias_gauss * GAUSS))
    return model, path


def _side(bias_gauss=10.0, current=1.0):
    circuit, path = build_side_wire(20e-3)
    model = FieldModel(WireLayout([circuit]), {"single": CurrentWaveform.constant("single", current)},
                       BiasWaveform.horizontal_bias(bias_gauss * GAUSS))
    return model, path


# ---------------------------------------------------------------------------
# Closed forms
# ---------------------------------------------------------------------------

class TestClosedForms:
    def test_side_guide(self):
        r0, g = side_guide_analytic(1.0, 10 * GAUSS)
        assert r0 == pytest.approx(200e-6, rel=1e-3)
        assert g * 1e2 == pytest.approx(500.0, rel=1e-3)

    def test_two_wire_threshold(self):
        assert two_wire_threshold(1.0, D) / GAUSS == pytest.approx(69.6, abs=0.05)

    def test_two_wire_weak_bias(self):
        h, g = two_wire_analytic(1.0, D, 1 * GAUSS)
        assert h * 1e6 == pytest.approx(476.0, abs=0.5)
        assert g * 1e2 == pytest.approx(41.4, abs=0.05)

    def test_two_wire_strong_bias(self):
        h, g = two_wire_analytic(1.0, D, 50 * GAUSS)
        assert h * 1e6 == pytest.approx(36.0, abs=0.05)
        assert g * 1e2 / 1e3 == pytest.approx(7.8, abs=0.05)

    def test_height_falls_and_gradient_rises_with_bias(self):
        rows = [two_wire_analytic(1.0, D, b * GAUSS) for b in (1, 5, 10, 20, 50)]
        heights = [h for h, _ in rows]
        grads = [g for _, g in rows]
        assert heights == sorted(heights, reverse=True)
        assert grads == sorted(grads)

    def test_bias_above_threshold(self):
        with pytest.raises(GuideDoesNotFormError, match="guide does not form"):
            two_wire_analytic(1.0, D, 80 * GAUSS)

    def test_non_positive_inputs(self):
        with pytest.raises(GuideDoesNotFormError):
            two_wire_analytic(1.0, D, 0.0)
        with pytest.raises(GuideDoesNotFormError):
            side_guide_analytic(0.0, 10 * GAUSS)


# ---------------------------------------------------------------------------
# Field zero
# ---------------------------------------------------------------------------

class TestFindFieldZero:
    def test_pair_zero_at_analytic_height(self):
        model, _ = _pair()
        h, _ = two_wire_analytic(1.0, D, 10 * GAUSS)
        p = find_field_zero(model, (0.0, 5e-6, 1.1 * h))
        assert np.linalg.norm(model.field_at(p)) < 1e-9
        assert p[2] == pytest.approx(h, rel=1e-2)
        assert abs(p[1]) < 1e-6

    def test_side_guide_zero(self):
        model, _ = _side()
        p = find_field_zero(model, (0.0, 10e-6, 150e-6))
        assert p[2] == pytest.approx(200e-6, rel=1e-2)

    def test_seed_inside_conductor(self):
        model, _ = _pair()
        with pytest.raises(FieldZeroError, match="inside a conductor"):
            find_field_zero(model, (0.0, D, 0.0))

    def test_no_zero_without_current(self):
        model, _ = _pair(current=0.0)
        with pytest.raises(FieldZeroError) as ei:
            find_field_zero(model, (0.0, 0.0, 100e-6), max_iter=10)
        assert ei.value.residual == pytest.approx(10 * GAUSS)
        assert ei.value.best_point is not None


# ---------------------------------------------------------------------------
# Sections
# ---------------------------------------------------------------------------

class TestSection:
    def test_pair_section_matches_closed_form(self):
        model, path = _pair()
        h, g = two_wire_analytic(1.0, D, 10 * GAUSS)
        sec = section_at(model, path, 0.5 * path.length)
        assert sec.height == pytest.approx(h, rel=1e-2)
        assert sec.gradient == pytest.approx(g, rel=2e-2)
        assert sec.Bmin < 1e-7
        assert sec.quadrupole
        assert sec.depth > 0
        assert sec.depth_temperature == pytest.approx(sec.depth / CODATA.kB)

    def test_side_guide_section(self):
        model, path = _side()
        sec = section_at(model, path, 0.5 * path.length)
        assert sec.height == pytest.approx(200e-6, rel=1e-2)
        assert sec.gradient * 1e2 == pytest.approx(500.0, rel=2e-2)

    def test_offset_field_gives_harmonic_frequencies(self):
        model, path = _pair()
        # longitudinal offset lifts the minimum off zero
        model = model.with_bias(BiasWaveform.vertical_bias(10 * GAUSS, static_offset=(1 * GAUSS, 0.0, 0.0)))
        sec = section_at(model, path, 0.5 * path.length, state=species("Li7"))
        assert sec.Bmin == pytest.approx(1 * GAUSS, rel=1e-2)
        assert not sec.quadrupole
        f_lo, f_hi = sorted(sec.frequencies)
        _, g = two_wire_analytic(1.0, D, 10 * GAUSS)
        expected = math.sqrt(CODATA.muB * g * g / (species("Li7").mass * 1 * GAUSS))
        assert f_hi == pytest.approx(expected, rel=5e-2)
        assert f_lo == pytest.approx(expected, rel=5e-2)

    def test_station_outside_path(self):
        model, path = _pair()
        with pytest.raises(SectionError, match="outside path"):
            section_at(model, path, 2 * path.length)

    def test_potential_along_path(self):
        model, path = _pair()
        h, _ = two_wire_analytic(1.0, D, 10 * GAUSS)
        L = path.length
        U = potential_along_path(model, path, [0.25 * L, 0.5 * L, 0.75 * L], h)
        assert U.shape == (3,)
        assert np.all(np.isfinite(U))
        assert np.all(U < CODATA.muB * 1e-5)

    @pytest.mark.slow
    def test_bias_for_requested_depth(self):
        model, path = _pair()
        target = section_at(model, path, 0.5 * path.length).depth
        bias = utrap_bias_for_depth(with_bias_magnitude(model, 1 * GAUSS), path, target,
                                    bias_range=(1 * GAUSS, 60 * GAUSS))
        got = section_at(with_bias_magnitude(model, bias), path, 0.5 * path.length).depth
        assert got == pytest.approx(target, rel=1e-3)


# ---------------------------------------------------------------------------
# Bias scan
# ---------------------------------------------------------------------------

class TestGuideScan:
    @pytest.mark.acceptance
    def test_scan_tracks_closed_form(self):
        model, path = _pair()
        biases = np.geomspace(1 * GAUSS, 50 * GAUSS, 10)
        table = guide_scan(model, path, biases)
        assert table.errors == []
        for row in table.rows:
            h, g = two_wire_analytic(1.0, D, row.bias)
            assert row.section.height == pytest.approx(h, rel=1e-2)
            assert row.section.gradient == pytest.approx(g, rel=2e-2)
        assert table.check_monotonic() == []

    def test_over_threshold_row_is_reported(self):
        model, path = _pair()
        table = guide_scan(model, path, [10 * GAUSS, 80 * GAUSS])
        assert table.rows[0].error is None
        assert "guide does not form" in table.rows[1].error
        assert table.errors[0].startswith("B=80 G:")
        rows = table.to_rows()
        assert rows[1][0] == pytest.approx(80.0)
        assert all(math.isnan(v) for v in rows[1][2:])

    def test_scan_at_fixed_current(self):
        model, path = _pair(current=0.5)
        table = guide_scan(model, path, [10 * GAUSS], current=1.0)
        assert table.rows[0].current == 1.0
        h, _ = two_wire_analytic(1.0, D, 10 * GAUSS)
        assert table.rows[0].section.height == pytest.approx(h, rel=1e-2)

    def test_threads_do_not_change_rows(self):
        model, path = _pair()
        biases = [5 * GAUSS, 10 * GAUSS, 20 * GAUSS]
        one = guide_scan(model, path, biases).to_rows()
        two = guide_scan(model, path, biases, threads=2).to_rows()
        assert one == two

    def test_empty_bias_list(self):
        model, path = _pair()
        with pytest.raises(ValueError, match="at least one bias"):
            guide_scan(model, path, [])

    def test_monotonic_check_flags_inversion(self):
        class _Sec:
            def __init__(self, height, gradient):
                self.height, self.gradient = height, gradient

        table = ScanTable(rows=[ScanRow(1 * GAUSS, 1.0, _Sec(100e-6, 1.0)),
                                ScanRow(2 * GAUSS, 1.0, _Sec(120e-6, 2.0))])
        problems = table.check_monotonic()
        assert len(problems) == 1
        assert "height not decreasing" in problems[0]
