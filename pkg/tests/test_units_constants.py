"""Unit-suffixed quantities, their diagnostics, and species data."""

import math
import os
import sys

import pytest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from atomfiber import units
from atomfiber.constants import CODATA, NotWeakFieldSeekingError, magnetic_moment, species
from atomfiber.units import QuantityError, format_quantity, parse_quantity, to_unit
from tools.unit_helper import convert, main as unit_helper_main, units_by_dimension


class TestParseQuantity:
    def test_gauss_to_tesla(self):
        assert parse_quantity("10 G", "T") == pytest.approx(1e-3, rel=1e-15)

    def test_micrometers_without_space(self):
        assert parse_quantity("57.5um", "m") == pytest.approx(57.5e-6, rel=1e-15)

    def test_micro_sign_is_accepted(self):
        assert parse_quantity("115 µm", "m") == pytest.approx(115e-6, rel=1e-15)

    def test_milliamps_and_microkelvin(self):
        assert parse_quantity("100 mA", "A") == pytest.approx(0.1)
        assert parse_quantity("450 uK", "K") == pytest.approx(450e-6)

    def test_degrees_reduce_to_radians(self):
        assert parse_quantity("90 deg", "rad") == pytest.approx(math.pi / 2)

    def test_gradient_unit(self):
        assert parse_quantity("40 G/cm", "T/m") == pytest.approx(0.4)

    def test_infinity(self):
        assert math.isinf(parse_quantity("inf s", "s"))

    def test_bare_number_without_expectation(self):
        assert parse_quantity(0.05) == 0.05
        assert parse_quantity("3") == 3.0

    def test_bare_number_rejected_when_unit_expected(self):
        with pytest.raises(QuantityError, match="needs a unit"):
            parse_quantity("10", "T")
        with pytest.raises(QuantityError, match="needs a unit"):
            parse_quantity(10, "T")

    def test_unknown_unit(self):
        with pytest.raises(QuantityError, match="Unknown unit 'furlong'"):
            parse_quantity("3 furlong", "m")

    def test_wrong_dimension(self):
        with pytest.raises(QuantityError, match="has dimension T, expected m"):
            parse_quantity("10 G", "m")

    def test_malformed_text_has_location_and_caret(self):
        with pytest.raises(QuantityError) as ei:
            parse_quantity("G 10", "T")
        msg = str(ei.value)
        assert "Malformed quantity" in msg
        assert "Syntax error at line 1, column 1" in msg
        assert "^" in msg


class TestFormatting:
    def test_to_unit(self):
        assert to_unit(1e-3, "G") == pytest.approx(10.0)
        assert to_unit(35e-6, "um") == pytest.approx(35.0)

    def test_formatted_text_reads_back(self):
        text = format_quantity(57.5e-6, "um")
        assert text.endswith(" um")
        assert parse_quantity(text, "m") == 57.5e-6

    def test_unknown_output_unit(self):
        with pytest.raises(QuantityError):
            to_unit(1.0, "parsec")

    def test_every_unit_has_a_known_dimension(self):
        dims = {dim for _, dim in units.UNITS.values()}
        assert {"T", "m", "A", "K", "s", "Hz", "rad", "kg"} <= dims


class TestSpecies:
    def test_stretched_state_moment_is_one_bohr_magneton(self):
        assert magnetic_moment(species("Li7")) == pytest.approx(CODATA.muB)
        assert magnetic_moment(species("Rb87")) == pytest.approx(CODATA.muB)

    def test_masses(self):
        assert species("Rb87").mass == pytest.approx(1.443e-25, rel=1e-3)
        assert species("Li7").mass == pytest.approx(1.165e-26, rel=1e-3)

    def test_override_keeps_other_fields(self):
        state = species("Li7", mF=1)
        assert state.mF == 1
        assert state.F == 2
        assert magnetic_moment(state) == pytest.approx(0.5 * CODATA.muB)

    def test_strong_field_seeker_is_rejected(self):
        state = species("Rb87", mF=-2)
        assert not state.weak_field_seeking
        with pytest.raises(NotWeakFieldSeekingError):
            magnetic_moment(state)

    def test_mf_zero_is_not_trappable(self):
        with pytest.raises(NotWeakFieldSeekingError):
            magnetic_moment(species("Li7", mF=0))

    def test_unknown_species(self):
        with pytest.raises(KeyError, match="Unknown species 'Na23'"):
            species("Na23")

    def test_mf_beyond_f(self):
        with pytest.raises(ValueError, match="exceeds F"):
            species("Li7", mF=3)


class TestUnitHelper:
    def test_convert_same_dimension(self):
        text = convert("500 G/cm", "T/m")
        assert text.endswith(" T/m")
        assert parse_quantity(text, "T/m") == pytest.approx(5.0)

    def test_convert_across_dimensions(self):
        with pytest.raises(QuantityError, match="expected m"):
            convert("10 G", "um")

    def test_unknown_target(self):
        with pytest.raises(QuantityError, match="Unknown unit 'furlong'"):
            convert("1 m", "furlong")

    def test_grouping(self):
        groups = units_by_dimension()
        assert groups["T"] == ["T", "mT", "G", "mG"]
        assert "deg" in groups["rad"]

    def test_command_line(self, capsys):
        assert unit_helper_main(["1.6 s", "ms"]) == 0
        assert capsys.readouterr().out.strip() == format_quantity(1.6, "ms")
        assert unit_helper_main(["10 G", "um"]) == 1
        assert capsys.readouterr().out.startswith("Error: Quantity '10 G' has dimension T")
