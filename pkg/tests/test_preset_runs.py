"""Shipped presets run at reduced size: spiral release and the U-trap depth series."""

import copy
import json
import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from atomfiber.analysis import density_profile, early_loss_fraction, profile_moments
from atomfiber.constants import CODATA
from atomfiber.guideprops import section_at, two_wire_analytic
from atomfiber.mcsim import integrate
from atomfiber.scenario import PRESET_DIR, ScenarioDocument


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------

GAUSS = 1e-4
DEPTH_PRESETS = (("utrap_lifetime", 500e-6), ("utrap_lifetime_950", 950e-6), ("utrap_lifetime_1250", 1250e-6))


def _preset(name):
    with open(os.path.join(PRESET_DIR, name + ".json"), encoding="utf-8") as f:
        return json.load(f)


def _document(name, **sections):
    """Preset with some section entries replaced."""
    data = copy.deepcopy(_preset(name))
    for section, values in sections.items():
        data.setdefault(section, {}).update(values)
    return ScenarioDocument(data, source=name + ".json", base_dir=PRESET_DIR)


def _small_spiral():
    return _document(
        "spiral_fig3",
        geometry={"points_per_turn": 64},
        ensemble={"count": 100},
        integration={"duration": "25 ms", "snapshots": ["0 ms", "12.5 ms", "25 ms"]},
    )


# ---------------------------------------------------------------------------
# Spiral guide
# ---------------------------------------------------------------------------

class TestSpiralPreset:
    @pytest.mark.slow
    def test_section_at_mid_path_matches_straight_pair(self):
        doc = _small_spiral()
        model, path = doc.build_model()
        section = section_at(model, path, 12.5e-3, state=doc.state)
        h, _ = two_wire_analytic(1.0, 57.5e-6, 10 * GAUSS)
        assert section.height == pytest.approx(h, rel=0.05)
        assert section.Bmin < 1 * GAUSS
        assert section.depth > 0.0

    @pytest.mark.slow
    def test_inner_end_closes_the_guide(self):
        doc = _small_spiral()
        model, path = doc.build_model()
        floor = section_at(model, path, 12.5e-3, state=doc.state).Bmin
        c, _, n, up = path.frame_at(path.length)
        u, v = np.meshgrid(np.linspace(-300e-6, 300e-6, 61), np.linspace(20e-6, 500e-6, 49), indexing="ij")
        points = c + u.reshape(-1, 1) * n + v.reshape(-1, 1) * up
        B, _, inside = model.evaluate(points, 0.0, jacobian=False)
        babs = np.linalg.norm(B, axis=1)[~inside]
        assert babs.min() > max(5.0 * floor, 0.1 * GAUSS)

    @pytest.mark.slow
    @pytest.mark.acceptance
    def test_release_expands_and_drifts_inward(self):
        doc = _small_spiral()
        scenario = doc.build_scenario(seed=7)
        path = scenario.path
        result = integrate(scenario)
        assert len(result.snapshots) == 3
        moments = []
        for snap in result.snapshots:
            profile = density_profile(snap, path, bins=125, value_range=(0.0, path.length), tube_radius=500e-6)
            moments.append(profile_moments(profile))
        means = [m for m, _ in moments]
        spreads = [var for _, var in moments]
        assert spreads[0] < spreads[1] < spreads[2]
        assert means[2] > means[0]


# ---------------------------------------------------------------------------
# U-trap depth series
# ---------------------------------------------------------------------------

class TestDepthSeries:
    def test_presets_share_everything_but_the_depth(self):
        base = _preset("utrap_lifetime")
        for name, depth in DEPTH_PRESETS:
            data = _preset(name)
            assert data["bias"]["depth"] == f"{depth * 1e6:g} uK"
            assert data["ensemble"] == base["ensemble"]
            assert data["geometry"] == base["geometry"]
            doc = ScenarioDocument.load(name)
            assert doc.bias.depth == pytest.approx(depth * CODATA.kB)

    @pytest.mark.slow
    def test_solved_bias_gives_the_requested_depth(self):
        biases = []
        for name, depth in DEPTH_PRESETS:
            doc = ScenarioDocument.load(name)
            model, path = doc.build_model()
            section = section_at(model, path, 0.5 * path.length, state=doc.state)
            assert section.depth_temperature == pytest.approx(depth, rel=1e-3)
            biases.append(np.linalg.norm(model.bias.field(0.0)))
        assert len(set(biases)) == 3

    @pytest.mark.slow
    @pytest.mark.acceptance
    def test_early_loss_falls_with_depth(self):
        fractions = []
        for name, _ in DEPTH_PRESETS:
            doc = _document(name, ensemble={"count": 400},
                            integration={"duration": "100 ms", "snapshots": ["0 ms", "100 ms"]})
            result = integrate(doc.build_scenario(seed=11))
            fractions.append(early_loss_fraction(result.counts_series(), 0.1))
        assert fractions[0] > fractions[1] > fractions[2]
        assert fractions[0] > 0.0
