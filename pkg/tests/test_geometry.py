import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from motif.geometry import (
    FEATURE_NAMES,
    GeometryError,
    ParamSpace,
    XfmrGeometry,
    XfmrTemplate,
    area_mm2,
    feature_vector,
    from_features,
    sample_geometry,
)


class TestTemplate:
    def test_aliases(self):
        assert XfmrTemplate.parse("mn") is XfmrTemplate.M_TO_N
        assert XfmrTemplate.parse("1:1") is XfmrTemplate.ONE_TO_ONE
        assert XfmrTemplate.parse("eight_shaped") is XfmrTemplate.EIGHT_SHAPED

    def test_unknown_template_lists_choices(self):
        with pytest.raises(GeometryError, match="expected one of"):
            XfmrTemplate.parse("spiral")


class TestGeometryValidation:
    def test_one_to_one_requires_single_turns(self):
        with pytest.raises(GeometryError, match="1:1"):
            XfmrGeometry(XfmrTemplate.ONE_TO_ONE, 1, 2, 100.0, 5.0, 3.0, 2.0)

    def test_turn_limit(self):
        with pytest.raises(GeometryError, match="outside"):
            XfmrGeometry(XfmrTemplate.M_TO_N, 5, 1, 300.0, 5.0, 3.0, 2.0)

    def test_minimum_width(self):
        with pytest.raises(GeometryError, match="trace_width"):
            XfmrGeometry(XfmrTemplate.M_TO_N, 1, 1, 100.0, 0.5, 3.0, 2.0)

    def test_footprint(self):
        # 2*2*(10+10) = 80 um needed
        with pytest.raises(GeometryError, match="footprint"):
            XfmrGeometry(XfmrTemplate.M_TO_N, 2, 1, 80.0, 10.0, 10.0, 2.0)
        XfmrGeometry(XfmrTemplate.M_TO_N, 2, 1, 80.1, 10.0, 10.0, 2.0)

    def test_nonpositive_length(self):
        with pytest.raises(GeometryError):
            XfmrGeometry(XfmrTemplate.M_TO_N, 1, 1, 100.0, 5.0, 3.0, 0.0)

    def test_text_round_trip(self, mn_geometry):
        assert XfmrGeometry.from_text(mn_geometry.to_text()) == mn_geometry

    def test_text_block_rejects_missing_key(self, mn_geometry):
        text = "\n".join(l for l in mn_geometry.to_text().splitlines() if not l.startswith("winding_gap"))
        with pytest.raises(GeometryError, match="missing"):
            XfmrGeometry.from_text(text)


class TestSampling:
    def test_all_sixteen_pairs_observed(self):
        space = ParamSpace.default(XfmrTemplate.M_TO_N)
        seen = {sample_geometry(space, XfmrTemplate.M_TO_N, s).turns for s in range(600)}
        assert len(seen) == 16

    def test_degenerate_space_gives_corner(self):
        eps = 1e-9
        space = ParamSpace(
            outer_dim=(150.0, 150.0 + eps),
            trace_width=(5.0, 5.0 + eps),
            trace_spacing=(3.0, 3.0 + eps),
            winding_gap=(2.0, 2.0 + eps),
            turn_pairs=((2, 2),),
        )
        g = sample_geometry(space, XfmrTemplate.M_TO_N, 3)
        assert g.turns == (2, 2)
        assert g.outer_dim == pytest.approx(150.0, abs=1e-8)
        assert g.trace_width == pytest.approx(5.0, abs=1e-8)

    def test_deterministic(self):
        space = ParamSpace.default(XfmrTemplate.M_TO_N)
        assert sample_geometry(space, XfmrTemplate.M_TO_N, 42) == sample_geometry(space, XfmrTemplate.M_TO_N, 42)

    def test_infeasible_space_names_constraint(self):
        space = ParamSpace(outer_dim=(10.0, 20.0), turn_pairs=((4, 4),))
        with pytest.raises(GeometryError, match="footprint"):
            sample_geometry(space, XfmrTemplate.M_TO_N, 0)

    def test_invalid_interval(self):
        space = ParamSpace(outer_dim=(100.0, 50.0), turn_pairs=((1, 1),))
        with pytest.raises(GeometryError, match="lower < upper"):
            space.validate(XfmrTemplate.M_TO_N)

    def test_one_to_one_space_rejects_other_pairs(self):
        with pytest.raises(GeometryError):
            ParamSpace.default(XfmrTemplate.ONE_TO_ONE).with_pairs((1, 2)).validate(XfmrTemplate.ONE_TO_ONE)

    def test_space_text_round_trip(self):
        space = ParamSpace.default(XfmrTemplate.M_TO_N).with_pairs((1, 2), (3, 4))
        assert ParamSpace.from_text(space.to_text()) == space

    @pytest.mark.parametrize("template", list(XfmrTemplate))
    def test_every_sample_valid(self, template):
        # 10^4 seeds per template in total, split across the four templates
        space = ParamSpace.default(template)
        for seed in range(2500):
            g = sample_geometry(space, template, seed)
            assert g.violation() is None
            assert (g.turns_primary, g.turns_secondary) in space.turn_pairs
            for name, (lo, hi) in space.intervals().items():
                assert lo <= getattr(g, name) <= hi


class TestArea:
    def test_unit_conversion(self):
        g = XfmrGeometry(XfmrTemplate.M_TO_N, 1, 1, 100.0, 5.0, 3.0, 2.0)
        assert area_mm2(g) == pytest.approx(0.01)

    def test_eight_shaped_two_lobes(self):
        g = XfmrGeometry(XfmrTemplate.EIGHT_SHAPED, 1, 1, 100.0, 5.0, 3.0, 2.0)
        assert area_mm2(g) == pytest.approx(0.02)

    @pytest.mark.parametrize("template", [XfmrTemplate.M_TO_N, XfmrTemplate.EIGHT_SHAPED])
    def test_quadratic_scaling(self, template):
        a = XfmrGeometry(template, 1, 1, 60.0, 5.0, 3.0, 2.0)
        b = XfmrGeometry(template, 1, 1, 120.0, 5.0, 3.0, 2.0)
        assert area_mm2(b) == pytest.approx(4 * area_mm2(a))

    @given(st.floats(40, 300), st.floats(40, 300))
    def test_monotone(self, d1, d2):
        a = XfmrGeometry(XfmrTemplate.M_TO_N, 1, 1, d1, 5.0, 3.0, 2.0)
        b = XfmrGeometry(XfmrTemplate.M_TO_N, 1, 1, d2, 5.0, 3.0, 2.0)
        if d1 < d2:
            assert area_mm2(a) < area_mm2(b)


class TestFeatures:
    def test_layout(self):
        assert FEATURE_NAMES == (
            "turns_primary", "turns_secondary", "outer_dim", "trace_width", "trace_spacing", "winding_gap",
        )

    def test_one_to_one_turn_slots(self):
        g = XfmrGeometry(XfmrTemplate.ONE_TO_ONE, 1, 1, 100.0, 5.0, 3.0, 2.0)
        v = feature_vector(g)
        assert len(v) == 6 and v[0] == 1 and v[1] == 1

    def test_width_only_change(self):
        a = XfmrGeometry(XfmrTemplate.M_TO_N, 2, 2, 150.0, 5.0, 3.0, 2.0)
        b = XfmrGeometry(XfmrTemplate.M_TO_N, 2, 2, 150.0, 6.0, 3.0, 2.0)
        assert list(np.nonzero(feature_vector(a) != feature_vector(b))[0]) == [3]

    def test_round_trip(self, mn_geometry):
        assert from_features(feature_vector(mn_geometry), mn_geometry.template) == mn_geometry

    def test_non_integer_turns_rejected(self):
        with pytest.raises(GeometryError):
            from_features([1.5, 1, 100, 5, 3, 2], XfmrTemplate.M_TO_N)

    @settings(max_examples=200)
    @given(st.integers(0, 2**32 - 1), st.integers(0, 2**32 - 1))
    def test_injective(self, s1, s2):
        space = ParamSpace.default(XfmrTemplate.M_TO_N)
        a = sample_geometry(space, XfmrTemplate.M_TO_N, s1)
        b = sample_geometry(space, XfmrTemplate.M_TO_N, s2)
        if a != b:
            assert not np.array_equal(feature_vector(a), feature_vector(b))
