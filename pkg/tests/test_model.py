import numpy as np
import pytest
from hypothesis import given, strategies as st

from lvlkit.errors import EmptyStream, MissingAnthropometry, NonMonotonicTime, OutOfRange
from lvlkit.model import (
    HYDROSTATIC_A,
    N_CELLS,
    Anthropometry,
    InsoleSample,
    IntervalLabel,
    KvluPoint,
    Label,
    LvlTrace,
    PressureHeightModel,
    Region,
    Side,
    Source,
    default_region_map,
    intervals_mask,
    mask_to_intervals,
    region_grf,
    validate_session,
)

from conftest import insole_from_regions, wrist


def test_default_region_map_partition():
    rmap = default_region_map()
    assert len(rmap) == N_CELLS
    counts = {r: rmap.count(r) for r in (Region.FOREFOOT, Region.MIDFOOT, Region.HEEL)}
    assert counts == {Region.FOREFOOT: 36, Region.MIDFOOT: 30, Region.HEEL: 30}
    # toe-first ordering: forefoot cells come before heel cells
    assert rmap[0] is Region.FOREFOOT and rmap[-1] is Region.HEEL


class TestRegionGrf:
    def test_zero(self):
        s = InsoleSample(0.0, np.zeros(N_CELLS), Side.LEFT)
        assert all(region_grf(s, r) == 0 for r in Region)

    def test_heel_cells(self):
        rmap = default_region_map()
        cells = np.array([1.0 if r is Region.HEEL else 0.0 for r in rmap])
        s = InsoleSample(0.0, cells, Side.LEFT, rmap)
        assert region_grf(s, Region.HEEL) == 30.0
        assert region_grf(s, Region.TOTAL) == 30.0

    def test_uniform(self):
        s = InsoleSample(0.0, np.full(N_CELLS, 0.5), Side.RIGHT)
        assert region_grf(s, Region.TOTAL) == 48.0

    @given(st.lists(st.floats(0, 1000, allow_nan=False), min_size=N_CELLS, max_size=N_CELLS))
    def test_total_is_sum_of_regions(self, cells):
        # integers-valued copies keep the float sums exact
        cells = np.round(np.array(cells))
        s = InsoleSample(0.0, cells, Side.LEFT)
        parts = sum(region_grf(s, r) for r in (Region.HEEL, Region.MIDFOOT, Region.FOREFOOT))
        assert region_grf(s, Region.TOTAL) == parts


class TestIntervals:
    def test_start_before_end(self):
        with pytest.raises(ValueError):
            IntervalLabel(1.0, 1.0, Side.LEFT, Label.SWING)

    def test_mask_to_intervals_half_open(self):
        t = np.arange(10) * 0.1
        mask = np.array([0, 1, 1, 0, 0, 1, 1, 1, 0, 1], dtype=bool)
        ivs = mask_to_intervals(t, mask, Side.LEFT, Label.SWING)
        assert [x for iv in ivs for x in (iv.start, iv.end)] == pytest.approx([0.1, 0.3, 0.5, 0.8, 0.9, 1.0])
        assert np.array_equal(intervals_mask(t, ivs), mask)

    def test_min_duration(self):
        t = np.arange(10) * 0.1
        mask = np.array([0, 1, 0, 0, 1, 1, 1, 0, 0, 0], dtype=bool)
        ivs = mask_to_intervals(t, mask, Side.LEFT, Label.SWING, min_duration=0.2)
        assert len(ivs) == 1 and ivs[0].start == pytest.approx(0.4)


class TestValidateSession:
    def _streams(self):
        tw = np.arange(50) / 10.0
        ti = np.arange(200) / 40.0
        w = wrist(tw, 101325.0, 75.0)
        left = insole_from_regions(ti, 300.0, 300.0, side=Side.LEFT)
        right = insole_from_regions(ti, 300.0, 300.0, side=Side.RIGHT)
        return w, left, right

    def test_rates(self):
        w, left, right = self._streams()
        s = validate_session([w], [left, right], Anthropometry(170.0))
        assert s.rates["wrist_R"] == pytest.approx(10.0)
        assert s.rates["insole_L"] == pytest.approx(40.0)
        assert s.counts == {"wrist_R": 50, "insole_L": 200, "insole_R": 200}

    def test_duplicate_dropped_with_warning(self):
        w, left, right = self._streams()
        t = np.array(w.t)
        t[5] = t[4]
        s = validate_session([wrist(t, 101325.0, 75.0)], [left, right], Anthropometry(170.0))
        assert len(s.wrist[Side.RIGHT]) == 49
        assert s.warnings and "duplicate" in s.warnings[0]

    def test_non_monotonic_lists_index(self):
        w, left, _ = self._streams()
        bad = insole_from_regions([0.0, 2.0, 1.0], 1.0, 1.0, side=Side.RIGHT)
        with pytest.raises(NonMonotonicTime) as exc:
            validate_session([w], [left, bad], Anthropometry(170.0))
        assert exc.value.indices == [2]

    def test_idempotent(self):
        w, left, right = self._streams()
        a = validate_session([w], [left, right], Anthropometry(170.0))
        b = validate_session(list(a.wrist.values()), list(a.insole.values()), a.anthropometry)
        assert all(a.wrist[k].equals(b.wrist[k]) for k in a.wrist)
        assert all(a.insole[k].equals(b.insole[k]) for k in a.insole)
        assert a.counts == b.counts

    def test_errors(self):
        w, left, right = self._streams()
        with pytest.raises(MissingAnthropometry):
            validate_session([w], [left, right], None)
        with pytest.raises(EmptyStream):
            validate_session([w], [left], Anthropometry(170.0))
        with pytest.raises(EmptyStream):
            validate_session([], [left, right], Anthropometry(170.0))
        with pytest.raises(OutOfRange):
            validate_session([wrist(w.t, 5.0, 75.0)], [left, right], Anthropometry(170.0))

    def test_error_names_stage(self):
        assert str(MissingAnthropometry("x")).startswith("model.validate_session")


def test_anthropometry_wrist_height():
    assert Anthropometry(200.0).wrist_height == pytest.approx(99.0)
    with pytest.raises(ValueError):
        Anthropometry(170.0, 1.2)


def test_pressure_height_model_slope_sign():
    assert HYDROSTATIC_A == pytest.approx(-8.324, abs=5e-4)
    with pytest.raises(ValueError):
        PressureHeightModel(a=1.0)


def test_kvlu_point_coerces_enums():
    p = KvluPoint(1.0, "R", "LF", 101325.0, 84.0)
    assert p.wrist_side is Side.RIGHT and p.source is Source.LF


def test_trace_requires_increasing_time():
    with pytest.raises(ValueError):
        LvlTrace(np.array([0.0, 0.0]), np.zeros(2), np.zeros(2), Side.LEFT)


def test_streams_are_read_only():
    w = wrist(np.arange(3.0), 101325.0, 75.0)
    with pytest.raises(ValueError):
        w.pressure[0] = 0.0
