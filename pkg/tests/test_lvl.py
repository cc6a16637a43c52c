import numpy as np
import pytest
from hypothesis import given, strategies as st

from lvlkit.errors import DegeneratePairs, FewerThanTwoAnchors, NoAnchor
from lvlkit.lvl import (
    HYDROSTATIC_A,
    correct_drift_retrospective,
    estimate_lvl_realtime,
    fit_pressure_height_model,
    physics_model,
    raw_trace,
    read_traces,
    wrist_height_as_lvl,
    write_traces,
)
from lvlkit.model import KvluPoint, PressureHeightModel, Side, Source
from lvlkit.sim import SimConfig, Stand, generate_session

from conftest import QUIET, wrist

P0 = 101325.0
H = 84.75
M = PressureHeightModel(a=-8.324, b=0.0)


def _anchor(t, p, h=H, side=Side.RIGHT):
    return KvluPoint(t, side, Source.STANDING, p, h)


class TestFit:
    def test_two_points_exact(self):
        m = fit_pressure_height_model([(-1, 8.324), (-2, 16.648)])
        assert m.a == pytest.approx(-8.324, abs=1e-12) and m.b == pytest.approx(0.0, abs=1e-12)

    def test_degenerate(self):
        with pytest.raises(DegeneratePairs):
            fit_pressure_height_model([(0, 1.0), (0, 2.0)])
        with pytest.raises(DegeneratePairs):
            fit_pressure_height_model([(1, 1.0)])

    def test_physics_default(self):
        m = fit_pressure_height_model([], physics_default=True)
        assert m.a == pytest.approx(-100 / (1.225 * 9.80665)) and m.b == 0.0
        assert m.a == pytest.approx(-8.324, abs=5e-4)
        assert physics_model().a == HYDROSTATIC_A

    def test_slope_units_on_simulated_lifts(self):
        # pressure/height pairs from a noiseless simulator stream generated with the hydrostatic slope
        from lvlkit.sim import LiftSet

        sim = generate_session(SimConfig(seed=2, script=(Stand(5.0), LiftSet("waist", 2), LiftSet("shoulder", 1)), noise=QUIET))
        w = sim.wrist[Side.RIGHT]
        h = sim.truth.wrist_height
        pairs = list(zip(w.pressure[::7] - w.pressure[0], h[::7] - h[0]))
        m = fit_pressure_height_model(pairs)
        assert -9.5 <= m.a <= -7.5


class TestRealtime:
    def test_anchor_identity(self):
        w = wrist([0.0, 1.0, 2.0], P0, 75.0)
        tr = estimate_lvl_realtime(w, [_anchor(0.0, P0)], M)
        assert np.all(tr.lvl == H)

    @pytest.mark.parametrize("dp, expected", [(-6.0, 134.694), (3.0, 59.778)])
    def test_arithmetic(self, dp, expected):
        w = wrist([0.0, 1.0], [P0, P0 + dp], 75.0)
        tr = estimate_lvl_realtime(w, [_anchor(0.0, P0)], M)
        assert tr.lvl[1] == pytest.approx(expected, abs=1e-9)
        assert round(tr.lvl[1], 2) == round(expected, 2)

    def test_before_first_anchor_omitted(self):
        w = wrist(np.arange(5.0), P0, 75.0)
        tr = estimate_lvl_realtime(w, [_anchor(2.0, P0)], M)
        assert tr.n_omitted == 2 and list(tr.t) == [2.0, 3.0, 4.0]

    def test_no_anchor(self):
        w = wrist(np.arange(5.0), P0, 75.0)
        with pytest.raises(NoAnchor):
            estimate_lvl_realtime(w, [], M)
        with pytest.raises(NoAnchor):
            estimate_lvl_realtime(w, [_anchor(1.0, P0, side=Side.LEFT)], M)

    def test_latest_anchor_wins(self):
        w = wrist(np.arange(4.0), [P0, P0, P0 + 1, P0 + 1], 75.0)
        tr = estimate_lvl_realtime(w, [_anchor(0.0, P0), _anchor(2.0, P0 + 1)], M)
        assert np.allclose(tr.lvl, H) and list(tr.anchor_t) == [0.0, 0.0, 2.0, 2.0]

    def test_b_is_added(self):
        w = wrist([0.0], P0, 75.0)
        tr = estimate_lvl_realtime(w, [_anchor(0.0, P0)], PressureHeightModel(-8.324, 2.0))
        assert tr.lvl[0] == H + 2.0

    def test_max_jump_skips(self):
        w = wrist(np.arange(4.0), P0, 75.0)
        far = _anchor(2.0, P0 - 10.0)  # implies ~83 cm jump
        tr = estimate_lvl_realtime(w, [_anchor(0.0, P0), far], M, max_anchor_jump=30.0)
        assert tr.skipped == (far,) and np.all(tr.lvl == H)

    @given(st.lists(st.integers(-400, 400), min_size=2, max_size=60), st.floats(-2000, 2000))
    def test_constant_offset_invariant(self, dps, c):
        p = P0 + np.array(dps, dtype=float) / 8
        t = np.arange(len(p), dtype=float)
        anchors = [_anchor(0.0, p[0]), _anchor(t[len(p) // 2], p[len(p) // 2])]
        a = estimate_lvl_realtime(wrist(t, p, 75.0), anchors, M)
        shifted = [_anchor(x.t, x.anchor_pressure + c) for x in anchors]
        b = estimate_lvl_realtime(wrist(t, p + c, 75.0), shifted, M)
        assert np.max(np.abs(a.lvl - b.lvl)) <= 1e-9

    @given(st.lists(st.integers(1, 100), min_size=2, max_size=50))
    def test_decreasing_pressure_raises_lvl(self, steps):
        p = P0 - np.cumsum(np.array(steps, dtype=float) / 10)
        t = np.arange(len(p), dtype=float)
        tr = estimate_lvl_realtime(wrist(t, p, 75.0), [_anchor(0.0, p[0])], M)
        assert np.all(np.diff(tr.lvl) > 0)


class TestRetrospective:
    def test_zero_drift_unchanged(self):
        w = wrist(np.arange(10.0), P0, 75.0)
        rt = estimate_lvl_realtime(w, [_anchor(0.0, P0), _anchor(5.0, P0)], M)
        assert np.array_equal(correct_drift_retrospective(rt).lvl, rt.lvl)

    def test_linear_drift_removed_exactly(self):
        # +1 Pa over [0, 10] with a = -8: uncorrected error reaches -8 cm at the second anchor
        m = PressureHeightModel(-8.0)
        t = np.arange(0.0, 10.5, 0.5)
        p = P0 + t / 10.0
        anchors = [_anchor(0.0, P0), _anchor(10.0, P0 + 1.0)]
        rt = estimate_lvl_realtime(wrist(t, p, 75.0), anchors[:1], m)
        assert rt.lvl[-1] == pytest.approx(H - 8.0)
        full = estimate_lvl_realtime(wrist(t, p, 75.0), anchors[:1], m).replace(anchors=tuple(anchors))
        corr = correct_drift_retrospective(full)
        assert np.max(np.abs(corr.lvl[:-1] - H)) <= 1e-9

    def test_anchor_values_exact(self):
        rng = np.random.default_rng(5)
        t = np.arange(0.0, 30.0, 0.1)
        p = P0 + np.cumsum(rng.normal(0, 0.3, len(t)))
        idx = [0, 80, 170, 250]
        anchors = [_anchor(float(t[i]), float(p[i]), H + k) for k, i in enumerate(idx)]
        corr = correct_drift_retrospective(estimate_lvl_realtime(wrist(t, p, 75.0), anchors, M))
        for a in anchors:
            assert corr.lvl[np.flatnonzero(corr.t == a.t)[0]] == pytest.approx(a.known_height, abs=1e-9)

    def test_no_extrapolation(self):
        t = np.arange(0.0, 20.0)
        p = P0 + t * 0.1
        anchors = [_anchor(0.0, P0), _anchor(10.0, P0 + 1.0)]
        rt = estimate_lvl_realtime(wrist(t, p, 75.0), anchors, M)
        corr = correct_drift_retrospective(rt)
        assert np.array_equal(corr.lvl[t > 10], rt.lvl[t > 10])

    def test_fewer_than_two(self):
        rt = estimate_lvl_realtime(wrist(np.arange(3.0), P0, 75.0), [_anchor(0.0, P0)], M)
        with pytest.raises(FewerThanTwoAnchors):
            correct_drift_retrospective(rt)

    def test_mode(self):
        rt = estimate_lvl_realtime(wrist(np.arange(3.0), P0, 75.0), [_anchor(0.0, P0), _anchor(1.0, P0)], M)
        assert correct_drift_retrospective(rt).mode == "corrected"


def test_raw_trace_never_updates():
    t = np.arange(5.0)
    p = P0 + t
    tr = raw_trace(wrist(t, p, 75.0), _anchor(0.0, P0), M)
    assert np.allclose(tr.lvl, H - 8.324 * t) and tr.mode == "raw"


def test_proxy_is_identity_by_default():
    tr = raw_trace(wrist(np.arange(3.0), P0, 75.0), _anchor(0.0, P0), M)
    px = wrist_height_as_lvl(tr)
    assert px.proxy and np.array_equal(px.lvl, tr.lvl)
    shifted = wrist_height_as_lvl(tr, bias=lambda t, v: np.full(len(t), 5.0))
    assert np.allclose(shifted.lvl, tr.lvl - 5.0)


def test_trace_csv_round_trip(tmp_path):
    t = np.arange(4.0)
    w = wrist(t, P0 + t / 3, 75.0)
    rt = estimate_lvl_realtime(w, [_anchor(0.0, P0), _anchor(2.0, P0 + 2 / 3)], M)
    corr = correct_drift_retrospective(rt)
    write_traces([rt, corr], tmp_path / "lvl.csv")
    back = read_traces(tmp_path / "lvl.csv")
    assert np.array_equal(back["realtime"][1], rt.lvl) and np.array_equal(back["corrected"][1], corr.lvl)
