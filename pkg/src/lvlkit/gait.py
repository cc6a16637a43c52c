"""Swing / foot-flat segmentation and standing-vs-walking classification.

Order of operations for one foot: a coarse swing detector (fraction of the
rolling GRF peak) supplies the swing samples from which the heel and
forefoot pressing thresholds are derived; those thresholds then define the
foot-flat phase.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy.ndimage import maximum_filter1d

from .errors import InsufficientSwingSamples, StreamTooShort
from .model import (
    InsoleStream,
    IntervalLabel,
    Label,
    Region,
    Side,
    intervals_mask,
    mask_to_intervals,
    sample_period,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class GaitConfig:
    swing_fraction: float = 0.05  # of the rolling per-cycle GRF peak
    peak_window_s: float = 2.5
    min_swing_s: float = 0.1
    min_foot_flat_s: float = 0.1
    standing_load_min: float = 100.0  # N per foot
    standing_min_s: float = 1.0
    min_period_s: float = 0.6
    max_period_s: float = 2.5
    min_stream_s: float = 2.0
    min_swing_samples: int = 10
    sigma_k: float = 3.0


@dataclass(frozen=True)
class RegionThresholds:
    heel: float
    forefoot: float
    computed_from: tuple[IntervalLabel, ...]
    n_swing: int
    mean_heel: float
    mean_fore: float
    sigma_heel: float
    sigma_fore: float


@dataclass(frozen=True)
class GaitCycle:
    """Heel strike to heel strike of one foot."""

    side: Side
    start: float
    end: float
    swing: IntervalLabel
    foot_flat: IntervalLabel | None


def _total(stream: InsoleStream) -> np.ndarray:
    return stream.grf(Region.TOTAL)


def detect_swing(stream: InsoleStream, cfg: GaitConfig = GaitConfig()) -> list[IntervalLabel]:
    if len(stream) < 2 or stream.t[-1] - stream.t[0] < cfg.min_stream_s:
        raise StreamTooShort(f"{stream.side.value} insole spans less than {cfg.min_stream_s} s")
    total = _total(stream)
    filled = np.nan_to_num(total, nan=0.0)
    dt = sample_period(stream.t)
    size = max(1, int(round(cfg.peak_window_s / dt)))
    size += 1 - size % 2
    peak = maximum_filter1d(filled, size=size, mode="nearest")
    if not np.any(peak > 0):
        log.warning("%s insole: zero GRF throughout, swing threshold undefined", stream.side.value)
        return []
    with np.errstate(invalid="ignore"):
        mask = (total < cfg.swing_fraction * peak) & (peak > 0)
    return mask_to_intervals(stream.t, mask, stream.side, Label.SWING, cfg.min_swing_s)


def region_thresholds(
    stream: InsoleStream, swings: Sequence[IntervalLabel], cfg: GaitConfig = GaitConfig()
) -> RegionThresholds:
    sel = intervals_mask(stream.t, swings)
    heel = stream.grf(Region.HEEL)[sel]
    fore = stream.grf(Region.FOREFOOT)[sel]
    ok = np.isfinite(heel) & np.isfinite(fore)
    heel, fore = heel[ok], fore[ok]
    if len(heel) < cfg.min_swing_samples:
        raise InsufficientSwingSamples(
            f"{stream.side.value} insole: {len(heel)} swing samples, need {cfg.min_swing_samples}"
        )
    mh, mf = float(heel.mean()), float(fore.mean())
    sh, sf = float(heel.std()), float(fore.std())
    return RegionThresholds(
        heel=mh + cfg.sigma_k * sh,
        forefoot=mf + cfg.sigma_k * sf,
        computed_from=tuple(swings),
        n_swing=len(heel),
        mean_heel=mh,
        mean_fore=mf,
        sigma_heel=sh,
        sigma_fore=sf,
    )


def detect_foot_flat(
    stream: InsoleStream, thresholds: RegionThresholds, cfg: GaitConfig = GaitConfig()
) -> list[IntervalLabel]:
    with np.errstate(invalid="ignore"):
        pressed = (stream.grf(Region.HEEL) > thresholds.heel) & (
            stream.grf(Region.FOREFOOT) > thresholds.forefoot
        )
    return mask_to_intervals(stream.t, pressed, stream.side, Label.FOOT_FLAT, cfg.min_foot_flat_s)


def _walking_bouts(swings: Sequence[IntervalLabel], cfg: GaitConfig) -> list[tuple[float, float]]:
    events = sorted(swings, key=lambda s: (s.start, s.side.value))
    bouts, chain = [], []

    def close():
        if len(chain) >= 3:
            bouts.append((chain[0].start, chain[-1].end))

    for s in events:
        linked = False
        if chain:
            last = chain[-1]
            linked = s.side is not last.side and 0 < s.start - last.start <= cfg.max_period_s
            if linked and len(chain) >= 2:
                period = s.start - chain[-2].start
                linked = cfg.min_period_s <= period <= cfg.max_period_s
        if not linked:
            close()
            chain = []
        chain.append(s)
    close()
    return bouts


def classify_activity(
    left: InsoleStream,
    right: InsoleStream,
    cfg: GaitConfig = GaitConfig(),
    swings: Mapping[Side, Sequence[IntervalLabel]] | None = None,
) -> list[IntervalLabel]:
    """Label the shared timeline Standing / Walking / Unknown without gaps."""
    if not np.array_equal(left.t, right.t):
        raise ValueError("insole streams must share one timeline (align them first)")
    t = left.t
    if len(t) == 0:
        return []
    if swings is None:
        swings = {Side.LEFT: detect_swing(left, cfg), Side.RIGHT: detect_swing(right, cfg)}
    sw_l, sw_r = swings[Side.LEFT], swings[Side.RIGHT]

    with np.errstate(invalid="ignore"):
        loaded = (_total(left) > cfg.standing_load_min) & (_total(right) > cfg.standing_load_min)
    quiet = loaded & ~intervals_mask(t, sw_l) & ~intervals_mask(t, sw_r)
    standing = intervals_mask(t, mask_to_intervals(t, quiet, Side.BOTH, Label.STANDING, cfg.standing_min_s))

    walking = np.zeros(len(t), dtype=bool)
    for a, b in _walking_bouts([*sw_l, *sw_r], cfg):
        walking |= (t >= a) & (t < b)

    codes = np.zeros(len(t), dtype=np.int8)  # 0 unknown, 1 standing, 2 walking
    codes[standing] = 1
    codes[walking] = 2
    names = {0: Label.UNKNOWN, 1: Label.STANDING, 2: Label.WALKING}
    cuts = np.flatnonzero(np.diff(codes)) + 1
    starts = [0, *cuts.tolist()]
    stops = [*cuts.tolist(), len(t)]
    end_t = t[-1] + (sample_period(t) or 1.0)
    out = []
    for i, j in zip(starts, stops):
        out.append(IntervalLabel(float(t[i]), float(t[j]) if j < len(t) else float(end_t), Side.BOTH, names[int(codes[i])]))
    return out


def segment_cycles(
    swings: Mapping[Side, Sequence[IntervalLabel]],
    foot_flats: Mapping[Side, Sequence[IntervalLabel]],
    activity: Sequence[IntervalLabel],
) -> list[GaitCycle]:
    """One cycle per consecutive pair of swings of a foot inside a Walking bout.

    The cycle runs from the end of the first swing (heel strike) to the end of
    the second; its foot-flat phase is the longest detected foot-flat interval
    between heel strike and the next swing.
    """
    walks = [iv for iv in activity if iv.label is Label.WALKING]
    cycles = []
    for side in (Side.LEFT, Side.RIGHT):
        ffs = sorted(foot_flats.get(side, ()))
        for w in walks:
            inside = sorted(s for s in swings.get(side, ()) if s.within(w.start, w.end))
            for prev, nxt in zip(inside[:-1], inside[1:]):
                cands = [f for f in ffs if f.within(prev.end, nxt.start)]
                ff = max(cands, key=lambda f: (f.duration, -f.start)) if cands else None
                cycles.append(GaitCycle(side, prev.end, nxt.end, nxt, ff))
    return cycles


@dataclass(frozen=True)
class GaitResult:
    swings: dict[Side, list[IntervalLabel]]
    thresholds: dict[Side, RegionThresholds | None]
    foot_flats: dict[Side, list[IntervalLabel]]
    activity: list[IntervalLabel]
    cycles: list[GaitCycle]

    def intervals(self) -> list[IntervalLabel]:
        out = [*self.activity]
        for side in (Side.LEFT, Side.RIGHT):
            out += self.swings[side] + self.foot_flats[side]
        return sorted(out, key=lambda iv: (iv.start, iv.side.value, iv.label.value))


def analyze_gait(left: InsoleStream, right: InsoleStream, cfg: GaitConfig = GaitConfig()) -> GaitResult:
    streams = {Side.LEFT: left, Side.RIGHT: right}
    swings = {side: detect_swing(s, cfg) for side, s in streams.items()}
    thresholds, flats = {}, {}
    for side, s in streams.items():
        try:
            thr = region_thresholds(s, swings[side], cfg)
        except InsufficientSwingSamples as exc:
            log.info("%s; no foot-flat detection for this foot", exc)
            thr = None
        thresholds[side] = thr
        flats[side] = detect_foot_flat(s, thr, cfg) if thr is not None else []
    activity = classify_activity(left, right, cfg, swings)
    cycles = segment_cycles(swings, flats, activity)
    return GaitResult(swings, thresholds, flats, activity, cycles)


INTERVAL_HEADER = ["start", "end", "side", "label"]


def write_intervals(intervals: Sequence[IntervalLabel], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(INTERVAL_HEADER)
        for iv in intervals:
            w.writerow([repr(iv.start), repr(iv.end), iv.side.value, iv.label.value])


def read_intervals(path) -> list[IntervalLabel]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [IntervalLabel(float(r["start"]), float(r["end"]), r["side"], r["label"]) for r in rows]
