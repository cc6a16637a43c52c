"""Known-vertical-location anchors: wrist posture threshold, standing and
walking anchor detection, and the body-height ratio model."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import NoCycles, TooFewSamples
from .gait import GaitCycle
from .model import (
    DEFAULT_ANGLE_THRESHOLD,
    Anthropometry,
    IntervalLabel,
    KvluPoint,
    Label,
    Side,
    Source,
    WristStream,
)

MIN_ANGLE_SAMPLES = 10
# dips below the threshold shorter than this are noise, not a posture change
STANDING_MERGE_GAP_S = 0.5
# a run never continues across missing data longer than this
STANDING_MAX_DATA_GAP_S = 1.0


@dataclass(frozen=True)
class AngleThreshold:
    value: float  # degrees
    n_angle: int
    sigma_angle: float
    mean: float

    @classmethod
    def cohort_default(cls, value: float = DEFAULT_ANGLE_THRESHOLD) -> "AngleThreshold":
        """Shipped threshold, not derived from this subject's data."""
        return cls(float(value), 0, 0.0, float(value))


def compute_angle_threshold(samples: Iterable[float], k: float = 3.0, min_samples: int = MIN_ANGLE_SAMPLES) -> AngleThreshold:
    """Lower bound of the vertical-posture pitch range: mean - k population sigma."""
    a = np.asarray(list(samples), dtype=float)
    a = a[np.isfinite(a)]
    if len(a) < max(min_samples, 1):
        raise TooFewSamples(f"{len(a)} angle samples, need {min_samples}")
    mean, sigma = float(a.mean()), float(a.std())
    return AngleThreshold(mean - k * sigma, len(a), sigma, mean)


def estimate_wrist_height(anthro: Anthropometry) -> float:
    return anthro.wrist_ratio * anthro.body_height


def fit_wrist_ratio(pairs: Iterable[tuple[float, float]]) -> float:
    """Average of per-subject (standing wrist height / body height) ratios."""
    ratios = [w / h for w, h in pairs]
    if not ratios:
        raise ValueError("no (wrist height, body height) pairs")
    return float(np.mean(ratios))


def _runs(mask: np.ndarray, breaks: np.ndarray | None = None) -> list[tuple[int, int]]:
    """Inclusive index ranges of True runs; ``breaks[i]`` ends a run between i and i + 1."""
    padded = np.concatenate(([False], mask, [False]))
    edges = np.flatnonzero(np.diff(padded.astype(np.int8)))
    runs = [(int(a), int(b) - 1) for a, b in zip(edges[0::2], edges[1::2])]
    if breaks is None or not breaks.any():
        return runs
    out = []
    for a, b in runs:
        cuts = [a + int(k) for k in np.flatnonzero(breaks[a:b])]
        for lo, hi in zip([a, *(c + 1 for c in cuts)], [*cuts, b]):
            out.append((lo, hi))
    return out


def _merge_runs(t: np.ndarray, runs: list[tuple[int, int]], max_gap: float, breaks: np.ndarray) -> list[tuple[int, int]]:
    out: list[tuple[int, int]] = []
    for a, b in runs:
        if out and t[a] - t[out[-1][1]] <= max_gap and not breaks[out[-1][1] : a].any():
            out[-1] = (out[-1][0], b)
        else:
            out.append((a, b))
    return out


def _nearest(t: np.ndarray, idx: np.ndarray, target: float) -> int:
    d = np.abs(t[idx] - target)
    return int(idx[np.argmin(d)])  # argmin returns the first, i.e. earlier, on ties


def _thr(threshold) -> float:
    return threshold.value if isinstance(threshold, AngleThreshold) else float(threshold)


def detect_kvlu_standing(
    intervals: Sequence[IntervalLabel],
    wrist: WristStream,
    threshold: AngleThreshold | float,
    anthro: Anthropometry,
    merge_gap_s: float = STANDING_MERGE_GAP_S,
    max_data_gap_s: float = STANDING_MAX_DATA_GAP_S,
) -> list[KvluPoint]:
    """One anchor per run of above-threshold pitch inside each Standing interval,
    at the above-threshold sample nearest the run's temporal midpoint.

    Runs separated by less than ``merge_gap_s`` count as one run; missing
    data longer than ``max_data_gap_s`` always ends a run.
    """
    thr = _thr(threshold)
    height = estimate_wrist_height(anthro)
    out = []
    for iv in intervals:
        if iv.label is not Label.STANDING:
            continue
        lo = np.searchsorted(wrist.t, iv.start, side="left")
        hi = np.searchsorted(wrist.t, iv.end, side="left")
        if hi <= lo:
            continue
        with np.errstate(invalid="ignore"):
            above = wrist.pitch[lo:hi] > thr
        tt = wrist.t[lo:hi]
        breaks = np.diff(tt) > max_data_gap_s
        for a, b in _merge_runs(tt, _runs(above, breaks), merge_gap_s, breaks):
            idx = lo + a + np.flatnonzero(above[a : b + 1])
            mid = 0.5 * (wrist.t[idx[0]] + wrist.t[idx[-1]])
            k = _nearest(wrist.t, idx, mid)
            p = wrist.pressure[k]
            if np.isfinite(p):
                out.append(KvluPoint(float(wrist.t[k]), wrist.side, Source.STANDING, float(p), height))
    return out


def select_walking_candidate(
    t: np.ndarray, pitch: np.ndarray, start: float, end: float, threshold: float
) -> int | None:
    """Index of the chosen anchor sample within a foot-flat phase ``[start, end)``.

    Of the first and last above-threshold samples, the one nearer the phase
    midpoint wins; ties go to the earlier one.
    """
    lo = np.searchsorted(t, start, side="left")
    hi = np.searchsorted(t, end, side="left")
    with np.errstate(invalid="ignore"):
        hits = np.flatnonzero(pitch[lo:hi] > threshold)
    if len(hits) == 0:
        return None
    first, last = lo + hits[0], lo + hits[-1]
    mid = 0.5 * (start + end)
    return int(first if abs(t[first] - mid) <= abs(t[last] - mid) else last)


def detect_kvlu_walking(
    cycles: Sequence[GaitCycle],
    wrists: Mapping[Side, WristStream] | Sequence[WristStream],
    threshold: AngleThreshold | float,
    anthro: Anthropometry,
) -> list[KvluPoint]:
    thr = _thr(threshold)
    height = estimate_wrist_height(anthro)
    if not isinstance(wrists, Mapping):
        wrists = {w.side: w for w in wrists}
    out = []
    for c in cycles:
        ff = c.foot_flat
        if ff is None:
            continue
        for side in sorted(wrists, key=lambda s: s.value):
            w = wrists[side]
            k = select_walking_candidate(w.t, w.pitch, ff.start, ff.end, thr)
            if k is not None and np.isfinite(w.pressure[k]):
                out.append(KvluPoint(float(w.t[k]), side, Source.for_foot(c.side), float(w.pressure[k]), height))
    return sorted(out, key=lambda p: (p.t, p.wrist_side.value, p.source.value))


def combo_name(foot: Side, wrist: Side) -> str:
    return f"{foot.value}F-{wrist.value}W"


COMBOS = tuple(combo_name(f, w) for f in (Side.RIGHT, Side.LEFT) for w in (Side.RIGHT, Side.LEFT))


def kvlu_detection_rate(
    cycles: Sequence[GaitCycle],
    points: Sequence[KvluPoint],
    wrists: Sequence[Side] = (Side.RIGHT, Side.LEFT),
) -> dict[str, float]:
    """Percent of each foot's cycles holding at least one anchor of each wrist."""
    if not cycles:
        raise NoCycles("no gait cycles")
    rates = {}
    for foot in (Side.RIGHT, Side.LEFT):
        mine = [c for c in cycles if c.side is foot]
        src = Source.for_foot(foot)
        for wrist in wrists:
            if not mine:
                rates[combo_name(foot, wrist)] = float("nan")
                continue
            pts = np.array(sorted(p.t for p in points if p.source is src and p.wrist_side is wrist))
            hit = 0
            for c in mine:
                i = np.searchsorted(pts, c.start, side="left")
                hit += bool(i < len(pts) and pts[i] < c.end)
            rates[combo_name(foot, wrist)] = 100.0 * hit / len(mine)
    return rates


KVLU_HEADER = ["t", "wrist_side", "source", "anchor_pressure_pa", "known_height_cm"]


def write_kvlu_points(points: Sequence[KvluPoint], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(KVLU_HEADER)
        for p in points:
            w.writerow([repr(p.t), p.wrist_side.value, p.source.value, repr(p.anchor_pressure), repr(p.known_height)])


def read_kvlu_points(path) -> list[KvluPoint]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [
        KvluPoint(float(r["t"]), r["wrist_side"], r["source"], float(r["anchor_pressure_pa"]), float(r["known_height_cm"]))
        for r in rows
    ]
