"""End-to-end processing of one validated session."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Sequence

import numpy as np

from .errors import FewerThanTwoAnchors, InvalidPipelineConfig, NoAnchor, TooFewSamples
from .gait import GaitConfig, GaitResult, analyze_gait
from .ingest import align, smooth_pressure, split_segments
from .kvlu import AngleThreshold, compute_angle_threshold, detect_kvlu_standing, detect_kvlu_walking
from .lvl import correct_drift_retrospective, estimate_lvl_realtime, raw_trace
from .model import (
    DEFAULT_ANGLE_THRESHOLD,
    DEFAULT_WRIST_RATIO,
    HYDROSTATIC_A,
    Anthropometry,
    KvluPoint,
    LvlTrace,
    PressureHeightModel,
    Session,
    Side,
    Source,
    WristStream,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PipelineConfig:
    wrist_ratio: float = DEFAULT_WRIST_RATIO
    # None: derive from the session's angle-calibration window, else the cohort default
    angle_threshold: float | None = DEFAULT_ANGLE_THRESHOLD
    smooth_window: int = 41
    model_a: float = HYDROSTATIC_A
    model_b: float = 0.0
    max_anchor_jump: float | None = None
    max_gap_s: float = 1.0
    standing_anchors: bool = True
    walking_anchors: bool = True
    eval_wrist: str = "R"
    gait: GaitConfig = field(default_factory=GaitConfig)

    def __post_init__(self):
        if not isinstance(self.smooth_window, int) or self.smooth_window < 1 or self.smooth_window % 2 == 0:
            raise InvalidPipelineConfig("smooth_window must be a positive odd integer")
        if not self.wrist_ratio > 0:
            raise InvalidPipelineConfig("wrist_ratio must be positive")
        if not self.model_a < 0:
            raise InvalidPipelineConfig("model_a must be negative")
        if self.max_anchor_jump is not None and not self.max_anchor_jump > 0:
            raise InvalidPipelineConfig("max_anchor_jump must be positive or None")

    @property
    def model(self) -> PressureHeightModel:
        return PressureHeightModel(self.model_a, self.model_b)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        d = dict(d)
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise InvalidPipelineConfig(f"unknown pipeline keys {sorted(unknown)}")
        if "gait" in d:
            gnames = {f.name for f in fields(GaitConfig)}
            bad = set(d["gait"]) - gnames
            if bad:
                raise InvalidPipelineConfig(f"unknown gait keys {sorted(bad)}")
            d["gait"] = GaitConfig(**d["gait"])
        try:
            return cls(**d)
        except TypeError as exc:
            raise InvalidPipelineConfig(str(exc)) from None

    def override(self, **kw) -> "PipelineConfig":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})


@dataclass(frozen=True, eq=False)
class SessionResult:
    anthropometry: Anthropometry
    config: PipelineConfig
    threshold: AngleThreshold
    gait: GaitResult
    wrist: dict  # Side -> smoothed WristStream
    anchors: list
    realtime: dict  # Side -> LvlTrace
    corrected: dict
    raw: dict
    notes: list = field(default_factory=list)

    def anchors_for(self, side: Side) -> list[KvluPoint]:
        return [p for p in self.anchors if p.wrist_side is side]


def _smooth_segments(w: WristStream, window: int, max_gap: float) -> WristStream:
    segs = split_segments(w.t, max_gap)
    if len(segs) <= 1:
        return smooth_pressure(w, window)
    parts = [smooth_pressure(w.select(s), window).pressure for s in segs]
    return w.with_pressure(np.concatenate(parts))


def angle_threshold_for(session: Session, cfg: PipelineConfig, calibration: tuple[float, float] | None) -> AngleThreshold:
    if cfg.angle_threshold is not None:
        return AngleThreshold.cohort_default(cfg.angle_threshold)
    if calibration is not None:
        a, b = calibration
        samples = np.concatenate([w.pitch[(w.t >= a) & (w.t < b)] for w in session.wrist.values()])
        try:
            return compute_angle_threshold(samples)
        except TooFewSamples as exc:
            log.warning("%s; using cohort default", exc)
    return AngleThreshold.cohort_default(DEFAULT_ANGLE_THRESHOLD)


def _traces(w: WristStream, anchors: list[KvluPoint], cfg: PipelineConfig, notes: list):
    rt_parts, co_parts = [], []
    for seg in split_segments(w.t, cfg.max_gap_s):
        sub = w.select(seg)
        lo, hi = sub.t[0], sub.t[-1]
        seg_anchors = [p for p in anchors if lo <= p.t <= hi]
        try:
            rt = estimate_lvl_realtime(sub, seg_anchors, cfg.model, cfg.max_anchor_jump)
        except NoAnchor:
            notes.append(f"{w.side.value} wrist segment [{lo:.2f}, {hi:.2f}] s has no anchor")
            continue
        rt_parts.append(rt)
        try:
            co_parts.append(correct_drift_retrospective(rt))
        except FewerThanTwoAnchors:
            notes.append(f"{w.side.value} wrist segment [{lo:.2f}, {hi:.2f}] s has one anchor; left uncorrected")
            co_parts.append(rt.replace(mode="corrected"))
    if not rt_parts:
        return None, None
    return LvlTrace.concat(rt_parts), LvlTrace.concat(co_parts)


def run_session(
    session: Session,
    cfg: PipelineConfig = PipelineConfig(),
    angle_calibration: tuple[float, float] | None = None,
) -> SessionResult:
    anthro = replace(session.anthropometry, wrist_ratio=cfg.wrist_ratio)
    left, right = session.insole[Side.LEFT], session.insole[Side.RIGHT]
    if not np.array_equal(left.t, right.t):
        rate = session.rates.get("insole_L") or session.rates.get("insole_R")
        left, right = align([left, right], rate)
    gait = analyze_gait(left, right, cfg.gait)
    threshold = angle_threshold_for(session, cfg, angle_calibration)

    wrist = {s: _smooth_segments(w, cfg.smooth_window, cfg.max_gap_s) for s, w in session.wrist.items()}
    anchors: list[KvluPoint] = []
    if cfg.standing_anchors:
        for w in wrist.values():
            anchors += detect_kvlu_standing(gait.activity, w, threshold, anthro)
    if cfg.walking_anchors:
        anchors += detect_kvlu_walking(gait.cycles, wrist, threshold, anthro)
    anchors.sort(key=lambda p: (p.t, p.wrist_side.value, p.source.value))

    notes: list[str] = []
    realtime, corrected, raw = {}, {}, {}
    for side, w in sorted(wrist.items(), key=lambda kv: kv[0].value):
        mine = [p for p in anchors if p.wrist_side is side]
        rt, co = _traces(w, mine, cfg, notes)
        if rt is None:
            continue
        realtime[side], corrected[side] = rt, co
        raw[side] = raw_trace(w, rt.anchors[0], cfg.model)
    for n in notes:
        log.info(n)
    return SessionResult(anthro, cfg, threshold, gait, wrist, anchors, realtime, corrected, raw, notes)


def count_sources(anchors: Sequence[KvluPoint]) -> dict[str, int]:
    out = {s.value: 0 for s in Source}
    for p in anchors:
        out[p.source.value] += 1
    return out
