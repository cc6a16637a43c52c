"""Deterministic synthetic sessions with exact ground truth.

Kinematics are deliberately simple: the wrist rests at ``true_wrist_ratio *
body_height`` whenever standing or walking, moves along a raised-cosine ramp
to a per-level height during lifts, and wrist pitch is a sinusoid during
walking that peaks at mid-stance of the opposite foot. Plantar force uses
three half-sine region bumps per stance (heel first, forefoot last) and zero
load in swing. All randomness derives from ``seed``.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Sequence, Union

import numpy as np

from .errors import InvalidConfig
from .ingest import Annotation, TruthTrace, write_annotations, write_manifest, write_stream
from .gait import write_intervals
from .model import (
    CM_PER_INCH,
    DEFAULT_ANGLE_THRESHOLD,
    DEFAULT_WRIST_RATIO,
    G0,
    HYDROSTATIC_A,
    N_CELLS,
    InsoleStream,
    IntervalLabel,
    Label,
    Region,
    Side,
    WristStream,
    default_region_map,
    mask_to_intervals,
)

SPEEDS = ("slow", "normal", "fast")
LEVELS = ("ground", "knee", "waist", "shoulder")
LEVEL_CM = {"ground": 0.0, "knee": 20 * CM_PER_INCH, "waist": 40 * CM_PER_INCH, "shoulder": 55 * CM_PER_INCH}


@dataclass(frozen=True)
class Stand:
    duration: float


@dataclass(frozen=True)
class Walk:
    duration: float
    speed: str = "normal"


@dataclass(frozen=True)
class LiftSet:
    level: str
    repetitions: int = 1
    hold_s: float = 3.0
    rest_s: float = 5.0
    level_cm: float | None = None  # overrides the named level's height


Activity = Union[Stand, Walk, LiftSet]


@dataclass(frozen=True)
class DriftSpec:
    linear_pa_s: float = 0.0
    sin_amp_pa: float = 0.0
    sin_period_s: float = 60.0
    rw_sigma: float = 0.0  # Pa / sqrt(s)


@dataclass(frozen=True)
class NoiseSpec:
    pressure_pa: float = 2.0
    pitch_deg: float = 2.0
    grf_n: float = 0.5  # per cell


@dataclass(frozen=True)
class SimConfig:
    seed: int = 0
    body_height: float = 171.3
    script: tuple = (Stand(30.0),)
    drift: DriftSpec = DriftSpec()
    noise: NoiseSpec = NoiseSpec()
    body_mass: float = 75.0
    true_wrist_ratio: float = DEFAULT_WRIST_RATIO
    wrist_rate: float = 10.0
    insole_rate: float = 40.0
    p0: float = 101325.0
    a_true: float = HYDROSTATIC_A
    stand_pitch: float = 75.0
    walk_pitch_center: float = 55.0
    arm_swing: dict = field(default_factory=lambda: {"slow": 8.0, "normal": 15.0, "fast": 22.0})
    cycle_s: dict = field(default_factory=lambda: {"slow": 1.6, "normal": 1.1, "fast": 0.85})
    stance_fraction: float = 0.6
    level_cm: dict = field(default_factory=lambda: dict(LEVEL_CM))
    wrist_offsets: dict = field(default_factory=lambda: {"ground": 5.0, "knee": 4.0, "waist": 0.0, "shoulder": -2.0})
    lift_pitch: dict = field(default_factory=lambda: {"ground": 20.0, "knee": 15.0, "waist": 0.0, "shoulder": -20.0})
    lift_transition_s: float = 1.0
    eligibility_threshold: float = DEFAULT_ANGLE_THRESHOLD
    wrists: tuple = ("L", "R")

    def activity_duration(self, act: Activity) -> float:
        if isinstance(act, LiftSet):
            return act.repetitions * (act.hold_s + act.rest_s + 2 * self.lift_transition_s)
        return act.duration

    @property
    def duration(self) -> float:
        return float(sum(self.activity_duration(a) for a in self.script))

    def validate(self) -> None:
        def bad(msg):
            raise InvalidConfig(msg)

        if not self.script:
            bad("empty activity script")
        if self.body_height <= 0 or self.body_mass <= 0:
            bad("body height and mass must be positive")
        if self.wrist_rate <= 0 or self.insole_rate <= 0:
            bad("sample rates must be positive")
        if not 0 < self.true_wrist_ratio < 1:
            bad("true_wrist_ratio must lie in (0, 1)")
        if self.a_true >= 0:
            bad("a_true must be negative")
        if not 0 < self.stance_fraction < 1:
            bad("stance_fraction must lie in (0, 1)")
        if min(self.noise.pressure_pa, self.noise.pitch_deg, self.noise.grf_n, self.drift.rw_sigma) < 0:
            bad("noise magnitudes must be non-negative")
        if self.drift.sin_period_s <= 0:
            bad("drift sinusoid period must be positive")
        if not set(self.wrists) <= {"L", "R"} or not self.wrists:
            bad("wrists must be a non-empty subset of L, R")
        for act in self.script:
            if isinstance(act, (Stand, Walk)):
                if not act.duration > 0:
                    bad(f"{type(act).__name__} duration must be positive")
            if isinstance(act, Walk):
                if act.speed not in self.cycle_s or act.speed not in self.arm_swing:
                    bad(f"unknown walking speed {act.speed!r}")
                if act.duration < self.cycle_s[act.speed]:
                    bad("walk shorter than one gait cycle")
            if isinstance(act, LiftSet):
                if act.repetitions < 1:
                    bad("repetitions must be >= 1")
                if act.hold_s <= 0 or act.rest_s < 0:
                    bad("hold must be positive and rest non-negative")
                if act.level_cm is None and act.level not in self.level_cm:
                    bad(f"unknown lift level {act.level!r}")
                for table in (self.wrist_offsets, self.lift_pitch):
                    if act.level not in table:
                        bad(f"level {act.level!r} missing from offset/pitch tables")
            if not isinstance(act, (Stand, Walk, LiftSet)):
                bad(f"unknown activity {act!r}")

    # -- JSON ------------------------------------------------------------------

    def to_dict(self) -> dict:
        d = asdict(self)
        d["script"] = [_act_to_dict(a) for a in self.script]
        d["wrists"] = list(self.wrists)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SimConfig":
        d = dict(d)
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise InvalidConfig(f"unknown config keys {sorted(unknown)}")
        try:
            if "script" in d:
                d["script"] = tuple(_act_from_dict(a) for a in d["script"])
            if "drift" in d:
                d["drift"] = DriftSpec(**d["drift"])
            if "noise" in d:
                d["noise"] = NoiseSpec(**d["noise"])
            if "wrists" in d:
                d["wrists"] = tuple(d["wrists"])
            cfg = cls(**d)
        except (TypeError, KeyError, ValueError) as exc:
            raise InvalidConfig(str(exc)) from None
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "SimConfig":
        try:
            raw = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise InvalidConfig(f"{path}: {exc}") from None
        return cls.from_dict(raw)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")


def _act_to_dict(a: Activity) -> dict:
    kind = {Stand: "stand", Walk: "walk", LiftSet: "lift"}[type(a)]
    return {"type": kind, **asdict(a)}


def _act_from_dict(d: dict) -> Activity:
    d = dict(d)
    kind = d.pop("type")
    if kind == "stand":
        return Stand(float(d["duration"]))
    if kind == "walk":
        return Walk(float(d["duration"]), d.get("speed", "normal"))
    if kind == "lift":
        if "level_in" in d:
            d["level_cm"] = float(d.pop("level_in")) * CM_PER_INCH
        return LiftSet(**d)
    raise InvalidConfig(f"unknown activity type {kind!r}")


# -- scripts ---------------------------------------------------------------------


def walking_protocol(stand_s: float = 30.0, walk_s: float = 60.0) -> tuple:
    """Standing then one walking section per speed class."""
    return (Stand(stand_s), *(Walk(walk_s, s) for s in SPEEDS), Stand(5.0))


def lift_protocol(repetitions: int = 5, stand_s: float = 10.0) -> tuple:
    """Standing then a lift set at each of the four load levels."""
    return (Stand(stand_s), *(LiftSet(level, repetitions) for level in LEVELS))


# -- drift -----------------------------------------------------------------------


def drift_trace(t: np.ndarray, spec: DriftSpec, rng: np.random.Generator | int | None = None) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if len(t) == 0:
        return np.zeros(0)
    tr = t - t[0]
    d = spec.linear_pa_s * tr
    if spec.sin_amp_pa:
        d = d + spec.sin_amp_pa * np.sin(2 * np.pi * tr / spec.sin_period_s)
    if spec.rw_sigma > 0:
        rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
        steps = rng.normal(0.0, 1.0, len(t) - 1) * spec.rw_sigma * np.sqrt(np.diff(t))
        d = d + np.concatenate(([0.0], np.cumsum(steps)))
    return d


def inject_drift(stream: WristStream, spec: DriftSpec, seed: int | np.random.Generator | None = 0):
    """Add environmental drift to a pressure stream; returns (stream, drift)."""
    d = drift_trace(stream.t, spec, seed)
    return stream.with_pressure(stream.pressure + d), d


# -- generation --------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class GroundTruth:
    t: np.ndarray  # wrist timeline
    wrist_height: np.ndarray
    load_height: np.ndarray  # NaN outside load holds
    pitch: dict  # Side -> noiseless pitch
    eligible: dict  # Side -> bool mask of anchor-eligible wrist samples
    intervals: list  # activity + per-foot Swing / FootFlat / StanceOther
    cycles: dict  # Side -> list of (heel strike, next heel strike)
    annotations: list
    drift: np.ndarray
    insole_t: np.ndarray

    def as_trace(self) -> TruthTrace:
        return TruthTrace(self.t, self.wrist_height, self.load_height)


@dataclass(frozen=True, eq=False)
class SimSession:
    config: SimConfig
    wrist: dict
    insole: dict
    truth: GroundTruth

    @property
    def known_height(self) -> float:
        return self.config.true_wrist_ratio * self.config.body_height


def _bump(s: np.ndarray, a: float, b: float) -> np.ndarray:
    inside = (s >= a) & (s <= b)
    return np.where(inside, np.sin(np.pi * np.clip((s - a) / (b - a), 0, 1)), 0.0)


def _ramp(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1 - np.cos(np.pi * np.clip(x, 0, 1)))


def generate_session(cfg: SimConfig) -> SimSession:
    cfg.validate()
    ss = np.random.SeedSequence(cfg.seed)
    kids = ss.spawn(7)
    rng_drift = np.random.default_rng(kids[0])
    rng_p = {Side.LEFT: np.random.default_rng(kids[1]), Side.RIGHT: np.random.default_rng(kids[2])}
    rng_a = {Side.LEFT: np.random.default_rng(kids[3]), Side.RIGHT: np.random.default_rng(kids[4])}
    rng_g = {Side.LEFT: np.random.default_rng(kids[5]), Side.RIGHT: np.random.default_rng(kids[6])}

    D = cfg.duration
    tw = np.arange(int(round(D * cfg.wrist_rate))) / cfg.wrist_rate
    ti = np.arange(int(round(D * cfg.insole_rate))) / cfg.insole_rate
    H = cfg.true_wrist_ratio * cfg.body_height
    W = cfg.body_mass * G0

    height = np.full(len(tw), H)
    load = np.full(len(tw), np.nan)
    pitch = {s: np.full(len(tw), cfg.stand_pitch) for s in (Side.LEFT, Side.RIGHT)}
    standing_w = np.zeros(len(tw), dtype=bool)
    walking_w = np.zeros(len(tw), dtype=bool)
    # region forces per foot on the insole timeline
    force = {s: {r: np.zeros(len(ti)) for r in (Region.HEEL, Region.MIDFOOT, Region.FOREFOOT)} for s in (Side.LEFT, Side.RIGHT)}
    stance = {s: np.zeros(len(ti), dtype=bool) for s in force}
    standing_i = np.zeros(len(ti), dtype=bool)
    walking_i = np.zeros(len(ti), dtype=bool)
    activity, annotations = [], []
    cycles = {Side.LEFT: [], Side.RIGHT: []}

    share = {Region.HEEL: 0.45, Region.MIDFOOT: 0.15, Region.FOREFOOT: 0.40}
    sf = cfg.stance_fraction

    start = 0.0
    for act in cfg.script:
        dur = cfg.activity_duration(act)
        end = start + dur
        sel_w = (tw >= start) & (tw < end)
        sel_i = (ti >= start) & (ti < end)
        if isinstance(act, (Stand, LiftSet)):
            standing_w |= sel_w
            standing_i |= sel_i
            for s in force:
                for r, f in share.items():
                    force[s][r][sel_i] = f * W / 2
                stance[s][sel_i] = True
            activity.append((start, end, Label.STANDING))
        if isinstance(act, Stand):
            annotations.append(Annotation(start, end, "stand"))
        elif isinstance(act, Walk):
            T = cfg.cycle_s[act.speed]
            amp = cfg.arm_swing[act.speed]
            walking_w |= sel_w
            walking_i |= sel_i
            offsets = {Side.LEFT: 0.0, Side.RIGHT: T / 2}
            for foot, off in offsets.items():
                phase = np.mod(ti[sel_i] - start - off, T) / T
                s = phase / sf
                on = phase < sf
                force[foot][Region.HEEL][sel_i] = np.where(on, 0.75 * W * _bump(s, 0.0, 0.65), 0.0)
                force[foot][Region.MIDFOOT][sel_i] = np.where(on, 0.20 * W * _bump(s, 0.10, 0.80), 0.0)
                force[foot][Region.FOREFOOT][sel_i] = np.where(on, 0.80 * W * _bump(s, 0.25, 1.0), 0.0)
                stance[foot][sel_i] = on
                hs = start + off + T * np.arange(int(np.ceil(dur / T)) + 1)
                hs = hs[hs < end]
                cycles[foot] += [(float(a), float(b)) for a, b in zip(hs[:-1], hs[1:])]
            # each wrist peaks at mid-stance of the opposite foot
            for wrist, opp in ((Side.RIGHT, Side.LEFT), (Side.LEFT, Side.RIGHT)):
                peak = start + offsets[opp] + 0.5 * sf * T
                pitch[wrist][sel_w] = cfg.walk_pitch_center + amp * np.cos(2 * np.pi * (tw[sel_w] - peak) / T)
            activity.append((start, end, Label.WALKING))
            annotations.append(Annotation(start, end, f"walk:{act.speed}"))
        elif isinstance(act, LiftSet):
            level_cm = act.level_cm if act.level_cm is not None else cfg.level_cm[act.level]
            target = level_cm + cfg.wrist_offsets[act.level]
            lp = cfg.lift_pitch[act.level]
            tr = cfg.lift_transition_s
            u = start
            for _ in range(act.repetitions):
                down = (tw >= u) & (tw < u + tr)
                hold = (tw >= u + tr) & (tw < u + tr + act.hold_s)
                up = (tw >= u + tr + act.hold_s) & (tw < u + 2 * tr + act.hold_s)
                x_down = _ramp((tw[down] - u) / tr) if tr > 0 else 1.0
                x_up = 1 - _ramp((tw[up] - u - tr - act.hold_s) / tr) if tr > 0 else 0.0
                for sel, x in ((down, x_down), (up, x_up)):
                    height[sel] = H + (target - H) * x
                    for wr in pitch:
                        pitch[wr][sel] = cfg.stand_pitch + (lp - cfg.stand_pitch) * x
                height[hold] = target
                load[hold] = level_cm
                for wr in pitch:
                    pitch[wr][hold] = lp
                annotations.append(Annotation(u + tr, u + tr + act.hold_s, f"lift:{act.level}"))
                u += 2 * tr + act.hold_s + act.rest_s
        start = end

    # noiseless gait labels
    rmap = default_region_map()
    intervals = [IntervalLabel(a, b, Side.BOTH, lab) for a, b, lab in activity]
    foot_flat_i = {}
    for s in force:
        ff = walking_i & (force[s][Region.HEEL] > 0) & (force[s][Region.FOREFOOT] > 0)
        foot_flat_i[s] = ff
        intervals += mask_to_intervals(ti, walking_i & ~stance[s], s, Label.SWING)
        intervals += mask_to_intervals(ti, ff, s, Label.FOOT_FLAT)
        intervals += mask_to_intervals(ti, walking_i & stance[s] & ~ff, s, Label.STANCE_OTHER)
    intervals.sort(key=lambda iv: (iv.start, iv.side.value, iv.label.value))

    # eligibility on the wrist timeline
    idx = np.clip(np.searchsorted(ti, tw), 0, len(ti) - 1)
    any_ff = foot_flat_i[Side.LEFT][idx] | foot_flat_i[Side.RIGHT][idx]
    thr = cfg.eligibility_threshold
    eligible = {
        s: (pitch[s] > thr) & ((standing_w & (height == H)) | (walking_w & any_ff)) for s in pitch
    }

    drift = drift_trace(tw, cfg.drift, rng_drift)
    wrists = {}
    for s in (Side.LEFT, Side.RIGHT):
        p_noise = rng_p[s].normal(0.0, 1.0, len(tw)) * cfg.noise.pressure_pa
        a_noise = rng_a[s].normal(0.0, 1.0, len(tw)) * cfg.noise.pitch_deg
        if s.value not in cfg.wrists:
            continue
        pressure = cfg.p0 + height / cfg.a_true + drift + p_noise
        wrists[s] = WristStream(tw, pressure, np.clip(pitch[s] + a_noise, -180, 180), s)

    insoles = {}
    for s in (Side.LEFT, Side.RIGHT):
        cells = np.zeros((len(ti), N_CELLS))
        for r in (Region.HEEL, Region.MIDFOOT, Region.FOREFOOT):
            cols = [k for k, lab in enumerate(rmap) if lab is r]
            cells[:, cols] = (force[s][r] / len(cols))[:, None]
        cells += rng_g[s].normal(0.0, 1.0, cells.shape) * cfg.noise.grf_n
        insoles[s] = InsoleStream(ti, np.clip(cells, 0.0, None), s, rmap)

    truth = GroundTruth(
        t=tw, wrist_height=height, load_height=load, pitch=pitch, eligible=eligible,
        intervals=intervals, cycles=cycles, annotations=annotations, drift=drift, insole_t=ti,
    )
    return SimSession(cfg, wrists, insoles, truth)


def write_session(sim: SimSession, out_dir, subject_id: str | None = None) -> Path:
    """Write CSV streams, truth, annotations and a manifest; returns the manifest path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    wrist_files, insole_files = [], []
    for s, w in sorted(sim.wrist.items(), key=lambda kv: kv[0].value):
        name = f"wrist_{s.value}.csv"
        write_stream(w, out / name)
        wrist_files.append(name)
    for s, ins in sorted(sim.insole.items(), key=lambda kv: kv[0].value):
        name = f"insole_{s.value}.csv"
        write_stream(ins, out / name)
        insole_files.append(name)
    write_stream(sim.truth.as_trace(), out / "truth.csv")
    write_annotations(sim.truth.annotations, out / "annotations.csv")
    write_intervals(sim.truth.intervals, out / "truth_intervals.csv")
    sim.config.save(out / "sim_config.json")
    manifest = out / "manifest.json"
    write_manifest(
        manifest,
        subject_id or f"sim{sim.config.seed}",
        sim.config.body_height,
        wrist_files,
        insole_files,
        truth="truth.csv",
        annotations="annotations.csv",
    )
    return manifest


def with_overrides(cfg: SimConfig, **kw) -> SimConfig:
    return replace(cfg, **kw)
