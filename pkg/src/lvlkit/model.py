"""Shared domain types, units and interval algebra.

Internal units are fixed: pascals, centimeters, seconds, degrees, newtons.
Streams are stored column-wise as read-only numpy arrays; indexing a stream
yields the per-sample dataclass.
"""

from __future__ import annotations

import enum
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import EmptyStream, MissingAnthropometry, NonMonotonicTime, OutOfRange

log = logging.getLogger(__name__)

N_CELLS = 96
CM_PER_INCH = 2.54
RHO_AIR = 1.225  # kg/m^3, sea-level standard atmosphere
G0 = 9.80665  # m/s^2
# dh/dP = -1/(rho g), converted from m/Pa to cm/Pa
HYDROSTATIC_A = -100.0 / (RHO_AIR * G0)
DEFAULT_WRIST_RATIO = 0.495
DEFAULT_ANGLE_THRESHOLD = 58.5
PRESSURE_RANGE = (30_000.0, 110_000.0)
PITCH_RANGE = (-180.0, 180.0)

_EPS_T = 1e-9


class Side(str, enum.Enum):
    LEFT = "L"
    RIGHT = "R"
    BOTH = "Both"

    @classmethod
    def parse(cls, value) -> "Side":
        if isinstance(value, Side):
            return value
        v = str(value).strip()
        table = {"l": cls.LEFT, "left": cls.LEFT, "r": cls.RIGHT, "right": cls.RIGHT, "both": cls.BOTH}
        try:
            return table[v.lower()]
        except KeyError:
            raise ValueError(f"unknown side {value!r}") from None


class Label(str, enum.Enum):
    SWING = "Swing"
    FOOT_FLAT = "FootFlat"
    STANCE_OTHER = "StanceOther"
    STANDING = "Standing"
    WALKING = "Walking"
    UNKNOWN = "Unknown"


class Source(str, enum.Enum):
    STANDING = "Standing"
    RF = "RF"
    LF = "LF"

    @classmethod
    def for_foot(cls, foot: Side) -> "Source":
        return cls.RF if foot is Side.RIGHT else cls.LF


class Region(str, enum.Enum):
    HEEL = "Heel"
    MIDFOOT = "Midfoot"
    FOREFOOT = "Forefoot"
    TOTAL = "Total"


# -- region map ---------------------------------------------------------------

_ROWS, _COLS = 16, 6


def default_region_map() -> tuple[Region, ...]:
    """Cells ordered toe to heel, 6 per row over 16 rows.

    A row whose center lies in the front 40% of the insole is Forefoot, in
    the rear 30% Heel, otherwise Midfoot (36 / 30 / 30 cells).
    """
    labels = []
    for i in range(N_CELLS):
        pos = (i // _COLS + 0.5) / _ROWS
        if pos < 0.4:
            labels.append(Region.FOREFOOT)
        elif pos > 0.7:
            labels.append(Region.HEEL)
        else:
            labels.append(Region.MIDFOOT)
    return tuple(labels)


def load_region_map(path) -> tuple[Region, ...]:
    """Read a JSON list of 96 region names (``Heel``/``Midfoot``/``Forefoot``)."""
    raw = json.loads(Path(path).read_text())
    if isinstance(raw, Mapping):
        raw = raw["labels"]
    labels = tuple(Region(str(x).capitalize()) for x in raw)
    _check_region_map(labels)
    return labels


def _check_region_map(labels: Sequence[Region]) -> None:
    if len(labels) != N_CELLS:
        raise ValueError(f"region map needs {N_CELLS} labels, got {len(labels)}")
    if any(r is Region.TOTAL for r in labels):
        raise ValueError("Total is not a cell label")


def _frozen(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


# -- samples and streams --------------------------------------------------------


@dataclass(frozen=True)
class WristSample:
    t: float
    pressure: float
    pitch: float
    side: Side


@dataclass(frozen=True)
class InsoleSample:
    t: float
    cells: np.ndarray
    side: Side
    region_map: tuple[Region, ...] = field(default_factory=default_region_map)


@dataclass(frozen=True, eq=False)
class WristStream:
    t: np.ndarray
    pressure: np.ndarray
    pitch: np.ndarray
    side: Side
    missing: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "t", _frozen(self.t))
        object.__setattr__(self, "pressure", _frozen(self.pressure))
        object.__setattr__(self, "pitch", _frozen(self.pitch))
        object.__setattr__(self, "side", Side.parse(self.side))
        if self.missing is not None:
            object.__setattr__(self, "missing", _frozen(self.missing, bool))
        n = len(self.t)
        if len(self.pressure) != n or len(self.pitch) != n:
            raise ValueError("wrist columns differ in length")

    def __len__(self) -> int:
        return len(self.t)

    def __getitem__(self, i) -> WristSample:
        return WristSample(float(self.t[i]), float(self.pressure[i]), float(self.pitch[i]), self.side)

    def select(self, idx) -> "WristStream":
        miss = None if self.missing is None else self.missing[idx]
        return WristStream(self.t[idx], self.pressure[idx], self.pitch[idx], self.side, miss)

    def with_pressure(self, pressure) -> "WristStream":
        return WristStream(self.t, pressure, self.pitch, self.side, self.missing)

    def equals(self, other: "WristStream") -> bool:
        return (
            self.side is other.side
            and np.array_equal(self.t, other.t)
            and np.array_equal(self.pressure, other.pressure, equal_nan=True)
            and np.array_equal(self.pitch, other.pitch, equal_nan=True)
        )


@dataclass(frozen=True, eq=False)
class InsoleStream:
    t: np.ndarray
    cells: np.ndarray  # (n, 96) newtons
    side: Side
    region_map: tuple[Region, ...] = field(default_factory=default_region_map)
    missing: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "t", _frozen(self.t))
        cells = np.array(self.cells, dtype=float).reshape(-1, N_CELLS) if len(self.t) else np.zeros((0, N_CELLS))
        cells.setflags(write=False)
        object.__setattr__(self, "cells", cells)
        object.__setattr__(self, "side", Side.parse(self.side))
        object.__setattr__(self, "region_map", tuple(Region(r) for r in self.region_map))
        _check_region_map(self.region_map)
        if self.missing is not None:
            object.__setattr__(self, "missing", _frozen(self.missing, bool))
        if len(cells) != len(self.t):
            raise ValueError("insole cells and timestamps differ in length")

    def __len__(self) -> int:
        return len(self.t)

    def __getitem__(self, i) -> InsoleSample:
        return InsoleSample(float(self.t[i]), self.cells[i], self.side, self.region_map)

    def select(self, idx) -> "InsoleStream":
        miss = None if self.missing is None else self.missing[idx]
        return InsoleStream(self.t[idx], self.cells[idx], self.side, self.region_map, miss)

    def region_mask(self, region: Region) -> np.ndarray:
        region = Region(region)
        if region is Region.TOTAL:
            return np.ones(N_CELLS, dtype=bool)
        return np.array([r is region for r in self.region_map])

    def grf(self, region: Region) -> np.ndarray:
        """Per-sample summed force over ``region``; missing rows give NaN."""
        return self.cells[:, self.region_mask(region)].sum(axis=1)

    def equals(self, other: "InsoleStream") -> bool:
        return (
            self.side is other.side
            and self.region_map == other.region_map
            and np.array_equal(self.t, other.t)
            and np.array_equal(self.cells, other.cells, equal_nan=True)
        )


def region_grf(sample: InsoleSample, region: Region) -> float:
    region = Region(region)
    cells = np.asarray(sample.cells, dtype=float)
    if region is Region.TOTAL:
        return float(cells.sum())
    mask = np.array([r is region for r in sample.region_map])
    return float(cells[mask].sum())


# -- intervals -------------------------------------------------------------------


@dataclass(frozen=True, order=True)
class IntervalLabel:
    """Half-open ``[start, end)`` time interval."""

    start: float
    end: float
    side: Side
    label: Label

    def __post_init__(self):
        object.__setattr__(self, "side", Side.parse(self.side))
        object.__setattr__(self, "label", Label(self.label))
        if not self.start < self.end:
            raise ValueError(f"interval start {self.start} must precede end {self.end}")

    @property
    def duration(self) -> float:
        return self.end - self.start

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.start + self.end)

    def contains(self, t) -> np.ndarray | bool:
        return (t >= self.start) & (t < self.end)

    def overlaps(self, other: "IntervalLabel") -> bool:
        return self.start < other.end and other.start < self.end

    def within(self, start: float, end: float, tol: float = _EPS_T) -> bool:
        return self.start >= start - tol and self.end <= end + tol


def sample_period(t: np.ndarray) -> float:
    if len(t) < 2:
        return 0.0
    return float(np.median(np.diff(t)))


def mask_to_intervals(
    t: np.ndarray,
    mask: np.ndarray,
    side: Side,
    label: Label,
    min_duration: float = 0.0,
) -> list[IntervalLabel]:
    """Turn runs of True samples into half-open intervals.

    A run over samples ``i..j`` spans ``[t[i], t[j+1])``; the final sample is
    extended by the median sample period.
    """
    t = np.asarray(t, dtype=float)
    mask = np.asarray(mask, dtype=bool)
    if len(t) == 0 or not mask.any():
        return []
    dt = sample_period(t) or 1.0
    padded = np.concatenate(([False], mask, [False]))
    edges = np.flatnonzero(np.diff(padded.astype(np.int8)))
    starts, stops = edges[0::2], edges[1::2]  # stop is exclusive sample index
    out = []
    for i, j in zip(starts, stops):
        end = t[j] if j < len(t) else t[-1] + dt
        start = t[i]
        if end - start + _EPS_T >= min_duration and end > start:
            out.append(IntervalLabel(float(start), float(end), side, label))
    return out


def intervals_mask(t: np.ndarray, intervals: Iterable[IntervalLabel]) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    mask = np.zeros(len(t), dtype=bool)
    for iv in intervals:
        lo = np.searchsorted(t, iv.start, side="left")
        hi = np.searchsorted(t, iv.end, side="left")
        mask[lo:hi] = True
    return mask


def intervals_overlap(a: Iterable[IntervalLabel], b: Iterable[IntervalLabel]) -> float:
    """Total overlap duration between two interval collections."""
    total = 0.0
    b = list(b)
    for x in a:
        for y in b:
            lo, hi = max(x.start, y.start), min(x.end, y.end)
            if hi > lo:
                total += hi - lo
    return total


# -- calibration types -------------------------------------------------------------


@dataclass(frozen=True)
class Anthropometry:
    body_height: float  # cm
    wrist_ratio: float = DEFAULT_WRIST_RATIO

    def __post_init__(self):
        if not self.body_height > 0:
            raise ValueError("body_height must be positive")
        if not 0 < self.wrist_ratio < 1:
            raise ValueError("wrist_ratio must lie in (0, 1)")

    @property
    def wrist_height(self) -> float:
        return self.wrist_ratio * self.body_height


@dataclass(frozen=True, order=True)
class KvluPoint:
    t: float
    wrist_side: Side
    source: Source
    anchor_pressure: float  # Pa
    known_height: float  # cm

    def __post_init__(self):
        object.__setattr__(self, "wrist_side", Side.parse(self.wrist_side))
        object.__setattr__(self, "source", Source(self.source))


@dataclass(frozen=True)
class PressureHeightModel:
    a: float = HYDROSTATIC_A  # cm per Pa
    b: float = 0.0  # cm

    def __post_init__(self):
        if not self.a < 0:
            raise ValueError("pressure-height slope must be negative")


@dataclass(frozen=True, eq=False)
class LvlTrace:
    t: np.ndarray
    lvl: np.ndarray
    anchor_t: np.ndarray  # time of the anchor in effect, NaN if none
    side: Side
    mode: str = "realtime"
    proxy: bool = False
    n_omitted: int = 0
    anchors: tuple[KvluPoint, ...] = ()
    skipped: tuple[KvluPoint, ...] = ()
    model: PressureHeightModel = PressureHeightModel()

    def __post_init__(self):
        object.__setattr__(self, "t", _frozen(self.t))
        object.__setattr__(self, "lvl", _frozen(self.lvl))
        object.__setattr__(self, "anchor_t", _frozen(self.anchor_t))
        object.__setattr__(self, "side", Side.parse(self.side))
        if not (len(self.t) == len(self.lvl) == len(self.anchor_t)):
            raise ValueError("trace columns differ in length")
        if len(self.t) > 1 and np.any(np.diff(self.t) <= 0):
            raise ValueError("trace timestamps must be strictly increasing")

    def __len__(self) -> int:
        return len(self.t)

    def replace(self, **kw) -> "LvlTrace":
        fields = dict(
            t=self.t, lvl=self.lvl, anchor_t=self.anchor_t, side=self.side, mode=self.mode,
            proxy=self.proxy, n_omitted=self.n_omitted, anchors=self.anchors,
            skipped=self.skipped, model=self.model,
        )
        fields.update(kw)
        return LvlTrace(**fields)

    @staticmethod
    def concat(traces: Sequence["LvlTrace"]) -> "LvlTrace":
        if not traces:
            raise ValueError("nothing to concatenate")
        first = traces[0]
        return first.replace(
            t=np.concatenate([x.t for x in traces]),
            lvl=np.concatenate([x.lvl for x in traces]),
            anchor_t=np.concatenate([x.anchor_t for x in traces]),
            n_omitted=sum(x.n_omitted for x in traces),
            anchors=tuple(a for x in traces for a in x.anchors),
            skipped=tuple(a for x in traces for a in x.skipped),
        )


# -- session validation ------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Session:
    wrist: dict[Side, WristStream]
    insole: dict[Side, InsoleStream]
    anthropometry: Anthropometry
    counts: dict[str, int]
    rates: dict[str, float]
    warnings: tuple[str, ...] = ()


def _clean_times(t: np.ndarray, name: str, warnings: list[str]) -> np.ndarray:
    """Index array keeping the first of each run of equal timestamps."""
    if len(t) == 0:
        raise EmptyStream(f"{name} has no samples")
    d = np.diff(t)
    bad = np.flatnonzero(d < 0) + 1
    if len(bad):
        raise NonMonotonicTime(bad, name)
    dup = np.flatnonzero(d == 0) + 1
    if len(dup):
        msg = f"{name}: dropped {len(dup)} duplicate timestamp(s) at indices {dup.tolist()}"
        log.warning(msg)
        warnings.append(msg)
    keep = np.ones(len(t), dtype=bool)
    keep[dup] = False
    return np.flatnonzero(keep)


def _rate(t: np.ndarray) -> float:
    dt = sample_period(t)
    return 1.0 / dt if dt > 0 else float("nan")


def _by_side(streams) -> dict:
    if isinstance(streams, Mapping):
        streams = streams.values()
    out = {}
    for s in streams:
        if s.side in out:
            raise ValueError(f"two streams for side {s.side.value}")
        out[s.side] = s
    return out


def validate_session(wrist, insole, anthropometry: Anthropometry | None) -> Session:
    """Check and tidy one recording session.

    Duplicate timestamps are dropped (first kept) with a warning; decreasing
    timestamps raise :class:`NonMonotonicTime`.
    """
    if anthropometry is None:
        raise MissingAnthropometry("body height is required")
    wrist = _by_side(wrist)
    insole = _by_side(insole)
    if not wrist:
        raise EmptyStream("no wrist stream")
    for side in (Side.LEFT, Side.RIGHT):
        if side not in insole:
            raise EmptyStream(f"missing {side.value} insole stream")

    warnings: list[str] = []
    counts, rates = {}, {}
    w_out, i_out = {}, {}
    for side, s in sorted(wrist.items(), key=lambda kv: kv[0].value):
        name = f"wrist_{side.value}"
        keep = _clean_times(s.t, name, warnings)
        s = s.select(keep) if len(keep) != len(s) else s
        p, a = s.pressure, s.pitch
        if np.any((p < PRESSURE_RANGE[0]) | (p > PRESSURE_RANGE[1])):
            raise OutOfRange(f"{name}: pressure outside {PRESSURE_RANGE} Pa")
        if np.any((a < PITCH_RANGE[0]) | (a > PITCH_RANGE[1])):
            raise OutOfRange(f"{name}: pitch outside {PITCH_RANGE} deg")
        w_out[side] = s
        counts[name], rates[name] = len(s), _rate(s.t)
    for side in (Side.LEFT, Side.RIGHT):
        s = insole[side]
        name = f"insole_{side.value}"
        keep = _clean_times(s.t, name, warnings)
        s = s.select(keep) if len(keep) != len(s) else s
        if np.any(s.cells < 0):
            raise OutOfRange(f"{name}: negative cell force")
        i_out[side] = s
        counts[name], rates[name] = len(s), _rate(s.t)
    return Session(w_out, i_out, anthropometry, counts, rates, tuple(warnings))
