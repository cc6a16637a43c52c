"""Session files, multi-rate alignment and pressure smoothing."""

from __future__ import annotations

import csv
import enum
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import (
    BadFieldCount,
    BadSide,
    EvenWindow,
    MalformedHeader,
    ManifestError,
    MixedSides,
    NonNumericValue,
    NoTemporalOverlap,
)
from .model import (
    N_CELLS,
    Anthropometry,
    InsoleStream,
    Session,
    Side,
    WristStream,
    default_region_map,
    load_region_map,
    validate_session,
)

log = logging.getLogger(__name__)

DEFAULT_SMOOTH_WINDOW = 41
MAX_GAP_S = 1.0

WRIST_HEADER = ["t", "pressure_pa", "pitch_deg", "side"]
INSOLE_HEADER = ["t", "side"] + [f"c{i:02d}" for i in range(N_CELLS)]
TRUTH_HEADER = ["t", "wrist_height_cm"]
TRUTH_HEADER_LOAD = TRUTH_HEADER + ["load_height_cm"]
ANNOTATION_HEADER = ["start", "end", "label"]


class StreamKind(str, enum.Enum):
    WRIST = "wrist"
    INSOLE = "insole"
    GROUND_TRUTH = "truth"


@dataclass(frozen=True, eq=False)
class TruthTrace:
    t: np.ndarray
    wrist_height: np.ndarray
    load_height: np.ndarray | None = None

    def __len__(self):
        return len(self.t)


@dataclass(frozen=True)
class Annotation:
    start: float
    end: float
    label: str


def fmt(x: float) -> str:
    """Shortest round-tripping text for a float."""
    return repr(float(x))


def _num(value: str, line: int, column: str) -> float:
    try:
        return float(value)
    except ValueError:
        raise NonNumericValue(line, column, value) from None


def _side(value: str, line: int) -> Side:
    try:
        side = Side.parse(value)
    except ValueError:
        raise BadSide(line, "side", value) from None
    if side is Side.BOTH:
        raise BadSide(line, "side", value)
    return side


def _rows(path, header_options: Sequence[list[str]]):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise MalformedHeader(f"{path}: empty file") from None
        if header not in header_options:
            raise MalformedHeader(f"{path}: unexpected header {header[:6]}...")
        rows = [(n, row) for n, row in enumerate(reader, start=2) if row]
    return header, rows


def parse_stream(path, kind, side: Side | str | None = None, region_map=None):
    """Read one stream file.

    ``side`` only matters for header-only files, which carry no side column
    values; it defaults to Left there.
    """
    kind = StreamKind(kind)
    if kind is StreamKind.WRIST:
        return _parse_wrist(path, side)
    if kind is StreamKind.INSOLE:
        return _parse_insole(path, side, region_map or default_region_map())
    return _parse_truth(path)


def _one_side(sides: set, fallback, path) -> Side:
    if len(sides) > 1:
        raise MixedSides(f"{path}: rows for several sides")
    if sides:
        return sides.pop()
    return Side.parse(fallback) if fallback is not None else Side.LEFT


def _parse_wrist(path, side) -> WristStream:
    _, rows = _rows(path, [WRIST_HEADER])
    t, p, a, sides = [], [], [], set()
    for n, row in rows:
        if len(row) != len(WRIST_HEADER):
            raise BadFieldCount(n, len(WRIST_HEADER), len(row))
        t.append(_num(row[0], n, "t"))
        p.append(_num(row[1], n, "pressure_pa"))
        a.append(_num(row[2], n, "pitch_deg"))
        sides.add(_side(row[3], n))
    return WristStream(np.array(t), np.array(p), np.array(a), _one_side(sides, side, path))


def _parse_insole(path, side, region_map) -> InsoleStream:
    _, rows = _rows(path, [INSOLE_HEADER])
    t, cells, sides = [], [], set()
    for n, row in rows:
        if len(row) != len(INSOLE_HEADER):
            raise BadFieldCount(n, len(INSOLE_HEADER), len(row))
        t.append(_num(row[0], n, "t"))
        sides.add(_side(row[1], n))
        cells.append([_num(v, n, INSOLE_HEADER[k + 2]) for k, v in enumerate(row[2:])])
    cells = np.array(cells, dtype=float).reshape(-1, N_CELLS)
    return InsoleStream(np.array(t), cells, _one_side(sides, side, path), region_map)


def _parse_truth(path) -> TruthTrace:
    header, rows = _rows(path, [TRUTH_HEADER, TRUTH_HEADER_LOAD])
    width = len(header)
    data = []
    for n, row in rows:
        if len(row) != width:
            raise BadFieldCount(n, width, len(row))
        data.append([_num(v, n, header[k]) for k, v in enumerate(row)])
    arr = np.array(data, dtype=float).reshape(-1, width)
    load = arr[:, 2] if width == 3 else None
    return TruthTrace(arr[:, 0], arr[:, 1], load)


def write_stream(stream, path) -> None:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if isinstance(stream, WristStream):
            w.writerow(WRIST_HEADER)
            s = stream.side.value
            for t, p, a in zip(stream.t, stream.pressure, stream.pitch):
                w.writerow([fmt(t), fmt(p), fmt(a), s])
        elif isinstance(stream, InsoleStream):
            w.writerow(INSOLE_HEADER)
            s = stream.side.value
            for t, row in zip(stream.t, stream.cells):
                w.writerow([fmt(t), s, *map(fmt, row)])
        elif isinstance(stream, TruthTrace):
            has_load = stream.load_height is not None
            w.writerow(TRUTH_HEADER_LOAD if has_load else TRUTH_HEADER)
            for k in range(len(stream.t)):
                row = [fmt(stream.t[k]), fmt(stream.wrist_height[k])]
                if has_load:
                    row.append(fmt(stream.load_height[k]))
                w.writerow(row)
        else:
            raise TypeError(f"cannot serialize {type(stream).__name__}")


def read_annotations(path) -> list[Annotation]:
    _, rows = _rows(path, [ANNOTATION_HEADER])
    out = []
    for n, row in rows:
        if len(row) != 3:
            raise BadFieldCount(n, 3, len(row))
        out.append(Annotation(_num(row[0], n, "start"), _num(row[1], n, "end"), row[2].strip()))
    return out


def write_annotations(annotations: Sequence[Annotation], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ANNOTATION_HEADER)
        for a in annotations:
            w.writerow([fmt(a.start), fmt(a.end), a.label])


# -- alignment -------------------------------------------------------------------


def reference_timeline(streams, reference_rate: float) -> np.ndarray:
    starts = [s.t[0] for s in streams]
    ends = [s.t[-1] for s in streams]
    t0, t1 = max(starts), min(ends)
    if t0 > t1:
        raise NoTemporalOverlap(f"streams share no time range ({t0:.3f} > {t1:.3f})")
    n = int(np.floor((t1 - t0) * reference_rate + 1e-9)) + 1
    return t0 + np.arange(n) / reference_rate


def align(streams, reference_rate: float):
    """Nearest-neighbor resampling onto a shared timeline.

    A reference instant with no sample within half a reference period is
    marked missing (NaN values, ``missing`` mask set).
    """
    streams = list(streams)
    if any(len(s) == 0 for s in streams):
        raise NoTemporalOverlap("empty stream")
    ref = reference_timeline(streams, reference_rate)
    tol = 0.5 / reference_rate + 1e-9
    out = []
    for s in streams:
        idx = np.searchsorted(s.t, ref)
        lo = np.clip(idx - 1, 0, len(s) - 1)
        hi = np.clip(idx, 0, len(s) - 1)
        # ties go to the earlier sample
        pick = np.where(np.abs(s.t[hi] - ref) < np.abs(ref - s.t[lo]), hi, lo)
        missing = np.abs(s.t[pick] - ref) > tol
        if s.missing is not None:
            missing |= s.missing[pick]
        if isinstance(s, WristStream):
            p = np.where(missing, np.nan, s.pressure[pick])
            a = np.where(missing, np.nan, s.pitch[pick])
            out.append(WristStream(ref, p, a, s.side, missing))
        else:
            cells = np.where(missing[:, None], np.nan, s.cells[pick])
            out.append(InsoleStream(ref, cells, s.side, s.region_map, missing))
    return out


def split_segments(t: np.ndarray, max_gap: float = MAX_GAP_S) -> list[slice]:
    """Index slices of runs separated by gaps longer than ``max_gap`` seconds."""
    t = np.asarray(t)
    if len(t) == 0:
        return []
    cuts = np.flatnonzero(np.diff(t) > max_gap) + 1
    bounds = [0, *cuts.tolist(), len(t)]
    return [slice(a, b) for a, b in zip(bounds[:-1], bounds[1:])]


# -- smoothing --------------------------------------------------------------------


def moving_average(x: np.ndarray, window: int) -> np.ndarray:
    """Centered moving average; windows are truncated at the edges.

    NaN entries are skipped and stay NaN in the output.
    """
    if window < 1 or window % 2 == 0:
        raise EvenWindow(f"window must be odd and >= 1, got {window}")
    x = np.asarray(x, dtype=float)
    if window == 1 or len(x) == 0:
        return x.copy()
    valid = np.isfinite(x)
    if not valid.any():
        return x.copy()
    ref = x[valid][0]
    v = np.where(valid, x - ref, 0.0)
    c = np.concatenate(([0.0], np.cumsum(v)))
    k = np.concatenate(([0], np.cumsum(valid)))
    h = window // 2
    i = np.arange(len(x))
    lo = np.maximum(i - h, 0)
    hi = np.minimum(i + h + 1, len(x))
    cnt = k[hi] - k[lo]
    with np.errstate(invalid="ignore", divide="ignore"):
        out = ref + (c[hi] - c[lo]) / cnt
    out[~valid] = np.nan
    return out


def smooth_pressure(stream: WristStream, window: int = DEFAULT_SMOOTH_WINDOW) -> WristStream:
    return stream.with_pressure(moving_average(stream.pressure, window))


# -- manifests ---------------------------------------------------------------------


@dataclass(frozen=True)
class SessionManifest:
    subject_id: str
    body_height: float
    wrist: tuple[Path, ...]
    insole: tuple[Path, ...]
    truth: Path | None = None
    annotations: Path | None = None
    region_map: Path | None = None
    wrist_ratio: float | None = None
    angle_calibration: tuple[float, float] | None = None
    extra: dict = field(default_factory=dict)


def load_manifest(path) -> SessionManifest:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ManifestError(f"{path}: {exc}") from None
    base = path.parent

    def rel(p):
        return None if p is None else (base / p).resolve()

    try:
        body = float(raw["body_height_cm"])
        wrist = tuple(rel(p) for p in raw["wrist"])
        insole = tuple(rel(p) for p in raw["insole"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ManifestError(f"{path}: missing or invalid field {exc}") from None
    if body <= 0:
        raise ManifestError(f"{path}: body_height_cm must be positive")
    cal = raw.get("angle_calibration")
    if cal is not None:
        cal = (float(cal["start"]), float(cal["end"]))
    m = SessionManifest(
        subject_id=str(raw.get("subject_id", path.stem)),
        body_height=body,
        wrist=wrist,
        insole=insole,
        truth=rel(raw.get("truth")),
        annotations=rel(raw.get("annotations")),
        region_map=rel(raw.get("region_map")),
        wrist_ratio=raw.get("wrist_ratio"),
        angle_calibration=cal,
        extra={k: v for k, v in raw.items() if k.startswith("x_")},
    )
    for p in [*m.wrist, *m.insole, m.truth, m.annotations, m.region_map]:
        if p is not None and not p.exists():
            raise ManifestError(f"{path}: referenced file {p} does not exist")
    return m


def write_manifest(path, subject_id: str, body_height: float, wrist, insole, truth=None,
                   annotations=None, **extra) -> None:
    doc = {
        "subject_id": subject_id,
        "body_height_cm": body_height,
        "wrist": [str(p) for p in wrist],
        "insole": [str(p) for p in insole],
    }
    if truth is not None:
        doc["truth"] = str(truth)
    if annotations is not None:
        doc["annotations"] = str(annotations)
    doc.update(extra)
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


@dataclass(frozen=True, eq=False)
class LoadedSession:
    manifest: SessionManifest
    session: Session
    truth: TruthTrace | None
    annotations: list[Annotation]


def load_session(manifest: SessionManifest, wrist_ratio: float | None = None) -> LoadedSession:
    region_map = load_region_map(manifest.region_map) if manifest.region_map else default_region_map()
    wrist = [parse_stream(p, StreamKind.WRIST) for p in manifest.wrist]
    insole = [parse_stream(p, StreamKind.INSOLE, region_map=region_map) for p in manifest.insole]
    ratio = wrist_ratio or manifest.wrist_ratio
    anthro = Anthropometry(manifest.body_height, *([float(ratio)] if ratio else []))
    session = validate_session(wrist, insole, anthro)
    truth = parse_stream(manifest.truth, StreamKind.GROUND_TRUTH) if manifest.truth else None
    ann = read_annotations(manifest.annotations) if manifest.annotations else []
    return LoadedSession(manifest, session, truth, ann)


__all__ = [
    "Annotation",
    "LoadedSession",
    "SessionManifest",
    "StreamKind",
    "TruthTrace",
    "align",
    "load_manifest",
    "load_session",
    "moving_average",
    "parse_stream",
    "read_annotations",
    "smooth_pressure",
    "split_segments",
    "write_annotations",
    "write_manifest",
    "write_stream",
]
