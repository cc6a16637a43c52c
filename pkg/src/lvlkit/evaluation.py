"""Error metrics, per-session evaluation and pooled reports."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import EmptyGroup, NoCycles, NonPositiveTruth
from .ingest import Annotation, TruthTrace
from .kvlu import COMBOS, kvlu_detection_rate
from .model import LvlTrace, Side, Source

OVERALL = "overall"
RNLE_CM_PER_PCT = 3.3
MODES = ("corrected", "realtime", "raw")


# -- metrics -------------------------------------------------------------------------


def _pairs(estimates, truth, groups):
    e = np.asarray(estimates, dtype=float)
    t = np.asarray(truth, dtype=float)
    if e.shape != t.shape:
        raise ValueError(f"estimates {e.shape} and truth {t.shape} differ in shape")
    g = np.full(e.shape, OVERALL, dtype=object) if groups is None else np.asarray(groups, dtype=object)
    ok = np.isfinite(e) & np.isfinite(t)
    return e[ok] - t[ok], g[ok], g


def _grouped(err: np.ndarray, g: np.ndarray, all_groups: np.ndarray, fn) -> dict:
    out = {}
    for key in dict.fromkeys(all_groups.tolist()):
        sel = err[g == key]
        if len(sel) == 0:
            raise EmptyGroup(f"group {key!r} has no finite pairs")
        out[key] = fn(sel)
    if len(err) == 0:
        raise EmptyGroup("no finite pairs")
    out[OVERALL] = fn(err)
    return out


def mae(estimates, truth, groups=None) -> dict:
    """Mean absolute error per group plus ``overall``."""
    err, g, allg = _pairs(estimates, truth, groups)
    return _grouped(err, g, allg, lambda x: float(np.mean(np.abs(x))))


def mean_error(estimates, truth, groups=None) -> dict:
    """Signed mean (estimate - truth) and population std per group."""
    err, g, allg = _pairs(estimates, truth, groups)
    return _grouped(err, g, allg, lambda x: (float(np.mean(x)), float(np.std(x))))


def accuracy_pct(estimated, true):
    est = np.asarray(estimated, dtype=float)
    tru = np.asarray(true, dtype=float)
    if np.any(tru <= 0):
        raise NonPositiveTruth("true height must be positive")
    out = 100.0 * (1.0 - np.abs(est - tru) / tru)
    return float(out) if out.ndim == 0 else out


def rnle_sensitivity(mae_cm: float) -> float:
    """Percent change in the lifting index implied by an LVL error."""
    if mae_cm < 0:
        raise ValueError("mae_cm must be non-negative")
    return mae_cm / RNLE_CM_PER_PCT


# -- per-session evaluation ------------------------------------------------------------


@dataclass
class SessionEval:
    subject_id: str
    wrist: str | None
    # errors[mode][target][level] -> list of signed errors (estimate - truth)
    errors: dict = field(default_factory=dict)
    # lift_errors[mode][level] -> one signed error per lift: hold-mean estimate - hold-mean load height
    lift_errors: dict = field(default_factory=dict)
    proxy_errors: dict = field(default_factory=dict)  # level -> wrist truth - load truth
    standing_anchor_errors: list = field(default_factory=list)
    standing_anchor_truth: list = field(default_factory=list)
    walking_anchor_errors: dict = field(default_factory=dict)  # speed -> combo -> list
    detection: list = field(default_factory=list)  # rows: speed, combo, rate_pct, cycles
    anchor_counts: dict = field(default_factory=dict)
    unavailable: list = field(default_factory=list)
    compare: dict | None = None  # t, raw, realtime, corrected, truth columns


    def to_dict(self) -> dict:
        d = asdict(self)
        if self.compare is not None:
            d["compare"] = {k: [None if not math.isfinite(x) else x for x in np.asarray(v, dtype=float).tolist()]
                            for k, v in self.compare.items()}
        return _clean(d)

    @classmethod
    def from_dict(cls, d: dict) -> "SessionEval":
        d = dict(d)
        if d.get("compare") is not None:
            d["compare"] = {k: np.array([np.nan if x is None else x for x in v], dtype=float)
                            for k, v in d["compare"].items()}
        return cls(**d)


def _labels(t: np.ndarray, annotations: Sequence[Annotation], prefix: str) -> np.ndarray:
    out = np.full(len(t), None, dtype=object)
    for a in annotations:
        if a.label.startswith(prefix):
            out[(t >= a.start) & (t < a.end)] = a.label[len(prefix):]
    return out


def _truth_at(truth: TruthTrace, t: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Truth values at the exact timestamps ``t``; NaN where truth has no sample."""
    i = np.clip(np.searchsorted(truth.t, t), 0, max(len(truth.t) - 1, 0))
    hit = np.abs(truth.t[i] - t) <= 1e-9 * np.maximum(1.0, np.abs(t))
    return np.where(hit, values[i], np.nan)


def _pick_wrist(result, preferred: str) -> Side | None:
    sides = sorted(result.corrected, key=lambda s: s.value)
    if not sides:
        return None
    pref = Side.parse(preferred)
    return pref if pref in result.corrected else sides[0]


def _errors_by_level(trace: LvlTrace, truth_vals: np.ndarray, levels: np.ndarray) -> dict:
    out: dict[str, list] = {}
    err = trace.lvl - truth_vals
    for lvl in dict.fromkeys(x for x in levels if x is not None):
        sel = (levels == lvl) & np.isfinite(err)
        out[lvl] = err[sel].tolist()
    return out


def _lift_errors(trace: LvlTrace, truth: TruthTrace, annotations: Sequence[Annotation]) -> dict:
    out: dict[str, list] = {}
    target = truth.load_height if truth.load_height is not None else truth.wrist_height
    for a in annotations:
        if not a.label.startswith("lift:"):
            continue
        m = (trace.t >= a.start) & (trace.t < a.end)
        tv = _truth_at(truth, trace.t[m], target)
        ok = np.isfinite(tv) & np.isfinite(trace.lvl[m])
        if ok.any():
            out.setdefault(a.label[5:], []).append(float(trace.lvl[m][ok].mean() - tv[ok].mean()))
    return out


def evaluate_session(result, truth: TruthTrace | None, annotations: Sequence[Annotation], subject_id: str) -> SessionEval:
    """Compare one pipeline result against truth over annotated lift holds and walks."""
    side = _pick_wrist(result, result.config.eval_wrist)
    ev = SessionEval(subject_id, side.value if side else None)
    ev.anchor_counts = {s.value: sum(p.source is s for p in result.anchors) for s in Source}
    cycles = result.gait.cycles

    # detection rates per speed class
    walks = [a for a in annotations if a.label.startswith("walk")]
    groups = [(a.label.split(":", 1)[1] if ":" in a.label else "all", a) for a in walks] or [("all", None)]
    wsides = sorted(result.wrist, key=lambda s: s.value, reverse=True)
    by_speed: dict[str, list] = {}
    for speed, a in groups:
        sel = [c for c in cycles if a is None or (a.start <= c.start < a.end)]
        by_speed.setdefault(speed, []).extend(sel)
    for speed, sel in by_speed.items():
        try:
            rates = kvlu_detection_rate(sel, result.anchors, wsides)
        except NoCycles:
            ev.unavailable.append(f"detection rate ({speed}): no gait cycles")
            continue
        for combo, r in rates.items():
            n = sum(c.side.value == combo[0] for c in sel)
            ev.detection.append({"speed": speed, "combo": combo, "rate_pct": r, "cycles": n})

    if truth is None:
        ev.unavailable.append("errors: no ground truth")
        return ev

    # anchor accuracy against true wrist height
    for p in result.anchors:
        tw = _truth_at(truth, np.array([p.t]), truth.wrist_height)[0]
        if not np.isfinite(tw):
            continue
        if p.source is Source.STANDING:
            ev.standing_anchor_errors.append(p.known_height - float(tw))
            ev.standing_anchor_truth.append(float(tw))
        else:
            speed = next((sp for sp, a in groups if a is None or a.start <= p.t < a.end), None)
            if speed is None:
                continue
            combo = f"{p.source.value}-{p.wrist_side.value}W"
            ev.walking_anchor_errors.setdefault(speed, {}).setdefault(combo, []).append(p.known_height - float(tw))

    if side is None:
        ev.unavailable.append("errors: no wrist has an anchor")
        return ev

    traces = {"corrected": result.corrected[side], "realtime": result.realtime[side], "raw": result.raw[side]}
    for mode, tr in traces.items():
        levels = _labels(tr.t, annotations, "lift:")
        ev.errors[mode] = {"wrist": _errors_by_level(tr, _truth_at(truth, tr.t, truth.wrist_height), levels)}
        if truth.load_height is not None:
            ev.errors[mode]["load"] = _errors_by_level(tr, _truth_at(truth, tr.t, truth.load_height), levels)
        ev.lift_errors[mode] = _lift_errors(tr, truth, annotations)
    if truth.load_height is not None:
        levels = _labels(truth.t, annotations, "lift:")
        diff = truth.wrist_height - truth.load_height
        for lvl in dict.fromkeys(x for x in levels if x is not None):
            sel = (levels == lvl) & np.isfinite(diff)
            ev.proxy_errors[lvl] = diff[sel].tolist()
    if not any(ev.errors["corrected"].get("load", {}).values()):
        ev.unavailable.append("LVL errors: no lift holds with truth")

    raw = traces["raw"]
    ev.compare = {
        "t": raw.t,
        "raw_cm": raw.lvl,
        "realtime_cm": _on(raw.t, traces["realtime"]),
        "corrected_cm": _on(raw.t, traces["corrected"]),
        "truth_cm": _truth_at(truth, raw.t, truth.load_height if truth.load_height is not None else truth.wrist_height),
    }
    return ev


def _on(t: np.ndarray, tr: LvlTrace) -> np.ndarray:
    out = np.full(len(t), np.nan)
    i = np.searchsorted(t, tr.t)
    out[i] = tr.lvl
    return out


# -- report ----------------------------------------------------------------------------


def _clean(x):
    """JSON-safe copy: NaN/inf become None, numpy scalars become floats."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (np.floating, float)):
        return float(x) if math.isfinite(x) else None
    if isinstance(x, np.integer):
        return int(x)
    return x


def _stats(errs_by_group: Mapping[str, list]) -> tuple[dict, dict]:
    """Pooled MAE and (ME, std) per group; None for empty groups."""
    m, me = {}, {}
    allv = []
    for g, v in errs_by_group.items():
        v = np.asarray(v, dtype=float)
        allv.append(v)
        m[g] = float(np.mean(np.abs(v))) if len(v) else None
        me[g] = {"me": float(v.mean()), "std": float(v.std())} if len(v) else None
    pooled = np.concatenate(allv) if allv else np.zeros(0)
    m[OVERALL] = float(np.mean(np.abs(pooled))) if len(pooled) else None
    me[OVERALL] = {"me": float(pooled.mean()), "std": float(pooled.std())} if len(pooled) else None
    return m, me


def _merge(dicts: Iterable[Mapping[str, list]]) -> dict[str, list]:
    out: dict[str, list] = {}
    for d in dicts:
        for k, v in d.items():
            out.setdefault(k, []).extend(v)
    return out


@dataclass
class ErrorReport:
    sessions: list
    lvl_mae: dict  # mode -> level -> cm (pooled over samples)
    lvl_me: dict  # mode -> level -> {me, std}
    lvl_mae_session_mean: dict  # mode -> level -> mean of per-session MAEs
    lift_mae: dict  # mode -> level -> cm, one hold-mean error per lifting activity
    lift_me: dict
    wrist_mae: dict  # mode -> level -> cm against true wrist height
    per_session: dict  # subject -> mode -> level -> cm
    proxy_mae: dict  # level -> cm, true wrist height as the load estimate
    proxy_me: dict
    detection_rates: list  # pooled rows: speed, combo, rate_pct, cycles
    detection_rates_per_session: list
    standing_anchor: dict  # mae_cm, accuracy_pct
    walking_anchor_mae: dict  # speed -> combo -> cm
    rnle_sensitivity_pct: float | None
    unavailable: dict
    provenance: dict = field(default_factory=dict)

    @property
    def overall_mae(self) -> float | None:
        return self.lvl_mae.get("corrected", {}).get(OVERALL)

    def to_dict(self) -> dict:
        return _clean(asdict(self))

    @classmethod
    def from_dict(cls, d: dict) -> "ErrorReport":
        return cls(**d)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def build_report(evals: Sequence[SessionEval], provenance: Mapping | None = None) -> ErrorReport:
    if not evals:
        raise ValueError("at least one evaluated session is required")
    lvl_mae, lvl_me, sess_mean, wrist_mae = {}, {}, {}, {}
    per_session: dict = {e.subject_id: {} for e in evals}
    for mode in MODES:
        load = [e.errors.get(mode, {}).get("load", {}) for e in evals]
        lvl_mae[mode], lvl_me[mode] = _stats(_merge(load))
        wrist_mae[mode], _ = _stats(_merge(e.errors.get(mode, {}).get("wrist", {}) for e in evals))
        per = {}
        for e, d in zip(evals, load):
            per[e.subject_id] = _stats(d)[0] if d else {OVERALL: None}
            per_session[e.subject_id][mode] = per[e.subject_id]
        keys = list(dict.fromkeys(k for v in per.values() for k in v))
        sess_mean[mode] = {}
        for k in keys:
            vals = [v[k] for v in per.values() if v.get(k) is not None]
            sess_mean[mode][k] = float(np.mean(vals)) if vals else None

    lift_mae, lift_me = {}, {}
    for mode in MODES:
        lift_mae[mode], lift_me[mode] = _stats(_merge(e.lift_errors.get(mode, {}) for e in evals))

    proxy_mae, proxy_me = _stats(_merge(e.proxy_errors for e in evals))

    pooled: dict[tuple[str, str], list] = {}
    per_rows = []
    for e in evals:
        for r in e.detection:
            per_rows.append({"session": e.subject_id, **r})
            if r["rate_pct"] is not None and math.isfinite(r["rate_pct"]) and r["cycles"]:
                acc = pooled.setdefault((r["speed"], r["combo"]), [0.0, 0])
                acc[0] += r["rate_pct"] / 100.0 * r["cycles"]
                acc[1] += r["cycles"]
    rates = [
        {"speed": s, "combo": c, "rate_pct": 100.0 * hit / n, "cycles": n}
        for (s, c), (hit, n) in sorted(pooled.items(), key=lambda kv: (kv[0][0], COMBOS.index(kv[0][1]) if kv[0][1] in COMBOS else 99, kv[0][1]))
    ]

    st_err = np.array([x for e in evals for x in e.standing_anchor_errors])
    st_tru = np.array([x for e in evals for x in e.standing_anchor_truth])
    standing = {
        "n": int(len(st_err)),
        "mae_cm": float(np.mean(np.abs(st_err))) if len(st_err) else None,
        "accuracy_pct": float(np.mean(accuracy_pct(st_tru + st_err, st_tru))) if len(st_err) else None,
    }
    walking = {}
    for e in evals:
        for sp, combos in e.walking_anchor_errors.items():
            for c, v in combos.items():
                walking.setdefault(sp, {}).setdefault(c, []).extend(v)
    walking_mae = {sp: {c: float(np.mean(np.abs(v))) for c, v in cs.items()} for sp, cs in walking.items()}

    overall = lvl_mae["corrected"][OVERALL]
    return ErrorReport(
        sessions=[e.subject_id for e in evals],
        lvl_mae=lvl_mae,
        lvl_me=lvl_me,
        lvl_mae_session_mean=sess_mean,
        lift_mae=lift_mae,
        lift_me=lift_me,
        wrist_mae=wrist_mae,
        per_session=per_session,
        proxy_mae=proxy_mae,
        proxy_me=proxy_me,
        detection_rates=rates,
        detection_rates_per_session=per_rows,
        standing_anchor=standing,
        walking_anchor_mae=walking_mae,
        rnle_sensitivity_pct=rnle_sensitivity(overall) if overall is not None else None,
        unavailable={e.subject_id: list(e.unavailable) for e in evals},
        provenance=dict(provenance or {}),
    )


COMPARE_HEADER = ["t", "raw_cm", "realtime_cm", "corrected_cm", "truth_cm"]
DETECTION_HEADER = ["session", "speed", "combo", "rate_pct", "cycles"]


def _cell(x) -> str:
    return "" if x is None or (isinstance(x, float) and not math.isfinite(x)) else repr(float(x))


def write_report(report: ErrorReport, evals: Sequence[SessionEval], out_dir) -> Path:
    """Write report.json, detection_rates.csv and the trace comparison CSVs.

    A single session gets ``trace_compare.csv``; a batch gets one
    ``trace_compare_<subject>.csv`` per session. Returns the report path.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "report.json"
    path.write_text(report.to_json())
    with_trace = [e for e in evals if e.compare is not None]
    for e in with_trace:
        name = "trace_compare.csv" if len(evals) == 1 else f"trace_compare_{e.subject_id}.csv"
        with open(out / name, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(COMPARE_HEADER)
            for row in zip(*(e.compare[k] for k in COMPARE_HEADER)):
                w.writerow([_cell(v) for v in row])
    with open(out / "detection_rates.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(DETECTION_HEADER)
        for r in report.detection_rates_per_session:
            w.writerow([r["session"], r["speed"], r["combo"], _cell(r["rate_pct"]), r["cycles"]])
        for r in report.detection_rates:
            w.writerow(["pooled", r["speed"], r["combo"], _cell(r["rate_pct"]), r["cycles"]])
    return path


def read_report(path) -> ErrorReport:
    return ErrorReport.from_dict(json.loads(Path(path).read_text()))
