"""Pressure-to-height conversion anchored at known-height reference points.

Real-time estimation re-anchors the affine pressure/height model at every
accepted anchor. Retrospective correction additionally removes drift between
consecutive anchors by distributing each anchor's residual linearly in time.
"""

from __future__ import annotations

import csv
import logging
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import DegeneratePairs, FewerThanTwoAnchors, NoAnchor
from .model import (
    HYDROSTATIC_A,
    G0,
    RHO_AIR,
    KvluPoint,
    LvlTrace,
    PressureHeightModel,
    WristStream,
)

log = logging.getLogger(__name__)


def physics_model(rho: float = RHO_AIR, g: float = G0) -> PressureHeightModel:
    """Hydrostatic slope -1/(rho g), in cm/Pa."""
    return PressureHeightModel(a=-100.0 / (rho * g), b=0.0)


def fit_pressure_height_model(pairs: Iterable[tuple[float, float]], physics_default: bool = False) -> PressureHeightModel:
    """Least-squares line through (pressure change [Pa], height change [cm]) pairs."""
    if physics_default:
        return physics_model()
    arr = np.asarray(list(pairs), dtype=float).reshape(-1, 2)
    dp, dh = arr[:, 0], arr[:, 1]
    if len(dp) < 2 or np.all(dp == dp[0]):
        raise DegeneratePairs("need at least two distinct pressure changes")
    xm, ym = dp.mean(), dh.mean()
    a = float(np.sum((dp - xm) * (dh - ym)) / np.sum((dp - xm) ** 2))
    b = float(ym - a * xm)
    return PressureHeightModel(a, b)


def _accept_anchors(anchors: Sequence[KvluPoint], model: PressureHeightModel, max_jump: float | None):
    accepted, skipped = [], []
    for p in anchors:
        if accepted and p.t <= accepted[-1].t:
            continue
        if accepted and max_jump is not None:
            cur = accepted[-1]
            implied = model.a * (p.anchor_pressure - cur.anchor_pressure) + cur.known_height - p.known_height
            if abs(implied) > max_jump:
                log.warning("anchor at t=%.3f implies a %.1f cm jump; skipped", p.t, implied)
                skipped.append(p)
                continue
        accepted.append(p)
    return accepted, skipped


def estimate_lvl_realtime(
    wrist: WristStream,
    anchors: Sequence[KvluPoint],
    model: PressureHeightModel = PressureHeightModel(),
    max_anchor_jump: float | None = None,
) -> LvlTrace:
    """Height from the latest anchor at or before each sample.

    Samples preceding the first anchor are dropped and counted in
    ``n_omitted``. With ``max_anchor_jump`` set, an anchor whose implied
    correction exceeds it is skipped and listed in ``skipped``.
    """
    mine = sorted((p for p in anchors if p.wrist_side is wrist.side), key=lambda p: p.t)
    mine = [p for p in mine if p.t <= wrist.t[-1]] if len(wrist) else []
    if not mine:
        raise NoAnchor(f"no {wrist.side.value} wrist anchor within the stream")
    accepted, skipped = _accept_anchors(mine, model, max_anchor_jump)
    at = np.array([p.t for p in accepted])
    idx = np.searchsorted(at, wrist.t, side="right") - 1
    keep = idx >= 0
    idx = idx[keep]
    pa = np.array([p.anchor_pressure for p in accepted])[idx]
    ha = np.array([p.known_height for p in accepted])[idx]
    lvl = model.a * (wrist.pressure[keep] - pa) + ha + model.b
    return LvlTrace(
        t=wrist.t[keep],
        lvl=lvl,
        anchor_t=at[idx],
        side=wrist.side,
        mode="realtime",
        n_omitted=int((~keep).sum()),
        anchors=tuple(accepted),
        skipped=tuple(skipped),
        model=model,
    )


def correct_drift_retrospective(trace: LvlTrace, anchors: Sequence[KvluPoint] | None = None) -> LvlTrace:
    """Remove linearly interpolated drift between consecutive anchors.

    The residual at anchor B is the height its pressure implies through the
    previous anchor A minus B's known height; the correction ramps from 0 at A
    to that residual at B. Nothing is extrapolated past the last anchor.
    """
    anchors = list(trace.anchors if anchors is None else anchors)
    if len(anchors) < 2:
        raise FewerThanTwoAnchors(f"{len(anchors)} anchor(s) on {trace.side.value} wrist")
    a = trace.model.a
    lvl = np.array(trace.lvl, dtype=float)
    for A, B in zip(anchors[:-1], anchors[1:]):
        r = a * (B.anchor_pressure - A.anchor_pressure) + A.known_height - B.known_height
        sel = (trace.t >= A.t) & (trace.t < B.t)
        lvl[sel] -= r * (trace.t[sel] - A.t) / (B.t - A.t)
    return trace.replace(lvl=lvl, mode="corrected", anchors=tuple(anchors))


def raw_trace(wrist: WristStream, anchor: KvluPoint, model: PressureHeightModel = PressureHeightModel()) -> LvlTrace:
    """Uncalibrated height: one initial anchor, never updated."""
    lvl = model.a * (wrist.pressure - anchor.anchor_pressure) + anchor.known_height + model.b
    return LvlTrace(
        t=wrist.t, lvl=lvl, anchor_t=np.full(len(wrist), anchor.t), side=wrist.side,
        mode="raw", anchors=(anchor,), model=model,
    )


def wrist_height_as_lvl(
    trace: LvlTrace, bias: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None
) -> LvlTrace:
    """Tag a wrist trace as the load-height estimate.

    ``bias`` maps (t, lvl) to a per-sample wrist-above-load offset that is
    subtracted; off by default.
    """
    lvl = trace.lvl if bias is None else trace.lvl - np.asarray(bias(trace.t, trace.lvl), dtype=float)
    return trace.replace(lvl=lvl, proxy=True)


LVL_HEADER = ["t", "lvl_cm", "anchor_t", "mode"]


def write_traces(traces: Sequence[LvlTrace], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(LVL_HEADER)
        for tr in traces:
            for t, v, at in zip(tr.t, tr.lvl, tr.anchor_t):
                w.writerow([repr(float(t)), repr(float(v)), repr(float(at)), tr.mode])


def read_traces(path) -> dict[str, tuple[np.ndarray, np.ndarray, np.ndarray]]:
    """Columns per mode: ``{mode: (t, lvl, anchor_t)}``."""
    cols: dict[str, list] = {}
    with open(path, newline="") as fh:
        for r in csv.DictReader(fh):
            cols.setdefault(r["mode"], []).append((float(r["t"]), float(r["lvl_cm"]), float(r["anchor_t"])))
    return {m: tuple(np.array(c).T) for m, c in cols.items()}


__all__ = [
    "HYDROSTATIC_A",
    "correct_drift_retrospective",
    "estimate_lvl_realtime",
    "fit_pressure_height_model",
    "physics_model",
    "raw_trace",
    "read_traces",
    "wrist_height_as_lvl",
    "write_traces",
]
