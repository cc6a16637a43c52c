"""Randomized simulator configurations and the pipeline invariants checked on them.

Each ``check_*`` function returns a list of violation messages; an empty list
means the invariant held for that run.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .evaluation import SessionEval, evaluate_session, mae, mean_error
from .kvlu import compute_angle_threshold
from .lvl import estimate_lvl_realtime
from .model import Anthropometry, KvluPoint, Side, Source, intervals_mask, validate_session
from .pipeline import PipelineConfig, SessionResult, run_session
from .sim import LEVELS, SPEEDS, DriftSpec, LiftSet, NoiseSpec, SimConfig, SimSession, Stand, Walk, generate_session

OFFSET_TOL_CM = 1e-9
MAX_GRF_NOISE_N = 0.9


def random_sim_config(seed: int) -> tuple[SimConfig, PipelineConfig]:
    """A simulator and pipeline configuration drawn deterministically from ``seed``."""
    rng = np.random.default_rng(seed)
    speed = str(rng.choice(SPEEDS))
    script = [Stand(float(rng.uniform(6.0, 15.0))), Walk(float(rng.uniform(6.0, 20.0)), speed)]
    if rng.random() < 0.7:
        script += [Stand(float(rng.uniform(2.0, 6.0))), LiftSet(str(rng.choice(LEVELS)), int(rng.integers(1, 3)))]
    script.append(Stand(3.0))
    base = SimConfig()
    cfg = SimConfig(
        seed=int(seed),
        body_height=float(rng.uniform(150.0, 195.0)),
        script=tuple(script),
        drift=DriftSpec(
            linear_pa_s=float(rng.uniform(-0.1, 0.1)),
            sin_amp_pa=float(rng.uniform(0.0, 6.0)),
            sin_period_s=float(rng.uniform(20.0, 120.0)),
            rw_sigma=float(rng.uniform(0.0, 0.3)),
        ),
        # per-cell GRF noise from 1 N up lifts the clipped swing floor over the swing threshold
        noise=NoiseSpec(float(rng.uniform(0.0, 4.0)), float(rng.uniform(0.0, 4.0)), float(rng.uniform(0.0, MAX_GRF_NOISE_N))),
        arm_swing={k: float(rng.uniform(4.0, 25.0)) for k in base.arm_swing},
        stance_fraction=float(rng.uniform(0.55, 0.65)),
        true_wrist_ratio=float(rng.uniform(0.47, 0.52)),
    )
    pcfg = PipelineConfig(smooth_window=int(rng.choice([1, 5, 11, 21, 41])))
    return cfg, pcfg


@dataclass(frozen=True, eq=False)
class Run:
    sim: SimSession
    result: SessionResult
    evaluation: SessionEval
    offset_pa: float
    pitch_shift_deg: float


def run_random(seed: int) -> Run:
    cfg, pcfg = random_sim_config(seed)
    sim = generate_session(cfg)
    sess = validate_session(list(sim.wrist.values()), list(sim.insole.values()), Anthropometry(cfg.body_height))
    res = run_session(sess, pcfg)
    ev = evaluate_session(res, sim.truth.as_trace(), sim.truth.annotations, f"sim{seed}")
    rng = np.random.default_rng([seed, 1])
    return Run(sim, res, ev, float(rng.uniform(-500.0, 500.0)), float(rng.uniform(-30.0, 30.0)))


def _first_stand_pitch(sim: SimSession) -> np.ndarray:
    a = next(x for x in sim.truth.annotations if x.label == "stand")
    return np.concatenate([w.pitch[(w.t >= a.start) & (w.t < a.end)] for w in sim.wrist.values()])


def check_shift_equivariance(run: Run) -> list[str]:
    samples = _first_stand_pitch(run.sim)
    c = run.pitch_shift_deg
    base = compute_angle_threshold(samples).value
    shifted = compute_angle_threshold(samples + c).value
    # summing ~1e2 values of magnitude ~1e2 loses at most a few ulps each
    tol = 1e-9 * max(1.0, abs(base), abs(c))
    return [] if abs(shifted - base - c) <= tol else [f"threshold moved by {shifted - base:.12g}, expected {c:.12g}"]


def check_threshold_below_mean(run: Run) -> list[str]:
    thr = compute_angle_threshold(_first_stand_pitch(run.sim))
    out = []
    if thr.value > thr.mean:
        out.append(f"threshold {thr.value} above mean {thr.mean}")
    if (thr.value == thr.mean) != (thr.sigma_angle == 0.0):
        out.append("threshold equals mean without zero spread (or the reverse)")
    return out


def check_one_anchor_per_cycle(run: Run) -> list[str]:
    out = []
    walking = [p for p in run.result.anchors if p.source is not Source.STANDING]
    for c in run.result.gait.cycles:
        src = Source.for_foot(c.side)
        for side in run.result.wrist:
            n = sum(1 for p in walking if p.source is src and p.wrist_side is side and c.start <= p.t < c.end)
            if n > 1:
                out.append(f"{n} anchors in {c.side.value} cycle [{c.start:.2f}, {c.end:.2f}) for {side.value} wrist")
    return out


def check_offset_invariance(run: Run) -> list[str]:
    """Adding a constant to every pressure (anchors included) leaves LVL unchanged."""
    c = run.offset_pa
    out = []
    for side, w in run.result.wrist.items():
        mine = run.result.anchors_for(side)
        if not mine:
            continue
        model = run.result.config.model
        base = estimate_lvl_realtime(w, mine, model)
        moved = [KvluPoint(p.t, p.wrist_side, p.source, p.anchor_pressure + c, p.known_height) for p in mine]
        shifted = estimate_lvl_realtime(w.with_pressure(w.pressure + c), moved, model)
        err = float(np.max(np.abs(base.lvl - shifted.lvl))) if len(base.lvl) else 0.0
        if err > OFFSET_TOL_CM:
            out.append(f"{side.value} wrist LVL moved by {err:.3g} cm under a {c:.1f} Pa offset")
    return out


def check_swing_foot_flat_disjoint(run: Run) -> list[str]:
    out = []
    g = run.result.gait
    for side in (Side.LEFT, Side.RIGHT):
        t = run.sim.insole[side].t
        both = intervals_mask(t, g.swings[side]) & intervals_mask(t, g.foot_flats[side])
        if both.any():
            out.append(f"{int(both.sum())} {side.value} samples in both swing and foot flat")
    return out


def check_mae_bounds_me(run: Run) -> list[str]:
    out = []
    groups = []
    for mode, targets in run.evaluation.errors.items():
        for target, levels in targets.items():
            groups += [(f"{mode}/{target}/{k}", v) for k, v in levels.items()]
    groups += [(f"lift/{mode}/{k}", v) for mode, lv in run.evaluation.lift_errors.items() for k, v in lv.items()]
    for name, errs in groups:
        if not errs:
            continue
        e = np.asarray(errs, dtype=float)
        m = mae(e, np.zeros(len(e)))["overall"]
        me = mean_error(e, np.zeros(len(e)))["overall"][0]
        if m < abs(me) - 1e-12 or m < 0:
            out.append(f"{name}: MAE {m} below |ME| {abs(me)}")
    return out


INVARIANTS = {
    "threshold shift equivariance": check_shift_equivariance,
    "threshold never above mean": check_threshold_below_mean,
    "at most one anchor per (cycle, foot, wrist)": check_one_anchor_per_cycle,
    "LVL invariant to constant pressure offset": check_offset_invariance,
    "swing and foot flat disjoint": check_swing_foot_flat_disjoint,
    "MAE at least |ME|": check_mae_bounds_me,
}
