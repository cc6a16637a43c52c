"""Simulated cohort experiments shared by the scripts and the acceptance suite."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .evaluation import ErrorReport, SessionEval, accuracy_pct, build_report, evaluate_session
from .kvlu import estimate_wrist_height
from .model import Anthropometry, validate_session
from .pipeline import PipelineConfig, SessionResult, run_session
from .sim import DriftSpec, NoiseSpec, SimConfig, SimSession, Stand, Walk, generate_session, lift_protocol

COHORT_HEIGHT_MEAN = 171.3
COHORT_HEIGHT_SD = 4.5
MIXED_DRIFT = DriftSpec(linear_pa_s=0.05, sin_amp_pa=5.0, sin_period_s=60.0, rw_sigma=0.2)
# shorter than a 3 s hold at 10 Hz, so hold levels are not averaged with the transitions
LIFT_SMOOTH_WINDOW = 11


@dataclass(frozen=True)
class RatioRow:
    body_height: float
    estimated: float
    true: float
    abs_error: float
    accuracy: float


def ratio_table(body_heights: Sequence[float], true_heights: Sequence[float], ratio: float) -> list[RatioRow]:
    rows = []
    for h, t in zip(body_heights, true_heights):
        est = estimate_wrist_height(Anthropometry(h, ratio))
        rows.append(RatioRow(h, est, t, abs(est - t), accuracy_pct(est, t)))
    return rows


def cohort_heights(n: int, seed: int = 0) -> np.ndarray:
    return np.random.default_rng(seed).normal(COHORT_HEIGHT_MEAN, COHORT_HEIGHT_SD, n)


def run_sim(cfg: SimConfig, pcfg: PipelineConfig = PipelineConfig(), subject_id: str | None = None):
    """Simulate, validate, process and evaluate one session."""
    sim = generate_session(cfg)
    sess = validate_session(list(sim.wrist.values()), list(sim.insole.values()), Anthropometry(cfg.body_height))
    res = run_session(sess, pcfg)
    ev = evaluate_session(res, sim.truth.as_trace(), sim.truth.annotations, subject_id or f"sim{cfg.seed}")
    return sim, res, ev


@dataclass(frozen=True, eq=False)
class CohortRun:
    sims: list[SimSession]
    results: list[SessionResult]
    evals: list[SessionEval]
    report: ErrorReport


def lift_cohort(
    n_subjects: int = 10,
    seed: int = 0,
    noise: NoiseSpec = NoiseSpec(2.0, 2.0, 0.5),
    drift: DriftSpec = MIXED_DRIFT,
    repetitions: int = 5,
    pcfg: PipelineConfig = PipelineConfig(smooth_window=LIFT_SMOOTH_WINDOW),
) -> CohortRun:
    """Standing lifts at the four levels for a cohort of simulated subjects."""
    heights = cohort_heights(n_subjects, seed)
    sims, results, evals = [], [], []
    for k, h in enumerate(heights):
        cfg = SimConfig(seed=seed * 1000 + k, body_height=float(h), script=lift_protocol(repetitions), drift=drift, noise=noise)
        sim, res, ev = run_sim(cfg, pcfg, f"S{k + 1:02d}")
        sims.append(sim)
        results.append(res)
        evals.append(ev)
    return CohortRun(sims, results, evals, build_report(evals, {"pipeline": pcfg.to_dict()}))


def detection_rates(
    amplitude: float,
    speed: str = "normal",
    seed: int = 0,
    walk_s: float = 60.0,
    noise: NoiseSpec = NoiseSpec(2.0, 2.0, 0.5),
    pcfg: PipelineConfig = PipelineConfig(),
) -> dict[str, float]:
    """Per-combo detection rates for one walking bout at a given arm-swing amplitude."""
    base = SimConfig()
    cfg = SimConfig(
        seed=seed,
        script=(Stand(30.0), Walk(walk_s, speed), Stand(5.0)),
        noise=noise,
        arm_swing={**base.arm_swing, speed: amplitude},
    )
    _, _, ev = run_sim(cfg, pcfg)
    return {r["combo"]: r["rate_pct"] for r in ev.detection if r["speed"] == speed}
