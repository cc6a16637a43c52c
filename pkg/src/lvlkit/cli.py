"""Command-line entry point.

Per-session artifacts go to ``<out>/<subject_id>/``; the pooled report and
``provenance.json`` go to ``<out>/``. Exit codes: 0 success, 1 pipeline
error, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

from . import __version__
from .errors import LvlkitError, ManifestError
from .evaluation import SessionEval, build_report, evaluate_session, write_report
from .gait import write_intervals
from .ingest import load_manifest, load_session
from .kvlu import write_kvlu_points
from .lvl import write_traces
from .pipeline import PipelineConfig, count_sources, run_session
from .sim import SimConfig, generate_session, lift_protocol, walking_protocol, write_session

log = logging.getLogger("lvlkit")

COMMANDS = ("simulate", "detect-kvlu", "estimate-lvl", "evaluate", "report", "all")


@dataclass(frozen=True)
class RunConfig:
    command: str
    out: Path
    manifests: tuple[Path, ...] = ()
    config: Path | None = None
    jobs: int = 1
    seed: int | None = None
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)
    sources: dict = field(default_factory=dict)  # setting -> "flag" | "config" | "default"


def _float_or(word: str):
    def parse(text: str):
        if text.lower() == word:
            return None
        try:
            return float(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected a number or '{word}', got {text!r}") from None
    return parse


def _odd_window(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1 or v % 2 == 0:
        raise argparse.ArgumentTypeError("window must be a positive odd integer")
    return v


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lvlkit", description="Load vertical location from wrist barometry with known-height anchors.")
    p.add_argument("--version", action="version", version=f"lvlkit {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--out", type=Path, required=True, help="output directory")
        sp.add_argument("--config", type=Path, help="JSON config (simulator config for 'simulate', pipeline config otherwise)")
        sp.add_argument("--seed", type=int, help="simulator seed override")
        if name == "simulate":
            continue
        sp.add_argument("--manifest", type=Path, action="append", default=[], help="session manifest (repeatable)")
        sp.add_argument("--ratio", type=float, default=argparse.SUPPRESS, help="wrist-to-body-height ratio")
        sp.add_argument("--angle-threshold", type=_float_or("subject"), default=argparse.SUPPRESS,
                        help="wrist pitch threshold in degrees, or 'subject' to derive it from the manifest's calibration window")
        sp.add_argument("--smooth-window", type=_odd_window, default=argparse.SUPPRESS, help="pressure moving-average window (odd, samples)")
        sp.add_argument("--model-a", type=float, default=argparse.SUPPRESS, help="pressure-to-height slope, cm/Pa")
        sp.add_argument("--model-b", type=float, default=argparse.SUPPRESS, help="pressure-to-height offset, cm")
        sp.add_argument("--max-anchor-jump", type=_float_or("none"), default=argparse.SUPPRESS, help="skip anchors implying a larger jump (cm), or 'none'")
        sp.add_argument("--jobs", type=_positive, default=1, help="worker processes for multiple manifests")
    return p


_FLAG_KEYS = {
    "ratio": "wrist_ratio",
    "angle_threshold": "angle_threshold",
    "smooth_window": "smooth_window",
    "model_a": "model_a",
    "model_b": "model_b",
    "max_anchor_jump": "max_anchor_jump",
}


def resolve(args: argparse.Namespace) -> RunConfig:
    """Flag > config file > shipped default, remembering where each value came from."""
    if args.command == "simulate":
        return RunConfig(args.command, args.out, config=args.config, seed=args.seed)
    file_cfg = {}
    if args.config is not None:
        try:
            file_cfg = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ManifestError(f"config {args.config}: {exc}") from None
    cfg = PipelineConfig.from_dict(file_cfg)
    sources = {k: ("config" if k in file_cfg else "default") for k in cfg.to_dict()}
    flags = {}
    for attr, key in _FLAG_KEYS.items():
        if hasattr(args, attr):
            flags[key] = getattr(args, attr)
            sources[key] = "flag"
    cfg = replace(cfg, **flags)
    return RunConfig(args.command, args.out, tuple(args.manifest), args.config, args.jobs, args.seed, cfg, sources)


def provenance(rc: RunConfig) -> dict:
    return {
        "lvlkit_version": __version__,
        "settings": rc.pipeline.to_dict(),
        "sources": dict(sorted(rc.sources.items())),
        "manifests": [str(m) for m in rc.manifests],
    }


# -- per-session work (module level so worker processes can pickle it) ------------------


def _session_dir(out: Path, subject_id: str) -> Path:
    d = out / subject_id
    d.mkdir(parents=True, exist_ok=True)
    return d


def _process(manifest: Path, cfg: PipelineConfig):
    m = load_manifest(manifest)
    loaded = load_session(m, cfg.wrist_ratio)
    result = run_session(loaded.session, cfg, m.angle_calibration)
    return m, loaded, result


def _stage(stage: str, manifest: Path, cfg: PipelineConfig, out: Path) -> str:
    m, loaded, result = _process(manifest, cfg)
    d = _session_dir(out, m.subject_id)
    if stage == "detect-kvlu":
        write_intervals(result.gait.intervals(), d / "intervals.csv")
        write_kvlu_points(result.anchors, d / "kvlu.csv")
        info = {
            "angle_threshold_deg": result.threshold.value,
            "threshold_from_samples": result.threshold.n_angle,
            "anchors": count_sources(result.anchors),
            "cycles": len(result.gait.cycles),
            "warnings": list(loaded.session.warnings),
        }
        (d / "kvlu_summary.json").write_text(json.dumps(info, indent=2, sort_keys=True) + "\n")
    elif stage == "estimate-lvl":
        for side in sorted(result.corrected, key=lambda s: s.value):
            write_traces([result.realtime[side], result.corrected[side]], d / f"lvl_{side.value}.csv")
        (d / "lvl_notes.json").write_text(json.dumps(result.notes, indent=2) + "\n")
    elif stage == "evaluate":
        ev = evaluate_session(result, loaded.truth, loaded.annotations, m.subject_id)
        (d / "eval.json").write_text(json.dumps(ev.to_dict(), sort_keys=True) + "\n")
    return m.subject_id


def _run_stage(stage: str, rc: RunConfig) -> list[str]:
    if not rc.manifests:
        raise ManifestError("at least one --manifest is required")
    args = [(stage, m, rc.pipeline, rc.out) for m in rc.manifests]
    if rc.jobs > 1 and len(args) > 1:
        with ProcessPoolExecutor(max_workers=rc.jobs) as pool:
            ids = list(pool.map(_stage, *zip(*args)))
    else:
        ids = [_stage(*a) for a in args]
    dup = {i for i in ids if ids.count(i) > 1}
    if dup:
        raise ManifestError(f"duplicate subject ids {sorted(dup)}")
    return ids


def _report(rc: RunConfig) -> Path:
    if rc.manifests:
        ids = [load_manifest(m).subject_id for m in rc.manifests]
        paths = [rc.out / i / "eval.json" for i in ids]
    else:
        paths = sorted(rc.out.glob("*/eval.json"))
    if not paths:
        raise ManifestError(f"no evaluated sessions under {rc.out}")
    evals = []
    for p in paths:
        if not p.exists():
            raise ManifestError(f"{p} missing; run 'evaluate' first")
        evals.append(SessionEval.from_dict(json.loads(p.read_text())))
    prov_path = rc.out / "provenance.json"
    prov = json.loads(prov_path.read_text()) if prov_path.exists() else provenance(rc)
    report = build_report(evals, prov)
    return write_report(report, evals, rc.out)


def _simulate(rc: RunConfig) -> Path:
    cfg = SimConfig.load(rc.config) if rc.config else SimConfig(script=walking_protocol() + lift_protocol())
    if rc.seed is not None:
        cfg = replace(cfg, seed=rc.seed)
    for k, v in sorted(cfg.to_dict().items()):
        log.info("sim %s = %s", k, v)
    return write_session(generate_session(cfg), rc.out)


def execute(rc: RunConfig) -> None:
    rc.out.mkdir(parents=True, exist_ok=True)
    if rc.command == "simulate":
        path = _simulate(rc)
        print(path)
        return
    for k, v in sorted(rc.pipeline.to_dict().items()):
        log.info("%s = %s (%s)", k, v, rc.sources.get(k, "default"))
    prov_path = rc.out / "provenance.json"
    if rc.command != "report" or not prov_path.exists():
        prov_path.write_text(json.dumps(provenance(rc), indent=2, sort_keys=True) + "\n")
    stages = ("detect-kvlu", "estimate-lvl", "evaluate", "report") if rc.command == "all" else (rc.command,)
    for stage in stages:
        if stage == "report":
            print(_report(rc))
        else:
            _run_stage(stage, rc)


def _configure_logging() -> None:
    level = os.environ.get("KVLU_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    _configure_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        rc = resolve(args)
        execute(rc)
    except LvlkitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: io: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
