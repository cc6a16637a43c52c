from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from lvlkit.model import N_CELLS, Anthropometry, InsoleStream, Region, Side, WristStream, default_region_map, validate_session
from lvlkit.sim import NoiseSpec, SimConfig, generate_session, lift_protocol, walking_protocol

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

DATA = Path(__file__).parent / "data"
QUIET = NoiseSpec(0.0, 0.0, 0.0)


def insole_from_regions(t, heel, fore, mid=None, side=Side.LEFT) -> InsoleStream:
    """Insole stream whose region sums equal the given per-sample forces."""
    rmap = default_region_map()
    t = np.asarray(t, dtype=float)
    cells = np.zeros((len(t), N_CELLS))
    mid = np.zeros(len(t)) if mid is None else mid
    for region, force in ((Region.HEEL, heel), (Region.FOREFOOT, fore), (Region.MIDFOOT, mid)):
        cols = [k for k, r in enumerate(rmap) if r is region]
        cells[:, cols] = (np.broadcast_to(np.asarray(force, dtype=float), t.shape) / len(cols))[:, None]
    return InsoleStream(t, cells, side, rmap)


def wrist(t, pressure, pitch, side=Side.RIGHT) -> WristStream:
    t = np.asarray(t, dtype=float)
    return WristStream(t, np.broadcast_to(pressure, t.shape), np.broadcast_to(pitch, t.shape), side)


def session_of(sim):
    return validate_session(list(sim.wrist.values()), list(sim.insole.values()), Anthropometry(sim.config.body_height))


@pytest.fixture(scope="session")
def noiseless_sim():
    cfg = SimConfig(seed=3, script=walking_protocol() + lift_protocol(2), noise=QUIET)
    return generate_session(cfg)


@pytest.fixture(scope="session")
def noisy_walk_sim():
    return generate_session(SimConfig(seed=11, script=walking_protocol()))


# acceptance verdicts, printed after the run so they land in the captured log
VERDICTS: list[tuple[str, bool, str]] = []


@pytest.fixture
def verdict():
    def record(name: str, ok: bool, detail: str = "") -> bool:
        VERDICTS.append((name, bool(ok), detail))
        return bool(ok)

    return record


def pytest_terminal_summary(terminalreporter):
    if not VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in VERDICTS:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}".rstrip())
