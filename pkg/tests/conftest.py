import time

import numpy as np
import pytest

from vqagent.cli import Workspace
from vqagent.demo import write_fixtures
from vqagent.ingest import ingest
from vqagent.scenes import DetectionParams
from vqagent.video import Frame

# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")


class World:
    def __init__(self, root):
        t0 = time.perf_counter()
        self.root = root
        self.paths = write_fixtures(root / "fixtures")
        self.ws = Workspace.open(root / "store", self.paths["providers"])
        self.reports = {}
        for vid in ("drama", "reef", "market"):
            source = self.ws.library.load(self.paths[f"manifest_{vid}"])
            self.reports[vid] = ingest(source, self.ws.store, self.ws.providers, DetectionParams())
        self.ws.save_index()
        self.build_seconds = time.perf_counter() - t0


@pytest.fixture(scope="session")
def world(tmp_path_factory):
    return World(tmp_path_factory.mktemp("world"))


def make_frames(times, features, video_id="v"):
    return [Frame(video_id, float(t), np.asarray(f, dtype=float)) for t, f in zip(times, features)]
