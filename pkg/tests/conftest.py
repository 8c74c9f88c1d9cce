import numpy as np
import pytest

from depthmotion.camera import CameraPose, Intrinsics
from depthmotion.stillbox import Frame

# acceptance outcomes, filled in by test_acceptance.py
ACCEPTANCE_RESULTS: dict[str, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_RESULTS, key=lambda k: int(k.split()[0].lstrip("AC"))):
        ok, detail = ACCEPTANCE_RESULTS[key]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {key}: {detail}")


@pytest.fixture
def small_intrinsics():
    return Intrinsics.from_fov(64, 64, 90.0)


def constant_frame(depth, t, position=(0.0, 0.0, 0.0), shape=(32, 32), seed=0):
    """Textured frame whose ground truth is a single depth value."""
    rng = np.random.default_rng(seed)
    return Frame(
        rng.random(shape),
        np.full(shape, float(depth)),
        float(t),
        CameraPose(np.asarray(position, dtype=float), np.eye(3)),
    )


@pytest.fixture
def make_constant_frame():
    return constant_frame
