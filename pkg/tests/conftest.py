import numpy as np
import pytest
from hypothesis import settings

from qcorr.core import RngSpec, Shot

settings.register_profile("default", deadline=None, max_examples=50)
settings.load_profile("default")


@pytest.fixture
def rng():
    return RngSpec(seed=1234, stream_id=0)


def random_shots(seed: int, n_shots: int, mean_events: float, box=(1.0, 1.0, 1.0), quantum=None):
    """Uniform events in a box; ``quantum`` snaps coordinates to a grid to create ties."""
    g = np.random.default_rng(seed)
    shots = []
    for s in range(n_shots):
        k = g.poisson(mean_events)
        xyt = g.uniform(0, 1, (k, 3)) * np.asarray(box)
        if quantum:
            xyt = np.round(xyt / quantum) * quantum
        shots.append(Shot(s, xyt))
    return shots


# acceptance verdicts, one (criterion, passed, detail) per line, echoed in the terminal summary
ACCEPTANCE: list[tuple[str, bool, str]] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
