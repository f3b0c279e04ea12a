import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from ssmsmooth.model import InitialState, NoiseSpec, StateSpaceModel  # noqa: E402

REPO = Path(__file__).resolve().parents[1]
CONFIGS = REPO / "configs"

_ACCEPTANCE_LINES = []


def record_acceptance(number, passed, detail):
    line = f"{'PASS' if passed else 'FAIL'} criterion {number}: {detail}"
    _ACCEPTANCE_LINES.append(line)
    print(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":").rstrip("ab"))):
            terminalreporter.write_line(line)


def random_gaussian_model(rng, d=None, k=None):
    """Random well-conditioned linear-Gaussian model and initial state."""
    d = d or int(rng.integers(1, 4))
    k = k or int(rng.integers(1, d + 1))
    A = rng.normal(size=(d, d))
    F = A / max(1.0, np.abs(np.linalg.eigvals(A)).max()) * rng.uniform(0.5, 1.1)
    F += 0.3 * np.eye(d)
    G = rng.normal(size=(d, k))
    H = rng.normal(size=d)
    q = rng.uniform(0.1, 2.0, size=k)
    R = float(rng.uniform(0.1, 2.0))
    model = StateSpaceModel(F, G, H, tuple(NoiseSpec.gaussian(v) for v in q), NoiseSpec.gaussian(R))
    B = rng.normal(size=(d, d))
    P0 = B @ B.T + 0.1 * np.eye(d)
    init = InitialState(rng.normal(size=d), P0)
    return model, init


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def seasonal():
    from ssmsmooth.datasets import simulate_seasonal

    return simulate_seasonal(1)
