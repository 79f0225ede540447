import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from fpclasso import Dataset  # noqa: E402


def make_data(family: str, n: int = 80, p: int = 10, k: int = 3, seed: int = 0, scale: float = 1.0):
    """Standardized Gaussian design plus a response with ``k`` unit signals."""
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    X = (X - X.mean(0)) / X.std(0)
    beta = np.zeros(p)
    beta[:k] = scale
    eta = X @ beta
    event = None
    if family == "gaussian":
        y = eta + rng.standard_normal(n)
    elif family == "logistic":
        y = (rng.random(n) < 1 / (1 + np.exp(-eta))).astype(float)
    elif family == "poisson":
        y = rng.poisson(np.exp(0.5 * eta)).astype(float)
    else:
        t = rng.standard_exponential(n) / np.exp(eta)
        c = rng.standard_exponential(n) * 3.0
        y = np.minimum(t, c)
        event = (t <= c).astype(float)
    return Dataset(X, y, event)


FAMILIES = ["gaussian", "logistic", "poisson", "cox"]


@pytest.fixture(params=FAMILIES)
def family(request):
    return request.param


# lines recorded by the acceptance suite, echoed at the end of the session
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
