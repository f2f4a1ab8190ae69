import numpy as np
import pytest

from furnacephase.synthgen import SynthConfig, generate


def rel_error(a, b):
    """Norm-wise relative error ||a - b|| / (||a|| + ||b||); 0 when both vanish."""
    a, b = np.ravel(a), np.ravel(b)
    denom = np.linalg.norm(a) + np.linalg.norm(b)
    return 0.0 if denom == 0 else float(np.linalg.norm(a - b) / denom)


@pytest.fixture(scope="session")
def small_synth():
    cfg = SynthConfig(n_charges=6, seed=3)
    ts, log = generate(cfg)
    return cfg, ts, log


# lines recorded by the acceptance suite, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
