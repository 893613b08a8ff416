import warnings

import numpy as np
import pytest

from mixnash.scenarios import vehicles5_scenario
from mixnash.sim import integrate


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def free_run():
    """vehicles5 disturbance-free, 50 s at dt=1e-3."""
    return integrate(vehicles5_scenario(variant="disturbance_free"))


@pytest.fixture(scope="session")
def full_pair():
    """vehicles5 full variant, base gains and everything doubled, 10 s at dt=5e-4."""
    base = vehicles5_scenario()
    g = base.gains
    doubled = vehicles5_scenario(k1=2 * g.k1, k2=2 * g.k2, k3=2 * g.k3, k4=2 * g.k4, beta=2 * base.rbf.beta)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        return integrate(base), integrate(doubled)


def pytest_terminal_summary(terminalreporter):
    """One PASS/FAIL line per acceptance criterion, with the measured values."""
    lines = []
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            if "test_acceptance.py" not in getattr(rep, "nodeid", "") or rep.when != "call" and outcome != "error":
                continue
            props = dict(getattr(rep, "user_properties", []))
            if "criterion" not in props:
                continue
            lines.append((props["criterion"], "PASS" if outcome == "passed" else "FAIL", props.get("detail", "")))
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for num, status, detail in sorted(lines):
        terminalreporter.write_line(f"criterion {num:2d}: {status}  {detail}")
