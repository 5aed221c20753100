import functools

import numpy as np
import pytest

from nbvrecon.geometry import FovShape
from nbvrecon.harness import ExperimentConfig, build_scenario

DEFAULT_SHAPE = FovShape(10.0, 10.0, np.radians(35.0))


@functools.lru_cache(maxsize=None)
def scenario(name: str, **overrides):
    """Scenario for a zoo object under the default config, cached per session."""
    return build_scenario(ExperimentConfig(), name)


@functools.lru_cache(maxsize=None)
def scenario_with(name: str, sigma_f: float, mode: str):
    config = ExperimentConfig.from_dict({"gp": {"sigma_f": sigma_f}, "confidence": {"mode": mode}})
    return build_scenario(config, name)


@pytest.fixture
def shape():
    return DEFAULT_SHAPE


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, printed after the run even when output is captured
ACCEPTANCE_LINES: dict[int, str] = {}


def record_criterion(number: int, title: str, ok: bool, detail: str):
    ACCEPTANCE_LINES[number] = f"criterion {number:>2} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
    print(ACCEPTANCE_LINES[number])


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[number])
