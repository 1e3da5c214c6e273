import functools
import time

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# lines collected by the acceptance suite, printed once at the end of the run
ACCEPTANCE_LINES = []


def record_criterion(number, title, passed, detail=""):
    line = f"criterion {number} [{'PASS' if passed else 'FAIL'}] {title}"
    if detail:
        line += f": {detail}"
    ACCEPTANCE_LINES.append((number, line))
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@functools.lru_cache(maxsize=None)
def _pretext_backbone():
    from lesionxfer.experiments import ExperimentConfig, pretrained_backbone

    start = time.perf_counter()
    backbone = pretrained_backbone(ExperimentConfig())
    return backbone, time.perf_counter() - start


@pytest.fixture(scope="session")
def pretext_backbone():
    """The desk-scale pretext-pretrained backbone, built once per session."""
    return _pretext_backbone()[0]


@pytest.fixture(scope="session")
def pretext_build_seconds(pretext_backbone):
    return _pretext_backbone()[1]
