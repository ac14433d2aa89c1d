import os
from importlib import resources

import pytest
from hypothesis import HealthCheck, settings

from aisinv import parse

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", deadline=None, max_examples=50, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

CORPUS = resources.files("aisinv") / "corpus"


def corpus_text(name: str) -> str:
    return (CORPUS / name).read_text(encoding="utf-8")


def corpus_path(name: str) -> str:
    return str(CORPUS / name)


@pytest.fixture(scope="session")
def gcd():
    return parse(corpus_text("gcd_lcm.whl"))


@pytest.fixture(scope="session")
def power():
    return parse(corpus_text("power.whl"))


@pytest.fixture(scope="session")
def multiply():
    return parse(corpus_text("multiply.whl"))


def pytest_terminal_summary(terminalreporter):
    from tests.acceptance_report import LINES
    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in LINES:
            terminalreporter.write_line(line)
