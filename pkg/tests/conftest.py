"""Shared fixtures: one full run of every preset per session."""

import os
import time

import pytest
from hypothesis import settings

from riskdecomp.harness import PRESETS, ExperimentConfig, run_experiment

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def preset_runs(tmp_path_factory):
    """Every registered preset at its default trial count, two worker threads.

    Returns ``{name: (ExperimentResult, seconds)}``; files live under a
    session temporary directory.
    """
    out = tmp_path_factory.mktemp("presets")
    runs = {}
    for name in PRESETS:
        start = time.perf_counter()
        res = run_experiment(ExperimentConfig(preset=name, out_dir=out, threads=2))
        runs[name] = (res, time.perf_counter() - start)
    return runs


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
