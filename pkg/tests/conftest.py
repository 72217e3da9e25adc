"""Shared fixtures. The full spiral benchmark is built once per session."""

import pytest

from manifold_explain.bench import BenchConfig, run_benchmark

BENCH_SEED = 0


@pytest.fixture(scope="session")
def bench_run():
    """``(report, pipeline, explanations)`` for the default benchmark."""
    return run_benchmark(BenchConfig(seed=BENCH_SEED))


@pytest.fixture(scope="session")
def spiral_pipeline(bench_run):
    return bench_run[1]


@pytest.fixture(scope="session")
def bench_report(bench_run):
    return bench_run[0]


@pytest.fixture(scope="session")
def acceptance_log(request):
    """Collects one line per acceptance criterion for the terminal summary."""
    return request.config.stash.setdefault(_LOG_KEY, [])


_LOG_KEY = pytest.StashKey[list]()


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_LOG_KEY, [])
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
        terminalreporter.write_line(line)
