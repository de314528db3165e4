import pytest
from hypothesis import settings

from sgf.config import CanvasConfig
from sgf.env import FloorplanEnv
from sgf.netlist import toy3 as _toy3

settings.register_profile("sgf", deadline=None, max_examples=50)
settings.load_profile("sgf")


@pytest.fixture
def toy3():
    return _toy3()


@pytest.fixture
def small_cfg():
    return CanvasConfig(6, 6, 2)


@pytest.fixture
def toy_env(toy3, small_cfg):
    return FloorplanEnv(toy3, small_cfg)


ACCEPTANCE_KEY = pytest.StashKey[list]()


@pytest.fixture
def acceptance(request):
    """Record one pass/fail line per acceptance criterion for the terminal summary."""
    lines = request.config.stash.setdefault(ACCEPTANCE_KEY, [])

    def record(name: str, ok: bool, detail: str) -> bool:
        line = f"{'PASS' if ok else 'FAIL'} {name}: {detail}"
        lines.append(line)
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1][1:].rstrip(":"))):
            terminalreporter.write_line(line)
