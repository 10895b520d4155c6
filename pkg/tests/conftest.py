import pytest

from vibrotac.metrics import mask_from_gt
from vibrotac.synth import generate, named_scenario


@pytest.fixture(scope="session")
def default_scene():
    return named_scenario("default")


@pytest.fixture(scope="session")
def default_output(default_scene):
    return generate(default_scene)


@pytest.fixture(scope="session")
def default_mask(default_output):
    return mask_from_gt(default_output.gt.pixels)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def report():
    """Record one PASS/FAIL line for an acceptance criterion, then assert it."""

    def _report(number: int, title: str, ok: bool, detail: str) -> None:
        line = f"{'PASS' if ok else 'FAIL'} criterion {number:2d} ({title}): {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line

    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2])):
            terminalreporter.write_line(line)
