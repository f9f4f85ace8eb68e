import re

import pytest

from tramfl import generate_synthetic


@pytest.fixture(scope="session")
def mnist_shaped():
    """10 classes x 6000 samples, the shape of a classic digit benchmark."""
    return generate_synthetic(10, 2, 6000, 1.0, seed=3)


@pytest.fixture(scope="session")
def review_shaped():
    """2 classes x 12500 samples, the shape of a binary review benchmark."""
    return generate_synthetic(2, 1, 12500, 1.0, seed=4)


def pytest_terminal_summary(terminalreporter):
    """Print one pass/fail line per acceptance criterion."""
    outcomes = {}
    for key in ("passed", "failed"):
        for report in terminalreporter.stats.get(key, []):
            if report.when != "call":
                continue
            name = report.nodeid.split("::")[-1]
            match = re.match(r"test_criterion_(\d+)", name)
            if match:
                outcomes[int(match.group(1))] = (name, report.outcome)
    if not outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(outcomes):
        name, outcome = outcomes[num]
        terminalreporter.write_line(f"criterion {num}: {outcome.upper():4s}  ({name})")
