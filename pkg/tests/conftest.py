import pytest

MEASUREMENTS = []


def pytest_addoption(parser):
    parser.addoption("--extended", action="store_true", default=False,
                     help="run the slow runs at simulation step 1e-4")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--extended"):
        return
    skip = pytest.mark.skip(reason="needs --extended")
    for item in items:
        if "extended" in item.keywords:
            item.add_marker(skip)


@pytest.fixture
def measured():
    """Record ``(label, value, target)`` lines for the terminal summary."""
    def record(label, value, target):
        MEASUREMENTS.append((label, value, target))
    return record


def pytest_terminal_summary(terminalreporter):
    if not MEASUREMENTS:
        return
    terminalreporter.section("acceptance measurements")
    for label, value, target in MEASUREMENTS:
        terminalreporter.write_line(f"{label}: measured {value}  target {target}")
