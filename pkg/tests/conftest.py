import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def random_domains(rng, d, n_s, n_t, shift=0.0):
    X_S = rng.standard_normal((d, n_s))
    X_T = rng.standard_normal((d, n_t))
    if shift:
        X_T = X_T * (1.0 + shift * rng.random((d, 1)))
    return X_S, X_T


_criteria = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


def pytest_runtest_logreport(report):
    marker = dict(report.user_properties).get("criterion")
    if marker is None:
        return
    number, title = marker
    detail = dict(report.user_properties).get("detail", "")
    if report.skipped:
        reason = report.longrepr[2] if isinstance(report.longrepr, tuple) else ""
        _criteria[number] = ("SKIP", title, reason)
    elif report.failed:
        _criteria[number] = ("FAIL", title, detail)
    elif report.when == "call":
        _criteria[number] = ("PASS", title, detail)


def pytest_collection_modifyitems(items):
    for item in items:
        marker = item.get_closest_marker("criterion")
        if marker is not None:
            item.user_properties.append(("criterion", tuple(marker.args)))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        status, title, detail = _criteria[number]
        line = f"criterion {number} {status}: {title}"
        if detail:
            line += f" ({detail})"
        terminalreporter.write_line(line)
