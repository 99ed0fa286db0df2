import pytest

from capshare.model import RequestClass, ServiceLength, SystemConfig


def two_class(m, d, lam, b, second=ServiceLength.exponential):
    return SystemConfig(m, [
        RequestClass(float(lam[0]), d[0], ServiceLength.exponential(float(b[0]))),
        RequestClass(float(lam[1]), d[1], second(float(b[1]))),
    ])


@pytest.fixture
def t1_row1():
    return two_class(2, (1, 2), (1, 1), (1 / 2, 1 / 4))


@pytest.fixture
def t4_row1():
    return SystemConfig.single(3, 1.0, 2, ServiceLength.exponential(1.0))


_ACCEPTANCE = {}


def record(criterion, key, ok, detail=""):
    _ACCEPTANCE.setdefault(criterion, {})[key] = (ok, detail)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for criterion in sorted(_ACCEPTANCE):
        checks = _ACCEPTANCE[criterion]
        bad = [f"{k}: {d}" for k, (ok, d) in checks.items() if not ok]
        status = "PASS" if not bad else "FAIL"
        line = f"criterion {criterion}: {status} ({len(checks) - len(bad)}/{len(checks)} checks)"
        if bad:
            line += " -- " + "; ".join(bad)
        terminalreporter.write_line(line)
