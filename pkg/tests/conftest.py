import math
from fractions import Fraction


def power_compare(c1, b1, c2, b2) -> int:
    """Independent oracle: sign of c1*log(b1) - c2*log(b2) with c >= 0, b > 0,
    via b1^(c1 L) vs b2^(c2 L) over big rationals (L clears denominators)."""
    c1, b1, c2, b2 = map(Fraction, (c1, b1, c2, b2))
    L = math.lcm(c1.denominator, c2.denominator)
    n1, n2 = c1 * L, c2 * L
    # both exponents are now integers; rational roots are avoided entirely
    assert n1.denominator == 1 and n2.denominator == 1
    left, right = b1 ** int(n1), b2 ** int(n2)
    return (left > right) - (left < right)


_CRITERIA: dict[str, tuple[str, str]] = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py::test_criterion_" not in report.nodeid:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        name = report.nodeid.split("::")[-1][len("test_criterion_"):]
        detail = dict(report.user_properties).get("detail", "")
        _CRITERIA[name] = ("PASS" if report.outcome == "passed" else "FAIL", detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_CRITERIA):
        status, detail = _CRITERIA[name]
        terminalreporter.write_line(f"criterion {name}: {status}  {detail}")
