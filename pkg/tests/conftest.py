from collections import OrderedDict

import pytest

CRITERIA = {
    1: "inter-nodal reduction 1.896 mm, rounds to 2 mm",
    2: "per-eye angle error (paper_approx oracle, exact band)",
    3: "AR depth displacement 6.25 mm / 5.8-6.0 mm, nearer",
    4: "CAVE horizon displacement 4.01 mm, 0.154 deg",
    5: "Cardboard optics f=59.133, 1580 mm, x27.7",
    6: "gaze-contingent zeroes m1-m14 on 100 random scenarios",
    7: "orientation invariance <= 1e-12 mm",
    8: "window-plane fixed point under all policies",
    9: "m2 sign law on the d x D grid",
    10: "pre-shift exact at infinity, residual near",
    11: "m3 horizon error strictly decreasing with distance",
    12: "byte-identical reports and parallel sweeps",
}

_outcomes: "OrderedDict[int, list]" = OrderedDict()


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    n = marker.args[0]
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        _outcomes.setdefault(n, []).append((item.name, rep.passed))


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(_outcomes):
        results = _outcomes[n]
        ok = all(p for _, p in results)
        line = f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {CRITERIA.get(n, '')}"
        failed = [name for name, p in results if not p]
        if failed:
            line += f"  [failed: {', '.join(failed)}]"
        tr.write_line(line)
    n_pass = sum(all(p for _, p in r) for r in _outcomes.values())
    tr.write_line(f"{n_pass}/{len(_outcomes)} criteria passed")
