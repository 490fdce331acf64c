import pytest

from coarsegeo.groups import GroupSpec

Z1 = GroupSpec.free_abelian(1)
Z2 = GroupSpec.free_abelian(2)
F2 = GroupSpec.free(2)
S2 = GroupSpec.surface(2)
D_INF = GroupSpec.free_product_of_cyclics([2, 2])
F2xZ = GroupSpec.direct_product([F2, Z1])

FAMILIES = {
    "Z2": Z2,
    "Z3": GroupSpec.free_abelian(3),
    "F2": F2,
    "F3": GroupSpec.free(3),
    "Surface2": S2,
    "Dinf": D_INF,
    "Z3*Z0*Z4": GroupSpec.free_product_of_cyclics([3, 0, 4]),
    "F2xZ": F2xZ,
}


@pytest.fixture(params=sorted(FAMILIES))
def family(request):
    return FAMILIES[request.param]


# -- acceptance report: one PASS/FAIL line per criterion

CRITERIA = {
    1: "growth exactness",
    2: "flagship detection",
    3: "negative controls",
    4: "neighborhood inclusion bound",
    5: "QI invariance of separation",
    6: "coends",
    7: "commensurizer probe",
    8: "almost-invariant set",
    9: "interlaced-coset probes",
    10: "noncrossing",
    11: "distortion",
    12: "determinism",
}

_outcomes: dict[int, list[tuple[str, str, str]]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion this test certifies")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    n = mark.args[0]
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        if hasattr(rep, "wasxfail"):
            status, why = "FAIL", f"expected failure: {rep.wasxfail}"
        elif rep.passed:
            status, why = "PASS", ""
        elif rep.skipped:
            status, why = "FAIL", "skipped"
        else:
            status, why = "FAIL", rep.longreprtext.strip().splitlines()[-1] if rep.longreprtext else "error"
        _outcomes.setdefault(n, []).append((item.name, status, why))


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(CRITERIA):
        runs = _outcomes.get(n)
        if not runs:
            tr.write_line(f"criterion {n:2d} ({CRITERIA[n]}): NOT RUN")
            continue
        failed = [(name, why) for name, status, why in runs if status == "FAIL"]
        verdict = "FAIL" if failed else "PASS"
        tr.write_line(f"criterion {n:2d} ({CRITERIA[n]}): {verdict} [{len(runs) - len(failed)}/{len(runs)} checks]")
        for name, why in failed:
            tr.write_line(f"    {name}: {why}")
