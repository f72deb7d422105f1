import functools

import pytest

from garside_nf.structures import build_bkl, build_classical, build_g1

ACCEPTANCE_LINES: list[str] = []


@functools.lru_cache(maxsize=None)
def structure(name: str):
    if name == "g1":
        return build_g1()
    for kind, build in (("classical", build_classical), ("bkl", build_bkl)):
        if name.startswith(kind):
            return build(int(name[len(kind):]))
    raise KeyError(name)


SMALL = ["classical2", "classical3", "classical4", "bkl3", "bkl4", "g1"]


@pytest.fixture(params=SMALL)
def small(request):
    return structure(request.param)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
