import numpy as np
import pytest

from loschmidt.model import (ModelMeta, PerturbationMatrix, assemble, build_levels,
                             synthetic_model)


def small_model(n=8, seed=0, g=0.0, strength=1.0, **kw):
    return synthetic_model(n, g, strength=strength, gamma_cl=10.0, seed=seed, **kw)


def two_level(b01=1.0, diag=(0.0, 0.0), energies=(0.0, 1.0)):
    levels = build_levels(2, energies[1] - energies[0], e_base=energies[0])
    b = PerturbationMatrix(np.array([[diag[0], b01], [b01, diag[1]]]), "synthetic")
    return assemble(levels, b, ModelMeta(1.0, 50.0, 0.0, 1.0, 10.0))


@pytest.fixture
def model32():
    return small_model(32, seed=11)


# acceptance criteria report: one line per criterion after the run

_ACCEPTANCE = {}


def pytest_runtest_makereport(item, call):
    mark = item.get_closest_marker("acceptance")
    if mark is None or call.when not in ("setup", "call"):
        return
    key = mark.args
    passed = call.excinfo is None
    if call.when == "call" or not passed:
        _ACCEPTANCE[key] = _ACCEPTANCE.get(key, True) and passed


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for (number, title), passed in sorted(_ACCEPTANCE.items()):
        terminalreporter.write_line(f"criterion {number:<3} {'PASS' if passed else 'FAIL'}  {title}")
