from __future__ import annotations

import sys
from functools import lru_cache
from pathlib import Path

import pytest

from rqcopf.caseio import load_case
from rqcopf.localopf import solve_local

ROOT = Path(__file__).resolve().parents[1]
DATA = ROOT / "data"
PGLIB = DATA / "pglib"


def case_path(name: str) -> Path:
    return PGLIB / f"pglib_opf_{name}.m"


@lru_cache(maxsize=None)
def cached_case(name: str):
    return load_case(case_path(name))


@lru_cache(maxsize=None)
def cached_local(name: str):
    return solve_local(cached_case(name))


@pytest.fixture(scope="session")
def case3():
    return cached_case("case3_lmbd")


@pytest.fixture(scope="session")
def case5():
    return cached_case("case5_pjm")


@pytest.fixture(scope="session")
def case14():
    return cached_case("case14_ieee")


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in range(1, 11):
        ok, detail = mod.RESULTS.get(n, (False, "not run"))
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
