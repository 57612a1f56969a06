from __future__ import annotations

import os
from pathlib import Path

import pytest

from dessin_census.census import CensusService
from dessin_census.config import load_settings
from dessin_census.fpgroup import CosetTable
from dessin_census.models import UnitStatus
from dessin_census.signatures import Signature

GOLDEN = Path(__file__).parent / "golden"


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run slow census searches")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


def cyclic_table(order: int, a: int, b: int) -> CosetTable:
    """Standardized table of the kernel of x -> a, y -> b onto Z/order."""

    x_perm = [(c + a) % order for c in range(order)]
    y_perm = [(c + b) % order for c in range(order)]
    return CosetTable.from_permutations(x_perm, y_perm).standardized()


@pytest.fixture
def golden():
    """Expected output stored under tests/golden, compared byte for byte."""

    def read(name: str) -> str:
        return (GOLDEN / name).read_text(encoding="utf-8")

    return read


@pytest.fixture
def cyclic():
    return cyclic_table


@pytest.fixture
def settings(tmp_path: Path, monkeypatch):
    for name in [key for key in os.environ if key.startswith("DESSIN_CENSUS_")]:
        monkeypatch.delenv(name)
    monkeypatch.chdir(tmp_path)
    return load_settings(store_path=tmp_path / "census", max_genus=3)


@pytest.fixture
def small_plan(monkeypatch):
    """Restrict the census to the cyclic units (5,5,5)@5 at genus 2 and (7,7,7)@7 at genus 3."""

    def plan(self, g_max):
        units = [
            UnitStatus(signature=Signature(5, 5, 5), index=5, genus=2),
            UnitStatus(signature=Signature(7, 7, 7), index=7, genus=3),
        ]
        return [unit for unit in units if unit.genus <= g_max]

    monkeypatch.setattr(CensusService, "plan", plan)
