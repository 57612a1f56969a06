from __future__ import annotations

from pathlib import Path

import pytest

from dessin_census.config import ConfigError, load_settings


@pytest.fixture(autouse=True)
def clean_environment(monkeypatch, tmp_path):
    for name in ("STORE", "MAX_GENUS", "WORKERS", "BUDGET_NODES", "BUDGET_SECONDS", "MODE", "FORMAT", "API_KEY"):
        monkeypatch.delenv(f"DESSIN_CENSUS_{name}", raising=False)
    monkeypatch.chdir(tmp_path)


def test_defaults():
    settings = load_settings()
    assert settings.store_path == Path("census")
    assert settings.max_genus == 5
    assert settings.workers == 1
    assert settings.budget_nodes is None
    assert settings.mode == "torsion-free"
    assert settings.output_format == "human"
    assert settings.extension_slack == 1.25
    assert settings.api_key is None


def test_precedence(monkeypatch, tmp_path):
    monkeypatch.setenv("DESSIN_CENSUS_MAX_GENUS", "3")
    monkeypatch.setenv("DESSIN_CENSUS_WORKERS", "2")
    monkeypatch.setenv("DESSIN_CENSUS_BUDGET_NODES", "100")
    config_file = tmp_path / "census.env"
    config_file.write_text("DESSIN_CENSUS_MAX_GENUS=4\nDESSIN_CENSUS_MODE=all\n")
    settings = load_settings(config_file, workers=6)
    assert settings.max_genus == 4
    assert settings.mode == "all"
    assert settings.workers == 6
    assert settings.budget_nodes == 100


def test_none_overrides_are_ignored(monkeypatch):
    monkeypatch.setenv("DESSIN_CENSUS_STORE", "/tmp/elsewhere")
    assert load_settings(store_path=None).store_path == Path("/tmp/elsewhere")


@pytest.mark.parametrize(
    "overrides, key",
    [
        ({"max_genus": 1}, "max_genus"),
        ({"workers": 0}, "workers"),
        ({"mode": "fast"}, "mode"),
        ({"output_format": "xml"}, "output_format"),
        ({"budget_nodes": "many"}, "budget_nodes"),
        ({"colour": "blue"}, "colour"),
    ],
)
def test_invalid_values_name_the_key(overrides, key):
    with pytest.raises(ConfigError) as info:
        load_settings(**overrides)
    assert info.value.key == key


def test_missing_config_file():
    with pytest.raises(ConfigError) as info:
        load_settings("nowhere.env")
    assert info.value.key == "config_file"
