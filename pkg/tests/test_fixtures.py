import json

import pytest

from bimorph_ao import config, fixtures


@pytest.fixture(scope="module")
def report():
    return fixtures.validate_all()


def test_all_tables_pass(report):
    assert report["ok"] and report["failed"] == []


def test_degree_five_rows_flagged(report):
    flagged = {r["row"] for r in report["table1"] if r["status"] == "flagged"}
    assert flagged == {14, 15}


def test_anomalous_drift_rows_skipped(report):
    skipped = {r["row"] for r in report["table2"] if r["status"] == "anomalous-skip"}
    assert skipped == {11, 12}


def test_missing_fixture(tmp_path):
    with pytest.raises(fixtures.FixtureError):
        fixtures.load("table1.json", tmp_path)


def test_wrong_row_width(tmp_path):
    (tmp_path / "table3.json").write_text(json.dumps({"nu": 0.2, "k_max": 5, "rows": [[1, 2]]}))
    with pytest.raises(fixtures.FixtureError):
        fixtures.check_table3(fixtures.load("table3.json", tmp_path))


def test_config_round_trip(tmp_path):
    cfg = config.load(None, seed=4, runs=3)
    path = tmp_path / "c.json"
    path.write_text(cfg.echo())
    assert config.load(path) == cfg


def test_config_override_validation():
    with pytest.raises(config.ConfigError):
        config.load(None, runs=0)
