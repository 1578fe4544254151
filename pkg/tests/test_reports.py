"""Tests for report persistence."""
import json

import pytest

from qkd_simulator.reports import ReportManager, dumps_json, frame_to_csv


class TestDumpsJson:

    def test_keeps_key_order(self):
        text = dumps_json({"b": 1, "a": 2})
        assert text.index('"b"') < text.index('"a"')
        assert text.endswith("\n")

    def test_equal_payloads_equal_bytes(self):
        assert dumps_json({"x": [1, 2], "y": None}) == dumps_json({"x": [1, 2], "y": None})


class TestFrameToCsv:

    def test_column_order(self):
        text = frame_to_csv([{"b": 1, "a": 2}], columns=["a", "b"])
        assert text.splitlines() == ["a,b", "2,1"]

    def test_missing_columns_are_blank(self):
        text = frame_to_csv([{"a": 1}], columns=["a", "b"])
        assert text.splitlines()[1] == "1,"

    def test_unix_line_endings(self):
        assert "\r" not in frame_to_csv([{"a": 1}, {"a": 2}])


class TestReportManager:

    def test_json_round_trip(self, tmp_path):
        manager = ReportManager(str(tmp_path / "run.json"))
        written = manager.save_json({"qber": 0.0, "aborted": False})
        assert written == tmp_path / "run.json"
        assert manager.load_json() == {"qber": 0.0, "aborted": False}

    def test_suffix_replaces_extension(self, tmp_path):
        manager = ReportManager(str(tmp_path / "run"))
        assert manager.save_json({"a": 1}, ".json") == tmp_path / "run.json"
        assert manager.save_csv([{"a": 1}], suffix=".csv") == tmp_path / "run.csv"
        assert manager.load_json(".json") == {"a": 1}
        assert list(manager.load_csv(".csv")["a"]) == [1]

    def test_creates_parent_directory(self, tmp_path):
        manager = ReportManager(str(tmp_path / "nested" / "out.csv"))
        manager.save_csv([{"round": 0, "error": 0}])
        assert (tmp_path / "nested" / "out.csv").exists()

    def test_stdout_when_no_path(self, capsys):
        manager = ReportManager()
        assert manager.save_json({"seed": 3}) is None
        assert json.loads(capsys.readouterr().out) == {"seed": 3}

    def test_table(self, capsys):
        ReportManager().save_table([{"identity": "bell_pair_expansions", "pass": True}], title="Identities")
        out = capsys.readouterr().out
        assert out.startswith("Identities\n")
        assert "bell_pair_expansions" in out

    def test_load_without_path(self):
        with pytest.raises(FileNotFoundError):
            ReportManager().load_json()
