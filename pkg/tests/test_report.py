import json

import numpy as np
import pytest

from measlimits.plotting import Series, emit_series
from measlimits.report import (CSV_HEADER, ReportRow, all_passed, emit_report, fmt, read_csv,
                               read_json, rows_to_csv, rows_to_json)


def _rows():
    return [ReportRow("s", {"n": 64, "L": 20.0}, "m1", 0.1234567890123456, 0.2, "<="),
            ReportRow("s", {}, "m2", float("inf"), 1.0, ">="),
            ReportRow("s", {}, "info", 3.0)]


def test_fmt():
    assert fmt(0.1234567890123456) == "0.123456789012"
    assert fmt(float("inf")) == "inf"
    assert fmt(None) == ""
    assert fmt(True) == "true"


def test_row_pass_logic():
    r = _rows()
    assert r[0].passed and r[0].margin == pytest.approx(0.2 - 0.1234567890123456)
    assert r[1].passed
    assert r[2].passed is None and r[2].margin is None
    assert ReportRow("s", {}, "x", 1.0, 1.0, "==", 1e-3).passed
    assert ReportRow("s", {}, "x", 1.1, 1.0, "==", 1e-3).passed is False
    with pytest.raises(ValueError):
        ReportRow("s", {}, "x", 1.0, None, passed=True)
    with pytest.raises(ValueError):
        ReportRow("s", {}, "x", 1.0, 1.0, "<>")


def test_empty_csv_is_header_only():
    assert rows_to_csv([]) == ",".join(CSV_HEADER) + "\n"


def test_csv_roundtrip(tmp_path):
    p = emit_report(_rows(), "csv", tmp_path / "r.csv")
    back = read_csv(p)
    assert [b["metric"] for b in back] == ["m1", "m2", "info"]
    assert back[0]["value"] == pytest.approx(0.123456789012)
    assert back[0]["pass"] is True
    assert back[1]["value"] == float("inf")
    assert back[2]["pass"] is None
    assert back[0]["params"] == "L=20;n=64"


def test_json_roundtrip_and_stability(tmp_path):
    a = rows_to_json(_rows(), {"x": 1}, timestamp="T")
    b = rows_to_json(_rows(), {"x": 1}, timestamp="T")
    assert a == b
    doc = json.loads(a)
    assert list(doc) == ["generated", "meta", "rows"]
    assert list(doc["rows"][0]) == ["scenario", "params", "metric", "value", "bound", "margin",
                                    "pass", "note"]
    p = emit_report(_rows(), "json", tmp_path / "r.json")
    assert read_json(p)[1]["value"] == "inf"
    with pytest.raises(ValueError):
        emit_report([], "xml", tmp_path / "r.xml")


def test_all_passed():
    assert all_passed(_rows())
    assert not all_passed(_rows() + [ReportRow("s", {}, "bad", 2.0, 1.0, "<=")])


def test_emit_series(tmp_path):
    s = [Series("a", [0, 1, 2], [1, 2, 3], "x", "y", "fig"),
         Series("b", [0, 1], [0, 1], "x", "y", "fig", "points")]
    man = emit_series(s, tmp_path)
    data = np.loadtxt(tmp_path / "data" / "a.dat")
    assert data.shape == (3, 2)
    assert (tmp_path / "figures" / "fig.png").exists()
    assert man["figures"][0]["series"] == ["a", "b"]
    with pytest.raises(ValueError):
        Series("bad", [0, 1], [0])
