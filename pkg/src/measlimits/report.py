"""Report rows and their JSON / CSV serialization.

Numbers are written with 12 significant digits and fields always appear in
the same order, so two runs with the same configuration produce identical
files apart from the ``generated`` timestamp in JSON reports.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

CSV_HEADER = ("scenario", "params", "metric", "value", "bound", "margin", "pass")


def fmt(x) -> str:
    """12-significant-digit text for numbers; ``inf``/``-inf``/``nan`` spelled out."""
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (int, float)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return f"{x:.12g}"
    return str(x)


def _json_number(x):
    if x is None or isinstance(x, bool):
        return x
    x = float(x)
    if not math.isfinite(x):
        return fmt(x)
    return float(f"{x:.12g}")


def format_params(params: dict) -> str:
    return ";".join(f"{k}={fmt(v) if not isinstance(v, str) else v}" for k, v in sorted(params.items()))


@dataclass
class ReportRow:
    """One metric of one scenario.

    ``sense`` says how ``value`` is compared with ``bound``: ``">="`` (a lower bound),
    ``"<="`` (a tolerance) or ``"=="`` with ``tol`` (a reference value).  ``passed``
    may be given explicitly when a verifier applies its own slack.
    """

    scenario: str
    params: dict
    metric: str
    value: float
    bound: float | None = None
    sense: str = ">="
    tol: float = 0.0
    passed: bool | None = None
    note: str = ""

    def __post_init__(self):
        if self.sense not in (">=", "<=", "=="):
            raise ValueError(f"unknown comparison {self.sense!r}")
        if self.bound is None:
            if self.passed is not None:
                raise ValueError("pass is only defined against a bound")
        elif self.passed is None:
            self.passed = bool(self.margin >= 0)

    @property
    def margin(self) -> float | None:
        if self.bound is None:
            return None
        v, b = float(self.value), float(self.bound)
        if self.sense == ">=":
            return v - b if not (math.isinf(v) and math.isinf(b)) else 0.0
        if self.sense == "<=":
            return b - v
        return self.tol - abs(v - b)

    def as_dict(self) -> dict:
        return {"scenario": self.scenario, "params": format_params(self.params),
                "metric": self.metric, "value": _json_number(self.value),
                "bound": _json_number(self.bound), "margin": _json_number(self.margin),
                "pass": self.passed, "note": self.note}


def record(r) -> dict:
    """Serializable dict for a :class:`ReportRow` (dicts pass through)."""
    return r.as_dict() if isinstance(r, ReportRow) else dict(r)


def csv_fields(rec: dict) -> list[str]:
    def num(x):
        return fmt(float(x)) if isinstance(x, str) and x in ("inf", "-inf", "nan") else fmt(x)
    return [rec["scenario"], rec["params"], rec["metric"], num(rec["value"]), num(rec["bound"]),
            num(rec["margin"]), "" if rec["pass"] is None else fmt(bool(rec["pass"]))]


def all_passed(rows) -> bool:
    return all(record(r)["pass"] is not False for r in rows)


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in rows:
        w.writerow(csv_fields(record(r)))
    return buf.getvalue()


def rows_to_json(rows, meta: dict | None = None, timestamp: str | None = None) -> str:
    doc = {"generated": timestamp or datetime.now(timezone.utc).isoformat(timespec="seconds"),
           "meta": meta or {}, "rows": [record(r) for r in rows]}
    return json.dumps(doc, indent=2) + "\n"


def emit_report(rows, fmt_name: str, dest, meta: dict | None = None) -> Path:
    """Write rows as ``json`` or ``csv`` to ``dest`` and return the path."""
    dest = Path(dest)
    if fmt_name == "csv":
        text = rows_to_csv(rows)
    elif fmt_name == "json":
        text = rows_to_json(rows, meta)
    else:
        raise ValueError(f"unknown report format {fmt_name!r}")
    dest.parent.mkdir(parents=True, exist_ok=True)
    dest.write_text(text)
    return dest


def _parse_value(text: str):
    if text == "":
        return None
    if text in ("true", "false"):
        return text == "true"
    return float(text)


def read_csv(path) -> list[dict]:
    with Path(path).open(newline="") as fh:
        r = csv.DictReader(fh)
        if tuple(r.fieldnames or ()) != CSV_HEADER:
            raise ValueError("unexpected CSV header")
        return [{"scenario": rec["scenario"], "params": rec["params"], "metric": rec["metric"],
                 "value": _parse_value(rec["value"]), "bound": _parse_value(rec["bound"]),
                 "margin": _parse_value(rec["margin"]), "pass": _parse_value(rec["pass"])}
                for rec in r]


def read_json(path) -> list[dict]:
    return json.loads(Path(path).read_text())["rows"]
