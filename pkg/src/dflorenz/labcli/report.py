"""Report bundles and their on-disk form."""

from __future__ import annotations

import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

TRAJECTORY_HEADER = ("t", "x1", "x2", "x3", "s")


@dataclass
class CheckResult:
    name: str
    anchor: str
    passed: bool
    value: float
    threshold: str = ""

    def to_dict(self):
        return {"name": self.name, "anchor": self.anchor, "passed": bool(self.passed), "value": _num(self.value), "threshold": self.threshold}


@dataclass
class Table:
    header: tuple
    rows: list = field(default_factory=list)


@dataclass
class ReportBundle:
    checks: list = field(default_factory=list)
    tables: dict = field(default_factory=dict)
    metrics: dict = field(default_factory=dict)
    errors: list = field(default_factory=list)
    config_echo: str = ""
    run_meta: dict = field(default_factory=dict)

    def check(self, name, anchor, passed, value, threshold=""):
        self.checks.append(CheckResult(name, anchor, bool(passed), value, threshold))

    def table(self, name, header):
        t = self.tables.setdefault(name, Table(tuple(header)))
        return t

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def merge(self, other: "ReportBundle"):
        self.checks.extend(other.checks)
        for k, t in other.tables.items():
            self.tables[k] = t
        self.metrics.update(other.metrics)
        self.errors.extend(other.errors)
        return self

    def summary(self):
        return {
            "passed": self.passed,
            "checks": [c.to_dict() for c in self.checks],
            "metrics": {k: _jsonable(v) for k, v in sorted(self.metrics.items())},
            "errors": list(self.errors),
            "tables": {k: {"file": f"{k}.csv", "rows": len(t.rows)} for k, t in sorted(self.tables.items())},
        }


def _num(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if v is None:
        return None
    v = float(v)
    if math.isfinite(v):
        # fixed 17 significant digits so the JSON bytes are reproducible
        return float(format(v, ".17g"))
    return "inf" if v > 0 else ("-inf" if v < 0 else "nan")


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_jsonable(x) for x in v]
    if isinstance(v, str):
        return v
    return _num(v)


def fmt_cell(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if v is None:
        return ""
    return format(float(v), ".17g")


def csv_text(header, rows) -> str:
    lines = [",".join(header)]
    lines.extend(",".join(fmt_cell(c) for c in r) for r in rows)
    return "\n".join(lines) + "\n"


def _atomic_write(path: Path, text: str):
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def emit(report: ReportBundle, directory) -> list:
    """Write ``summary.json``, one CSV per table, the config echo and run metadata."""
    out = Path(directory)
    try:
        out.mkdir(parents=True, exist_ok=True)
        paths = []
        p = out / "summary.json"
        _atomic_write(p, json.dumps(report.summary(), indent=2, sort_keys=True) + "\n")
        paths.append(p)
        for name, t in sorted(report.tables.items()):
            p = out / f"{name}.csv"
            _atomic_write(p, csv_text(t.header, t.rows))
            paths.append(p)
        p = out / "config_echo.ini"
        _atomic_write(p, report.config_echo)
        paths.append(p)
        # wall time and versions change between runs; kept out of summary.json
        p = out / "run_meta.json"
        _atomic_write(p, json.dumps(_jsonable(report.run_meta), indent=2, sort_keys=True) + "\n")
        paths.append(p)
    except OSError as e:
        raise OSError(f"cannot write report to {e.filename or out}: {e.strerror}") from e
    return paths


def trajectory_table(orbit) -> Table:
    return Table(TRAJECTORY_HEADER, orbit.to_rows())
