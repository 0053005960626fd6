"""CSV ingestion and report serialisation."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .detector import ChangepointSet, TestReport
from .simulate import TimeSeries

TRANSFORMS = ("none", "log", "logdiff", "logplusone")
FORMATS = ("structured", "delimited", "plot-data")
SCHEMA = "rcacusum-report/1"


class DataError(ValueError):
    """Input data that cannot be turned into a series; carries the file line when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass(frozen=True)
class IngestSpec:
    """Which column of which file to read and how to transform it.

    ``column`` is a header name or a zero-based index.  ``logdiff`` returns
    one value fewer than the file holds.
    """

    path: str
    column: str | int = 0
    transform: str = "none"
    date_column: str | int | None = None

    def __post_init__(self):
        if self.transform not in TRANSFORMS:
            raise ValueError(f"transform must be one of {TRANSFORMS}")


def _resolve(col, header: list[str] | None, width: int) -> int:
    if isinstance(col, str) and not col.lstrip("-").isdigit():
        if header is None or col not in header:
            raise DataError(f"column {col!r} not found in header")
        return header.index(col)
    j = int(col)
    if not 0 <= j < width:
        raise DataError(f"column index {j} out of range for {width} columns")
    return j


def _is_number(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def load_series(spec: IngestSpec) -> TimeSeries:
    """Read one numeric column, with comma, semicolon or tab auto-detected as delimiter."""
    path = Path(spec.path)
    if not path.is_file():
        raise DataError(f"no such file: {path}")
    text = path.read_text()
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise DataError("file is empty")
    try:
        dialect = csv.Sniffer().sniff("\n".join(lines[:20]), delimiters=",;\t")
        delim = dialect.delimiter
    except csv.Error:
        delim = ","
    rows = list(csv.reader(text.splitlines(), delimiter=delim))
    numbered = [(i + 1, r) for i, r in enumerate(rows) if any(c.strip() for c in r)]
    width = len(numbered[0][1])
    first = [c.strip() for c in numbered[0][1]]
    by_name = isinstance(spec.column, str) and not spec.column.lstrip("-").isdigit()
    header = first if by_name or not all(_is_number(c) for c in first if c) else None
    j = _resolve(spec.column, header, width)
    jd = None if spec.date_column is None else _resolve(spec.date_column, header, width)
    body = numbered[1:] if header is not None else numbered

    values, dates, lines_used = [], [], []
    for line, row in body:
        if j >= len(row):
            raise DataError("row has too few columns", line)
        cell = row[j].strip()
        try:
            v = float(cell)
        except ValueError:
            raise DataError(f"non-numeric value {cell!r}", line) from None
        if not math.isfinite(v):
            raise DataError(f"non-finite value {cell!r}", line)
        values.append(v)
        lines_used.append(line)
        if jd is not None:
            dates.append(row[jd].strip() if jd < len(row) else "")

    x = np.asarray(values)
    t = spec.transform
    if t in ("log", "logdiff"):
        bad = np.flatnonzero(x <= 0)
        if bad.size:
            raise DataError(f"{t} needs positive values, got {x[bad[0]]:g}", lines_used[bad[0]])
        x = np.log(x)
        if t == "logdiff":
            x = np.diff(x)
            dates = dates[1:]
    elif t == "logplusone":
        bad = np.flatnonzero(x < 0)
        if bad.size:
            raise DataError(f"logplusone needs nonnegative values, got {x[bad[0]]:g}",
                            lines_used[bad[0]])
        x = np.log1p(x)
    if x.size < 2:
        raise DataError("fewer than two observations after transform")
    meta = {"source": str(path), "column": spec.column, "transform": t, "delimiter": delim}
    if jd is not None:
        meta["dates"] = dates
    return TimeSeries(x, label=header[j] if header else f"column {j}", meta=meta)


@dataclass
class ReportDocument:
    """Everything one CLI run produced, plus the configuration that produced it."""

    command: str
    config: dict = field(default_factory=dict)
    reports: list[TestReport] = field(default_factory=list)
    changepoints: ChangepointSet | None = None
    tables: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"schema": SCHEMA, "command": self.command, "config": self.config,
                "reports": [r.to_dict() for r in self.reports],
                "changepoints": None if self.changepoints is None else self.changepoints.to_dict(),
                "tables": self.tables, "meta": self.meta}

    @classmethod
    def from_dict(cls, d: dict) -> ReportDocument:
        if d.get("schema") != SCHEMA:
            raise ValueError(f"unsupported report schema {d.get('schema')!r}")
        cps = d.get("changepoints")
        return cls(d["command"], d["config"], [TestReport.from_dict(r) for r in d["reports"]],
                   None if cps is None else ChangepointSet.from_dict(cps), d["tables"], d["meta"])

    def __eq__(self, other):
        return isinstance(other, ReportDocument) and self.to_dict() == other.to_dict()


def parse_report(data: bytes | str) -> ReportDocument:
    if isinstance(data, bytes):
        data = data.decode()
    return ReportDocument.from_dict(json.loads(data))


def _all_reports(doc: ReportDocument) -> list[TestReport]:
    if doc.changepoints is not None and not doc.reports:
        return [r for _, r in doc.changepoints.breaks]
    return doc.reports


def emit_report(doc: ReportDocument, format: str = "structured") -> bytes:
    """Serialise ``doc``.

    ``structured`` is JSON and parses back with :func:`parse_report`;
    ``delimited`` gives one CSV row per test or detected break followed by
    any tables; ``plot-data`` gives one ``(t, process, threshold)`` row per
    split of every test.
    """
    if format not in FORMATS:
        raise ValueError(f"format must be one of {FORMATS}")
    if format == "structured":
        return (json.dumps(doc.to_dict(), indent=2, sort_keys=True) + "\n").encode()

    out = io.StringIO()
    wr = csv.writer(out, lineterminator="\n")
    if format == "plot-data":
        wr.writerow(["report", "k", "t", "process", "threshold"])
        for i, rep in enumerate(_all_reports(doc)):
            c = rep.curve
            for k, t, q, h in zip(c.get("k", []), c.get("t", []), c.get("process", []),
                                  c.get("threshold", [])):
                wr.writerow([i, int(k), repr(float(t)), repr(float(q)), repr(float(h))])
        return out.getvalue().encode()

    if doc.changepoints is not None:
        wr.writerow(["index", "n", "statistic", "critical_value", "t_hat"])
        for k, rep in doc.changepoints.breaks:
            wr.writerow([k, rep.n, rep.statistic_value, rep.critical_value, rep.t_hat])
    elif doc.reports:
        wr.writerow(["n", "statistic", "critical_value", "reject", "breakdate", "t_hat",
                     "eta_hat_sq"])
        for rep in doc.reports:
            wr.writerow([rep.n, rep.statistic_value, rep.critical_value, int(rep.reject),
                         "" if rep.breakdate is None else rep.breakdate,
                         "" if rep.t_hat is None else rep.t_hat,
                         "" if rep.eta_hat_sq is None else rep.eta_hat_sq])
    body = out.getvalue()
    for name, tab in doc.tables.items():
        if isinstance(tab, dict) and "delimited" in tab:
            body += f"# {name}\n{tab['delimited']}"
    return body.encode()

