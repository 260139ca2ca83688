"""CSV ingestion/emission and the sectioned text report format."""
from __future__ import annotations

import csv
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import IcuGap, MalformedRow, PositivityOutOfRange
from .model import CovariatePath, ObservedSeries

BASE_COLUMNS = ("date", "hospital_census", "icu_census")


@dataclass(frozen=True)
class IngestReport:
    rows_read: int
    rows_dropped: int
    gap_days_filled: int
    positivity_source: str  # "precomputed" | "derived-from-counts"

    @property
    def rows_kept(self) -> int:
        return self.rows_read - self.rows_dropped


def _int_field(value: str, name: str, line: int) -> int | None:
    value = value.strip()
    if value == "":
        return None
    try:
        number = float(value)
    except ValueError:
        raise MalformedRow(f"{name}={value!r} is not a number", line) from None
    if number < 0 or number != int(number):
        raise MalformedRow(f"{name}={value!r} is not a nonnegative integer", line)
    return int(number)


def _float_field(value: str, name: str, line: int) -> float | None:
    value = value.strip()
    if value == "":
        return None
    try:
        return float(value)
    except ValueError:
        raise MalformedRow(f"{name}={value!r} is not a number", line) from None


def ingest_csv(path) -> tuple[ObservedSeries, CovariatePath, IngestReport]:
    """Read ``date,hospital_census,icu_census`` plus positivity columns.

    Positivity is either a ``positivity`` column or ``positives_7d/tests_7d``.
    Blank rows and exact duplicate rows are dropped. An isolated missing
    hospital census is linearly interpolated and an isolated missing
    positivity is carried forward; a missing ICU day is an error.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise MalformedRow("empty file", 1) from None
        missing = [c for c in BASE_COLUMNS if c not in header]
        if "positivity" in header:
            source = "precomputed"
        elif "positives_7d" in header and "tests_7d" in header:
            source = "derived-from-counts"
        else:
            missing.append("positivity | positives_7d,tests_7d")
        if missing:
            raise MalformedRow(f"missing columns: {', '.join(missing)}", 1)
        col = {name: k for k, name in enumerate(header)}

        records: dict[np.datetime64, tuple] = {}
        rows_read = dropped = 0
        for line, row in enumerate(reader, start=2):
            rows_read += 1
            if not any(cell.strip() for cell in row):
                dropped += 1
                continue
            if len(row) != len(header):
                raise MalformedRow(f"expected {len(header)} fields, got {len(row)}", line)
            try:
                day = np.datetime64(row[col["date"]].strip(), "D")
            except ValueError:
                raise MalformedRow(f"bad date {row[col['date']]!r}", line) from None
            h = _int_field(row[col["hospital_census"]], "hospital_census", line)
            icu = _int_field(row[col["icu_census"]], "icu_census", line)
            if source == "precomputed":
                p = _float_field(row[col["positivity"]], "positivity", line)
            else:
                pos = _float_field(row[col["positives_7d"]], "positives_7d", line)
                tests = _float_field(row[col["tests_7d"]], "tests_7d", line)
                if pos is None and tests is None:
                    p = None
                elif pos is None or tests is None or tests <= 0:
                    raise PositivityOutOfRange(f"{day}: cannot form positivity from "
                                               f"positives_7d={pos}, tests_7d={tests}")
                else:
                    p = pos / tests
            if p is not None and not 0.0 <= p <= 1.0:
                raise PositivityOutOfRange(f"{day}: positivity {p} outside [0, 1]")
            record = (h, icu, p)
            if day in records:
                if records[day] != record:
                    raise MalformedRow(f"conflicting duplicate row for {day}", line)
                dropped += 1
                continue
            records[day] = record

    if not records:
        raise MalformedRow("no data rows", 2)
    days = sorted(records)
    start, stop = days[0], days[-1]
    dates = start + np.arange(int((stop - start).astype(int)) + 1)
    have = {d for d in days}
    for d in dates:
        if d not in have:
            raise IcuGap(f"no ICU count for {d}")
    h = [records[d][0] for d in dates]
    icu = [records[d][1] for d in dates]
    p = [records[d][2] for d in dates]
    for d, value in zip(dates, icu):
        if value is None:
            raise IcuGap(f"no ICU count for {d}")
    filled = 0
    for k, value in enumerate(h):
        if value is None:
            if 0 < k < len(h) - 1 and h[k - 1] is not None and h[k + 1] is not None:
                h[k] = int(round((h[k - 1] + h[k + 1]) / 2))
                filled += 1
            else:
                raise MalformedRow(f"hospital census missing for {dates[k]} and cannot be "
                                   "interpolated from neighbours")
    for k, value in enumerate(p):
        if value is None:
            if 0 < k and p[k - 1] is not None and (k == len(p) - 1 or p[k + 1] is not None):
                p[k] = p[k - 1]
                filled += 1
            else:
                raise MalformedRow(f"positivity missing for {dates[k]} and cannot be "
                                   "carried forward")
    series = ObservedSeries(dates, np.array(icu, dtype=np.int64))
    cov = CovariatePath(dates, np.array(h, dtype=np.int64), np.array(p, dtype=float))
    return series, cov, IngestReport(rows_read, dropped, filled, source)


def _umask() -> int:
    mask = os.umask(0)
    os.umask(mask)
    return mask


def atomic_write(path, text: str) -> Path:
    """Write ``text`` to a sibling temp file and rename it into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.chmod(tmp, 0o666 & ~_umask())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def emit_csv(path, series: ObservedSeries, cov: CovariatePath) -> Path:
    lines = ["date,hospital_census,icu_census,positivity"]
    for d, h, i, p in zip(series.dates, cov.hospital_census, series.icu_census, cov.positivity):
        lines.append(f"{d},{int(h)},{int(i)},{float(p)!r}")
    return atomic_write(path, "\n".join(lines) + "\n")


class Report:
    """Ordered sections of ``key = value`` pairs or comma-separated tables.

    Section names may be dotted (``estimates.phase1``) to express nesting.
    """

    def __init__(self, title: str = ""):
        self.title = title
        self.sections: dict[str, dict | tuple] = {}

    def set(self, section: str, key: str, value) -> None:
        self.sections.setdefault(section, {})[key] = value

    def update(self, section: str, values: dict) -> None:
        for k, v in values.items():
            self.set(section, k, v)

    def table(self, section: str, columns, rows) -> None:
        self.sections[section] = (tuple(columns), [tuple(r) for r in rows])

    def render(self) -> str:
        out = []
        if self.title:
            out.append(f"# {self.title}")
        for name, body in self.sections.items():
            out.append(f"[{name}]")
            if isinstance(body, tuple):
                columns, rows = body
                out.append("columns = " + ",".join(columns))
                out.extend(",".join(_fmt(v) for v in row) for row in rows)
            else:
                out.extend(f"{k} = {_fmt(v)}" for k, v in body.items())
            out.append("")
        return "\n".join(out)

    def write(self, path) -> Path:
        return atomic_write(path, self.render())


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (tuple, list)):
        return ", ".join(_fmt(v) for v in value)
    return str(value)


def read_report(path) -> dict[str, dict | list[dict]]:
    """Parse a report back into ``{section: {key: str}}`` or ``{section: [row dicts]}``."""
    sections: dict = {}
    current = None
    columns = None
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            current, columns = line[1:-1], None
            sections[current] = {}
            continue
        if line.startswith("columns = ") and sections[current] == {}:
            columns = line[len("columns = "):].split(",")
            sections[current] = []
            continue
        if columns is not None:
            sections[current].append(dict(zip(columns, line.split(","))))
        else:
            key, _, value = line.partition(" = ")
            sections[current][key] = value
    return sections
