"""Time-series ingestion, alignment, and bivariate statistics.

Measurement channels are carried as :class:`AlignedSeries`: a uniform grid of
optional floats anchored at a UTC start time.  Missing samples stay missing
(``None``) all the way through; statistics use pairwise deletion and no value
is ever imputed.  Fahrenheit inputs are converted to Celsius on entry so every
temperature downstream is STC-comparable.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta, timezone
from enum import Enum
from itertools import combinations

import numpy as np

from .errors import (
    DuplicateTimestampError,
    EmptyOverlapError,
    ParseError,
    ResolutionError,
    UndefinedCorrelationError,
)

log = logging.getLogger(__name__)

_TIMESTAMP_FORMATS = (
    "%Y-%m-%d %H:%M:%S",
    "%Y-%m-%d %H:%M",
    "%Y-%m-%dT%H:%M:%S",
    "%m/%d/%Y %H:%M",
    "%m/%d/%Y %I:%M %p",
)

_MISSING_TOKENS = {"", "na", "n/a", "nan", "null", "none", "-"}


class Unit(Enum):
    KW = "kW"
    W_PER_M2 = "W/m2"
    DEG_C = "degC"
    DEG_F = "degF"
    VOLT = "V"
    AMP = "A"
    COUNT = "count"
    FRACTION = "fraction"
    PERCENT = "percent"
    DIMENSIONLESS = "dimensionless"


@dataclass(frozen=True)
class SourceIssue:
    """A raw input row that could not contribute a value (kept, not dropped)."""

    row: int
    column: str
    raw: str
    reason: str


@dataclass(frozen=True)
class AlignedSeries:
    """One measurement channel on a uniform time grid.

    ``values[i]`` is the sample at ``start + i * resolution_s`` seconds;
    ``None`` marks a missing sample.  Instances are immutable and safe to
    share across threads.
    """

    name: str
    unit: Unit
    start: datetime
    resolution_s: int
    values: tuple
    issues: tuple = field(default=(), compare=False)  # parse metadata

    def __post_init__(self):
        if self.resolution_s <= 0:
            raise ValueError(f"resolution_s must be positive, got {self.resolution_s}")
        if self.start.tzinfo is None:
            raise ValueError("start must be timezone-aware (UTC)")
        for i, v in enumerate(self.values):
            if v is not None and not math.isfinite(v):
                raise ValueError(f"non-finite value at index {i}: {v}")

    def __len__(self) -> int:
        return len(self.values)

    @property
    def end(self) -> datetime:
        """Exclusive end of the covered span."""
        return self.start + timedelta(seconds=self.resolution_s * len(self.values))

    def time_at(self, index: int) -> datetime:
        return self.start + timedelta(seconds=self.resolution_s * index)

    def timestamps(self) -> list[datetime]:
        return [self.time_at(i) for i in range(len(self.values))]

    def index_of(self, t: datetime) -> int:
        """Grid slot containing ``t``.  May fall outside [0, len)."""
        return int((t - self.start).total_seconds() // self.resolution_s)

    def present(self) -> np.ndarray:
        """All present samples as a float array (order preserved)."""
        return np.array([v for v in self.values if v is not None], dtype=float)

    def coverage(self) -> float:
        if not self.values:
            return 0.0
        return sum(v is not None for v in self.values) / len(self.values)

    def same_grid(self, other: "AlignedSeries") -> bool:
        return (
            self.start == other.start
            and self.resolution_s == other.resolution_s
            and len(self.values) == len(other.values)
        )

    def window(self, t0: datetime, t1: datetime) -> "AlignedSeries":
        """Sub-series covering grid slots with t0 <= t < t1."""
        if t1 <= t0:
            raise ValueError("window end must be after window start")
        i0 = max(0, math.ceil((t0 - self.start).total_seconds() / self.resolution_s))
        i1 = min(
            len(self.values),
            math.ceil((t1 - self.start).total_seconds() / self.resolution_s),
        )
        if i1 <= i0:
            raise ValueError("window does not intersect the series span")
        return AlignedSeries(
            name=self.name,
            unit=self.unit,
            start=self.time_at(i0),
            resolution_s=self.resolution_s,
            values=self.values[i0:i1],
        )


@dataclass(frozen=True)
class SeriesSchema:
    """Column mapping for :func:`parse_series`.

    Input timestamps are local clock times offset from UTC by
    ``utc_offset_hours`` (e.g. -4.0 for US Eastern daylight time); the parsed
    series is stored in UTC.
    """

    timestamp_column: str
    value_column: str
    unit: Unit
    resolution_s: int
    name: str = ""
    utc_offset_hours: float = 0.0
    timestamp_format: str | None = None


def _parse_timestamp(raw: str, fmt: str | None, row: int) -> datetime:
    raw = raw.strip()
    if fmt is not None:
        try:
            return datetime.strptime(raw, fmt)
        except ValueError:
            raise ParseError(f"row {row}: malformed timestamp {raw!r}", row=row)
    try:
        return datetime.fromisoformat(raw)
    except ValueError:
        pass
    for candidate in _TIMESTAMP_FORMATS:
        try:
            return datetime.strptime(raw, candidate)
        except ValueError:
            continue
    raise ParseError(f"row {row}: malformed timestamp {raw!r}", row=row)


def _to_utc(local: datetime, utc_offset_hours: float) -> datetime:
    if local.tzinfo is not None:
        return local.astimezone(timezone.utc)
    return local.replace(tzinfo=timezone.utc) - timedelta(hours=utc_offset_hours)


def _grid_from_rows(rows, resolution_s, convert, column):
    """Place (timestamp, value, row, raw) tuples onto a uniform grid."""
    rows.sort(key=lambda r: r[0])
    start = rows[0][0]
    slots: dict[int, tuple] = {}
    for ts, value, rownum, raw in rows:
        index = round((ts - start).total_seconds() / resolution_s)
        if index in slots:
            raise DuplicateTimestampError(
                f"row {rownum}: duplicate timestamp {ts.isoformat()}", row=rownum
            )
        slots[index] = (value, rownum, raw)
    length = max(slots) + 1
    values: list = [None] * length
    issues: list[SourceIssue] = []
    for index, (value, rownum, raw) in slots.items():
        if value is None:
            issues.append(SourceIssue(rownum, column, raw, "unparseable value"))
        else:
            values[index] = convert(value)
    return start, tuple(values), tuple(issues)


def _parse_value(raw: str) -> float | None:
    token = raw.strip().lower()
    if token in _MISSING_TOKENS:
        return None
    try:
        v = float(token)
    except ValueError:
        return None
    if not math.isfinite(v):
        return None
    return v


def _unit_conversion(unit: Unit):
    """Storage unit and converter; Fahrenheit is normalised to Celsius."""
    if unit is Unit.DEG_F:
        return Unit.DEG_C, lambda v: (v - 32.0) * 5.0 / 9.0
    return unit, lambda v: v


def parse_series(path, schema: SeriesSchema) -> AlignedSeries:
    """Parse one channel of a headered CSV file onto a uniform grid.

    Rows sort by time; gaps become missing samples.  Rows whose value cannot
    be parsed are recorded in ``series.issues`` as missing samples.  Malformed
    timestamps raise :class:`ParseError` with the row number; two rows on the
    same grid slot raise :class:`DuplicateTimestampError`.
    """
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ParseError(f"{path}: empty file")
        for col in (schema.timestamp_column, schema.value_column):
            if col not in reader.fieldnames:
                raise ParseError(f"{path}: missing column {col!r}")
        for rownum, record in enumerate(reader, start=2):
            ts_local = _parse_timestamp(
                record[schema.timestamp_column], schema.timestamp_format, rownum
            )
            ts = _to_utc(ts_local, schema.utc_offset_hours)
            raw = record[schema.value_column]
            rows.append((ts, _parse_value(raw), rownum, raw))
    if not rows:
        raise ParseError(f"{path}: no data rows")
    store_unit, convert = _unit_conversion(schema.unit)
    start, values, issues = _grid_from_rows(
        rows, schema.resolution_s, convert, schema.value_column
    )
    return AlignedSeries(
        name=schema.name or schema.value_column,
        unit=store_unit,
        start=start,
        resolution_s=schema.resolution_s,
        values=values,
        issues=issues,
    )


def parse_table(
    path,
    timestamp_column: str,
    resolution_s: int,
    units: dict[str, Unit],
    utc_offset_hours: float = 0.0,
    timestamp_format: str | None = None,
) -> dict[str, AlignedSeries]:
    """Parse several channels sharing one timestamp column in a single pass.

    ``units`` maps value-column name to its unit; only listed columns are
    parsed.  Equivalent to one :func:`parse_series` call per column.
    """
    out = {}
    for column, unit in units.items():
        out[column] = parse_series(
            path,
            SeriesSchema(
                timestamp_column=timestamp_column,
                value_column=column,
                unit=unit,
                resolution_s=resolution_s,
                name=column,
                utc_offset_hours=utc_offset_hours,
                timestamp_format=timestamp_format,
            ),
        )
    return out


# ---------------------------------------------------------------------------
# Alignment
# ---------------------------------------------------------------------------


def align(a: AlignedSeries, b: AlignedSeries) -> tuple[AlignedSeries, AlignedSeries]:
    """Bring two series onto a common grid at the coarser resolution.

    The finer series is aggregated by the arithmetic mean of present samples
    within each coarse slot; slots with no present fine samples stay missing.
    The coarser resolution must be an integer multiple of the finer one.
    Raises :class:`EmptyOverlapError` when no full coarse slot is covered by
    both series.
    """
    coarse, fine = (a, b) if a.resolution_s >= b.resolution_s else (b, a)
    res = coarse.resolution_s
    if res % fine.resolution_s != 0:
        raise ResolutionError(
            f"resolutions {a.resolution_s}s and {b.resolution_s}s are not "
            "integer multiples"
        )

    lo = max(a.start, b.start)
    hi = min(a.end, b.end)
    # First coarse slot fully inside the overlap, on the coarse series' grid.
    first = math.ceil((lo - coarse.start).total_seconds() / res)
    last = math.floor((hi - coarse.start).total_seconds() / res)  # exclusive
    first = max(first, 0)
    last = min(last, len(coarse.values))
    if last <= first:
        raise EmptyOverlapError(
            f"series {a.name!r} and {b.name!r} share no full "
            f"{res}s slot"
        )

    grid_start = coarse.time_at(first)
    coarse_out = AlignedSeries(
        name=coarse.name,
        unit=coarse.unit,
        start=grid_start,
        resolution_s=res,
        values=coarse.values[first:last],
    )

    fine_vals = []
    for k in range(first, last):
        slot_start = coarse.time_at(k)
        slot_end = coarse.time_at(k + 1)
        i0 = math.ceil((slot_start - fine.start).total_seconds() / fine.resolution_s)
        i1 = math.ceil((slot_end - fine.start).total_seconds() / fine.resolution_s)
        i0 = max(i0, 0)
        i1 = min(i1, len(fine.values))
        present = [v for v in fine.values[i0:i1] if v is not None]
        fine_vals.append(sum(present) / len(present) if present else None)
    fine_out = AlignedSeries(
        name=fine.name,
        unit=fine.unit,
        start=grid_start,
        resolution_s=res,
        values=tuple(fine_vals),
    )

    if a.resolution_s >= b.resolution_s:
        return coarse_out, fine_out
    return fine_out, coarse_out


# ---------------------------------------------------------------------------
# Statistics
# ---------------------------------------------------------------------------


def _paired(a: AlignedSeries, b: AlignedSeries) -> tuple[np.ndarray, np.ndarray]:
    if not a.same_grid(b):
        raise ValueError(
            f"series {a.name!r} and {b.name!r} are not on the same grid; "
            "align() them first"
        )
    xs, ys = [], []
    for va, vb in zip(a.values, b.values):
        if va is not None and vb is not None:
            xs.append(va)
            ys.append(vb)
    return np.array(xs), np.array(ys)


def pearson(a: AlignedSeries, b: AlignedSeries) -> float:
    """Sample Pearson correlation over pairwise-present samples.

    Raises :class:`UndefinedCorrelationError` with fewer than two pairs or
    when either side has zero variance.
    """
    x, y = _paired(a, b)
    if len(x) < 2:
        raise UndefinedCorrelationError(
            f"{a.name!r} vs {b.name!r}: fewer than 2 paired samples"
        )
    xd = x - x.mean()
    yd = y - y.mean()
    sx = float(np.sqrt(np.dot(xd, xd)))
    sy = float(np.sqrt(np.dot(yd, yd)))
    if sx == 0.0 or sy == 0.0:
        raise UndefinedCorrelationError(
            f"{a.name!r} vs {b.name!r}: zero variance"
        )
    r = float(np.dot(xd, yd)) / (sx * sy)
    return max(-1.0, min(1.0, r))


@dataclass(frozen=True)
class PairFit:
    """Least-squares line y = slope*x + intercept for one channel pair."""

    y_label: str
    x_label: str
    slope: float
    intercept: float
    r2: float


@dataclass(frozen=True)
class Density:
    """Histogram density estimate of one channel."""

    label: str
    bin_edges: tuple
    density: tuple


@dataclass(frozen=True)
class CorrelationReport:
    """Pairwise relationship summary laid out like a scatter-plot matrix.

    ``pearson[i][j]`` mirrors the upper triangle, ``fits`` the lower triangle
    (one entry per unordered pair, y = row channel, x = column channel), and
    ``densities`` the diagonal.  Data only; no rendering.
    """

    labels: tuple
    pearson: tuple
    fits: tuple
    densities: tuple

    def fit_for(self, y_label: str, x_label: str) -> PairFit:
        for f in self.fits:
            if f.y_label == y_label and f.x_label == x_label:
                return f
        raise KeyError(f"no fit for ({y_label!r}, {x_label!r})")

    def to_json(self) -> dict:
        return {
            "labels": list(self.labels),
            "pearson": [list(row) for row in self.pearson],
            "fits": [
                {
                    "y": f.y_label,
                    "x": f.x_label,
                    "slope": f.slope,
                    "intercept": f.intercept,
                    "r2": f.r2,
                }
                for f in self.fits
            ],
            "densities": [
                {
                    "label": d.label,
                    "bin_edges": list(d.bin_edges),
                    "density": list(d.density),
                }
                for d in self.densities
            ],
        }


def _linear_fit(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float]:
    design = np.column_stack([x, np.ones_like(x)])
    coeff, _, _, _ = np.linalg.lstsq(design, y, rcond=None)
    slope, intercept = float(coeff[0]), float(coeff[1])
    resid = y - (slope * x + intercept)
    sse = float(np.dot(resid, resid))
    sst = float(np.dot(y - y.mean(), y - y.mean()))
    r2 = 1.0 if sst == 0.0 else 1.0 - sse / sst
    return slope, intercept, r2


def _density(label: str, values: np.ndarray) -> Density:
    n = len(values)
    bins = max(8, min(64, int(math.ceil(math.sqrt(n))))) if n else 8
    hist, edges = np.histogram(values, bins=bins, density=True)
    return Density(label=label, bin_edges=tuple(edges.tolist()), density=tuple(hist.tolist()))


def bivariate_report(channels: list[AlignedSeries]) -> CorrelationReport:
    """Pairwise Pearson matrix, per-pair linear fits, per-channel densities.

    All channels must share one grid.  Correlation errors propagate from
    :func:`pearson`.
    """
    if len(channels) < 2:
        raise ValueError("bivariate_report needs at least 2 channels")
    n = len(channels)
    matrix = [[1.0] * n for _ in range(n)]
    fits = []
    for i, j in combinations(range(n), 2):
        r = pearson(channels[i], channels[j])
        matrix[i][j] = r
        matrix[j][i] = r
        # Lower-triangle cell (row j, column i): y = later channel, x = earlier.
        x, y = _paired(channels[i], channels[j])
        slope, intercept, r2 = _linear_fit(x, y)
        fits.append(
            PairFit(
                y_label=channels[j].name,
                x_label=channels[i].name,
                slope=slope,
                intercept=intercept,
                r2=r2,
            )
        )
    densities = tuple(_density(c.name, c.present()) for c in channels)
    return CorrelationReport(
        labels=tuple(c.name for c in channels),
        pearson=tuple(tuple(row) for row in matrix),
        fits=tuple(fits),
        densities=densities,
    )


# ---------------------------------------------------------------------------
# Reliability records
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ReliabilityRecord:
    """One day of interruption counts and the weather that day."""

    day: date
    n_sustained: int
    n_momentary: int
    temperature_c: float
    wind_ms: float
    precipitation_mm: float
    pressure_hpa: float
    lightning: int

    def __post_init__(self):
        if self.n_sustained < 0 or self.n_momentary < 0 or self.lightning < 0:
            raise ValueError("interruption and lightning counts must be >= 0")
        for name in ("temperature_c", "wind_ms", "precipitation_mm", "pressure_hpa"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")


_RELIABILITY_COLUMNS = {
    "date": "date",
    "n_sustained": "n_sustained",
    "n_momentary": "n_momentary",
    "temperature_c": "t_avg_c",
    "wind_ms": "wind_ms",
    "precipitation_mm": "precip_mm",
    "pressure_hpa": "pressure_hpa",
    "lightning": "lightning",
}


def read_reliability_csv(path, columns: dict[str, str] | None = None) -> list[ReliabilityRecord]:
    """Read daily reliability records; rows with bad weather fields are
    skipped with a log entry, malformed dates raise :class:`ParseError`."""
    colmap = dict(_RELIABILITY_COLUMNS)
    if columns:
        colmap.update(columns)
    records = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for rownum, row in enumerate(reader, start=2):
            try:
                day = date.fromisoformat(row[colmap["date"]].strip())
            except (ValueError, KeyError):
                raise ParseError(f"row {rownum}: malformed date", row=rownum)
            try:
                rec = ReliabilityRecord(
                    day=day,
                    n_sustained=int(row[colmap["n_sustained"]]),
                    n_momentary=int(row[colmap["n_momentary"]]),
                    temperature_c=float(row[colmap["temperature_c"]]),
                    wind_ms=float(row[colmap["wind_ms"]]),
                    precipitation_mm=float(row[colmap["precipitation_mm"]]),
                    pressure_hpa=float(row[colmap["pressure_hpa"]]),
                    lightning=int(row[colmap["lightning"]]),
                )
            except (ValueError, KeyError) as exc:
                log.warning("skipping reliability row %d: %s", rownum, exc)
                continue
            records.append(rec)
    records.sort(key=lambda r: r.day)
    return records


# ---------------------------------------------------------------------------
# JSON round-trip
# ---------------------------------------------------------------------------


def series_to_json(series: AlignedSeries) -> dict:
    return {
        "name": series.name,
        "unit": series.unit.value,
        "start": series.start.isoformat(),
        "resolution_s": series.resolution_s,
        "values": list(series.values),
    }


def series_from_json(payload: dict) -> AlignedSeries:
    return AlignedSeries(
        name=payload["name"],
        unit=Unit(payload["unit"]),
        start=datetime.fromisoformat(payload["start"]),
        resolution_s=int(payload["resolution_s"]),
        values=tuple(payload["values"]),
    )


def dump_series(series: AlignedSeries, path) -> None:
    with open(path, "w") as fh:
        json.dump(series_to_json(series), fh)


def load_series(path) -> AlignedSeries:
    with open(path) as fh:
        return series_from_json(json.load(fh))
