"""Transaction ingestion: parse, clean, and aggregate to a monthly price grid.

The pipeline is parse -> aggregate -> fill_gaps. Parsing never drops a data
row silently: every row either becomes a :class:`TransactionRecord` or a
:class:`RejectedRow` with a reason code. Aggregation produces a months x
districts matrix of average prices; cells without transactions stay missing
(NaN, coverage 0) until a gap policy fills them.
"""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, TextIO

import numpy as np

from .errors import DomainError, FormatError
from .months import format_month, month_range, parse_month, parse_month_any

REQUIRED_COLUMNS = ("date", "district", "price")

# RejectedRow reason codes
BAD_DATE = "bad_date"
DATE_OUT_OF_RANGE = "date_out_of_range"
MISSING_PRICE = "missing_price"
BAD_PRICE = "bad_price"
NONPOSITIVE_PRICE = "nonpositive_price"
MISSING_DISTRICT = "missing_district"


@dataclass(frozen=True)
class TransactionRecord:
    """One cleaned sale observation.

    ``month`` is a ``YYYY-MM`` label, ``district`` a trimmed lower-cased key
    and ``price`` a finite positive unit price.
    """

    month: str
    district: str
    price: float


@dataclass(frozen=True)
class RejectedRow:
    line: int
    reason: str


@dataclass
class PriceMatrix:
    """Monthly average prices on a consecutive-month x sorted-district grid.

    ``values[m, d]`` is the mean price for month ``m`` in district ``d``
    (NaN while the cell is missing); ``coverage[m, d]`` counts the
    transactions behind the cell and is 0 exactly where a gap policy supplied
    the value.
    """

    months: list[str]
    districts: list[str]
    values: np.ndarray
    coverage: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        self.coverage = np.asarray(self.coverage, dtype=np.int64)
        m, d = len(self.months), len(self.districts)
        if self.values.shape != (m, d) or self.coverage.shape != (m, d):
            raise DomainError(
                f"matrix shapes {self.values.shape}/{self.coverage.shape} do not "
                f"match {m} months x {d} districts"
            )
        indices = [parse_month(label) for label in self.months]
        for prev, cur in zip(indices, indices[1:]):
            if cur != prev + 1:
                raise DomainError("month axis is not consecutive")
        if len(set(self.districts)) != d:
            raise DomainError("district axis contains duplicates")

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def district_column(self, district: str) -> np.ndarray:
        try:
            j = self.districts.index(district)
        except ValueError:
            raise DomainError(f"unknown district {district!r}") from None
        return self.values[:, j]


class GapPolicy(enum.Enum):
    """How to handle cells with no transactions."""

    INTERPOLATE = "interpolate"
    DROP_DISTRICT = "drop_district"


def _open_source(source) -> tuple[TextIO, bool]:
    if isinstance(source, (str, Path)):
        return open(source, "r", encoding="utf-8", newline=""), True
    return source, False


def parse_transactions(
    source: str | Path | TextIO | Iterable[str],
    calendar: tuple[str, str] | None = None,
    alt_date_format: str | None = None,
) -> tuple[list[TransactionRecord], list[RejectedRow]]:
    """Parse a ``date,district,price`` CSV into records plus rejects.

    Every data row lands in exactly one of the two result lists, so
    ``len(records) + len(rejected)`` equals the number of data rows.

    Parameters
    ----------
    source:
        Path or open text stream with a header row.
    calendar:
        Optional ``(first, last)`` month labels; rows outside the range are
        rejected with ``date_out_of_range``.
    alt_date_format:
        Optional strptime pattern tried when the primary ``YYYY-MM`` form
        does not match (e.g. ``"%m/%Y"``).
    """
    stream, owns = _open_source(source)
    try:
        reader = csv.DictReader(stream)
        if reader.fieldnames is None:
            raise FormatError("input has no header row")
        header = [h.strip().lower() for h in reader.fieldnames]
        for column in REQUIRED_COLUMNS:
            if column not in header:
                raise FormatError(f"missing required column {column!r}")
        reader.fieldnames = header

        bounds = None
        if calendar is not None:
            bounds = (parse_month(calendar[0]), parse_month(calendar[1]))

        records: list[TransactionRecord] = []
        rejected: list[RejectedRow] = []
        for line, row in enumerate(reader, start=2):
            reason = None
            month = None
            price = math.nan

            raw_date = (row.get("date") or "").strip()
            try:
                idx = parse_month_any(raw_date, alt_date_format)
            except ValueError:
                reason = BAD_DATE
            else:
                month = format_month(idx)
                if bounds is not None and not bounds[0] <= idx <= bounds[1]:
                    reason = DATE_OUT_OF_RANGE

            raw_price = (row.get("price") or "").strip()
            if reason is None:
                if not raw_price:
                    reason = MISSING_PRICE
                else:
                    try:
                        price = float(raw_price)
                    except ValueError:
                        reason = BAD_PRICE
                    else:
                        if not math.isfinite(price):
                            reason = BAD_PRICE
                        elif price <= 0:
                            reason = NONPOSITIVE_PRICE

            district = (row.get("district") or "").strip().lower()
            if reason is None and not district:
                reason = MISSING_DISTRICT

            if reason is None:
                records.append(TransactionRecord(month, district, price))
            else:
                rejected.append(RejectedRow(line, reason))
        return records, rejected
    finally:
        if owns:
            stream.close()


def aggregate_monthly(
    records: Iterable[TransactionRecord],
    calendar: tuple[str, str],
) -> PriceMatrix:
    """Average record prices per (month, district) cell over ``calendar``.

    Cells with no transactions are left missing (NaN value, coverage 0);
    records dated outside the calendar are ignored.
    """
    months = month_range(*calendar)
    month_pos = {label: i for i, label in enumerate(months)}

    records = list(records)
    in_range = [r for r in records if r.month in month_pos]
    if not in_range:
        raise DomainError("no records fall inside the calendar range")

    districts = sorted({r.district for r in in_range})
    district_pos = {name: j for j, name in enumerate(districts)}

    totals = np.zeros((len(months), len(districts)))
    counts = np.zeros((len(months), len(districts)), dtype=np.int64)
    for r in in_range:
        i, j = month_pos[r.month], district_pos[r.district]
        totals[i, j] += r.price
        counts[i, j] += 1

    values = np.full_like(totals, np.nan)
    np.divide(totals, counts, out=values, where=counts > 0)
    return PriceMatrix(months, districts, values, counts)


def fill_gaps(matrix: PriceMatrix, policy: GapPolicy = GapPolicy.INTERPOLATE) -> PriceMatrix:
    """Resolve missing cells according to ``policy``.

    INTERPOLATE fills interior gaps linearly between the nearest observed
    neighbours and extends flat at the edges. DROP_DISTRICT removes any
    district column containing a gap. Filled cells keep coverage 0.
    """
    values = matrix.values.copy()
    coverage = matrix.coverage.copy()
    missing = coverage == 0

    if policy is GapPolicy.DROP_DISTRICT:
        keep = ~missing.any(axis=0)
        if not keep.any():
            raise DomainError("every district has at least one gap; nothing left to keep")
        districts = [d for d, k in zip(matrix.districts, keep) if k]
        return PriceMatrix(list(matrix.months), districts, values[:, keep], coverage[:, keep])

    rows = np.arange(values.shape[0])
    for j, district in enumerate(matrix.districts):
        observed = ~missing[:, j]
        n_obs = int(observed.sum())
        if n_obs == values.shape[0]:
            continue
        if n_obs < 2:
            raise DomainError(
                f"district {district!r} has {n_obs} observed month(s); need at least 2 to fill gaps"
            )
        # np.interp is linear between neighbours and flat beyond the endpoints.
        values[missing[:, j], j] = np.interp(
            rows[missing[:, j]], rows[observed], values[observed, j]
        )
    return PriceMatrix(list(matrix.months), list(matrix.districts), values, coverage)


def write_matrix_csv(matrix: PriceMatrix, path: str | Path, coverage_path: str | Path | None = None):
    """Write the values grid as CSV (month label column + district headers).

    If ``coverage_path`` is given the transaction counts are written in the
    same layout alongside.
    """
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["month", *matrix.districts])
        for i, label in enumerate(matrix.months):
            writer.writerow([label, *[repr(float(v)) for v in matrix.values[i]]])
    if coverage_path is not None:
        with Path(coverage_path).open("w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["month", *matrix.districts])
            for i, label in enumerate(matrix.months):
                writer.writerow([label, *[int(c) for c in matrix.coverage[i]]])


def read_matrix_csv(path: str | Path, coverage_path: str | Path | None = None) -> PriceMatrix:
    """Read a matrix written by :func:`write_matrix_csv`.

    Without a coverage sidecar every cell is assumed observed (coverage 1).
    """
    path = Path(path)
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0] != "month":
            raise FormatError(f"{path}: expected a 'month' first column")
        districts = header[1:]
        months, rows = [], []
        for row in reader:
            if len(row) != len(header):
                raise FormatError(f"{path}: row for {row[0] if row else '?'} has wrong width")
            months.append(row[0])
            try:
                rows.append([float(v) for v in row[1:]])
            except ValueError:
                raise FormatError(f"{path}: non-numeric price in row {row[0]}") from None
    values = np.asarray(rows, dtype=np.float64)
    coverage = np.ones_like(values, dtype=np.int64)
    if coverage_path is not None and Path(coverage_path).exists():
        with Path(coverage_path).open("r", encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            next(reader)
            coverage = np.asarray([[int(v) for v in row[1:]] for row in reader], dtype=np.int64)
    return PriceMatrix(months, districts, values, coverage)


def write_rejection_report(rejected: Iterable[RejectedRow], path: str | Path):
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["line", "reason"])
        for r in rejected:
            writer.writerow([r.line, r.reason])


def parse_transactions_text(text: str, **kwargs):
    """Convenience wrapper for parsing an in-memory CSV string."""
    return parse_transactions(io.StringIO(text), **kwargs)
