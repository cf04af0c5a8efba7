"""Year-month label arithmetic.

Months are passed around as ``YYYY-MM`` strings; internally each label maps to
a flat index (year * 12 + month - 1) so ranges and gaps reduce to integer
arithmetic.
"""

from __future__ import annotations

import re
from datetime import datetime

from .errors import DomainError

_YM_RE = re.compile(r"^(\d{4})-(\d{2})(?:-(\d{2}))?$")


def parse_month(label: str) -> int:
    """Parse ``YYYY-MM`` (an optional ``-DD`` day suffix is discarded)."""
    m = _YM_RE.match(label.strip())
    if not m:
        raise ValueError(f"not a YYYY-MM month label: {label!r}")
    year, month = int(m.group(1)), int(m.group(2))
    if not 1 <= month <= 12:
        raise ValueError(f"month out of range in {label!r}")
    return year * 12 + month - 1


def parse_month_any(label: str, alt_format: str | None = None) -> int:
    """Parse a month label, falling back to ``alt_format`` (strptime syntax)."""
    try:
        return parse_month(label)
    except ValueError:
        if alt_format is None:
            raise
        dt = datetime.strptime(label.strip(), alt_format)
        return dt.year * 12 + dt.month - 1


def format_month(index: int) -> str:
    return f"{index // 12:04d}-{index % 12 + 1:02d}"


def month_range(first: str, last: str) -> list[str]:
    """All consecutive month labels from ``first`` to ``last`` inclusive."""
    lo, hi = parse_month(first), parse_month(last)
    if hi < lo:
        raise DomainError(f"calendar range is empty: {first} .. {last}")
    return [format_month(i) for i in range(lo, hi + 1)]


def add_months(label: str, n: int) -> str:
    return format_month(parse_month(label) + n)
