"""Parsing of price-index and swap-quote files and panel assembly.

Input formats (UTF-8 CSV, ISO-8601 dates, decimal point):

* index history, header ``date,index``, one row per monthly observation;
* swap quotes, header ``date,maturity_years,rate_percent``.

The annualized log inflation rate attached to month i is
``12 * ln(I_i / I_{i-1})``, the unique choice under which compounding the
piecewise-constant monthly rate reproduces the index level exactly.  Its
dispersion ``sigma_pi`` is the sample standard deviation of the increments
of that series over a trailing window (60 months by default).
"""

from __future__ import annotations

import csv
import datetime as dt
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .calibrate import QuotePanel
from .errors import DataError

__all__ = [
    "HicpSeries",
    "QuoteFile",
    "read_hicp",
    "read_quotes",
    "derive_inflation",
    "monthly_increment_std",
    "build_panels",
]

DEFAULT_WINDOW_MONTHS = 60
MATURITY_BAND = (1.0, 30.0)


@dataclass(frozen=True)
class HicpSeries:
    """Monthly price-index observations, strictly increasing dates."""

    dates: tuple
    values: np.ndarray

    def __post_init__(self) -> None:
        if len(self.dates) != len(self.values):
            raise DataError("dates and values differ in length")
        if len(self.dates) >= 2:
            for a, b in zip(self.dates, self.dates[1:]):
                if b <= a:
                    raise DataError("index dates must be strictly increasing")
                gap = (b.year - a.year) * 12 + (b.month - a.month)
                if gap != 1:
                    warnings.warn(f"index gap between {a} and {b}", stacklevel=2)
        if np.any(np.asarray(self.values) <= 0.0):
            raise DataError("index levels must be positive")


@dataclass(frozen=True)
class QuoteFile:
    """Raw swap-quote rows (date, maturity in years, rate in percent)."""

    rows: tuple


def _parse_date(text: str) -> dt.date:
    try:
        return dt.date.fromisoformat(text.strip())
    except ValueError as exc:
        raise DataError(f"bad date {text!r}") from exc


def read_hicp(path) -> HicpSeries:
    """Load an index-history CSV; rows may arrive unsorted."""
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [c.strip() for c in header[:2]] != ["date", "index"]:
            raise DataError(f"{path}: expected header 'date,index'")
        for rec in reader:
            if not rec or not "".join(rec).strip():
                continue
            if len(rec) < 2:
                raise DataError(f"{path}: short row {rec!r}")
            value = float(rec[1])
            if not math.isfinite(value):
                raise DataError(f"{path}: non-finite index level {rec[1]!r}")
            rows.append((_parse_date(rec[0]), value))
    rows.sort(key=lambda r: r[0])
    if not rows:
        raise DataError(f"{path}: empty index file")
    return HicpSeries(
        dates=tuple(r[0] for r in rows),
        values=np.array([r[1] for r in rows]),
    )


def read_quotes(path) -> QuoteFile:
    """Load a swap-quote CSV; maturities outside [1, 30] years are kept but
    flagged."""
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        want = ["date", "maturity_years", "rate_percent"]
        if header is None or [c.strip() for c in header[:3]] != want:
            raise DataError(f"{path}: expected header {','.join(want)}")
        for rec in reader:
            if not rec or not "".join(rec).strip():
                continue
            if len(rec) < 3:
                raise DataError(f"{path}: short row {rec!r}")
            date = _parse_date(rec[0])
            mat = float(rec[1])
            rate = float(rec[2])
            if not (math.isfinite(mat) and math.isfinite(rate)):
                raise DataError(f"{path}: non-finite quote row {rec!r}")
            if not MATURITY_BAND[0] <= mat <= MATURITY_BAND[1]:
                warnings.warn(
                    f"maturity {mat}y outside the usual {MATURITY_BAND} band",
                    stacklevel=2,
                )
            rows.append((date, mat, rate))
    rows.sort(key=lambda r: (r[0], r[1]))
    return QuoteFile(rows=tuple(rows))


def derive_inflation(h: HicpSeries) -> tuple[tuple, np.ndarray]:
    """Annualized month-on-month log inflation aligned to the dates of the
    second observation onward: 12 * ln(I_i / I_{i-1})."""
    if len(h.values) < 2:
        raise DataError("need at least two index observations")
    vals = np.asarray(h.values, dtype=float)
    pi = 12.0 * np.log(vals[1:] / vals[:-1])
    return h.dates[1:], pi


def monthly_increment_std(pi_series: np.ndarray, window_months: int) -> float:
    """Sample standard deviation (n-1 denominator) of the inflation-rate
    increments over the trailing window."""
    pi_series = np.asarray(pi_series, dtype=float)
    if window_months < 2:
        raise DataError("window must span at least two increments")
    if pi_series.size < window_months + 1:
        raise DataError(
            f"window of {window_months} months needs {window_months + 1} "
            f"observations, have {pi_series.size}"
        )
    inc = np.diff(pi_series)[-window_months:]
    return float(np.std(inc, ddof=1))


def build_panels(
    quotes: QuoteFile,
    hicp: HicpSeries,
    window_months: int = DEFAULT_WINDOW_MONTHS,
    ecb_rates: dict | None = None,
) -> list[QuotePanel]:
    """Group quotes by date and attach the inflation state of that date.

    Dates whose quotes lack an index observation, or fall before the
    dispersion window has filled, are skipped with a warning.  ecb_rates
    optionally maps ISO dates to the observed policy rate.
    """
    pi_dates, pi_vals = derive_inflation(hicp)
    pi_by_date = dict(zip(pi_dates, pi_vals))
    panels = []
    by_date: dict = {}
    for date, mat, rate in quotes.rows:
        by_date.setdefault(date, []).append((mat, rate))
    for date in sorted(by_date):
        if date not in pi_by_date:
            warnings.warn(f"{date}: quotes without an index observation, skipped",
                          stacklevel=2)
            continue
        upto = sum(1 for d in pi_dates if d <= date)
        try:
            sig = monthly_increment_std(pi_vals[:upto], window_months)
        except DataError as exc:
            warnings.warn(f"{date}: {exc}; skipped", stacklevel=2)
            continue
        pairs = sorted(by_date[date])
        ecb = None
        if ecb_rates:
            ecb = ecb_rates.get(date.isoformat(), ecb_rates.get("*"))
        panels.append(
            QuotePanel(
                date=date.isoformat(),
                maturities=np.array([p[0] for p in pairs]),
                rates_percent=np.array([p[1] for p in pairs]),
                pi0=float(pi_by_date[date]),
                sigma_pi=sig,
                ecb_rate=ecb,
            )
        )
    return panels
