"""Model-versus-market comparison tables.

A report has one estimate column per model plus the market column.  The
rendered table shows currency to two decimals (round half to even); the CSV
form keeps full precision and reads back into an identical report.
"""

import csv
import io
import math
from dataclasses import dataclass
from decimal import ROUND_HALF_EVEN, Decimal

import numpy as np

from .errors import ParseError, ValidationError


@dataclass(frozen=True)
class ErrorSummary:
    mae: float
    rmse: float
    max_error: float


@dataclass(frozen=True)
class ComparisonReport:
    strikes: tuple
    estimates: dict
    market: tuple
    title: str = ""

    def __post_init__(self):
        n = len(self.strikes)
        if len(self.market) != n:
            raise ValidationError("market column length differs from strike count")
        if not self.estimates:
            raise ValidationError("report needs at least one model column")
        for name, column in self.estimates.items():
            if len(column) != n:
                raise ValidationError(f"column {name!r} length differs from strike count")
        object.__setattr__(self, "strikes", tuple(float(k) for k in self.strikes))
        object.__setattr__(self, "market", tuple(float(m) for m in self.market))
        object.__setattr__(
            self, "estimates", {k: tuple(float(v) for v in col) for k, col in self.estimates.items()}
        )

    @property
    def models(self):
        return list(self.estimates)

    def abs_errors(self, model):
        return np.abs(np.array(self.estimates[model]) - np.array(self.market))

    def summary(self, model):
        err = self.abs_errors(model)
        return ErrorSummary(
            mae=float(np.mean(err)),
            rmse=float(math.sqrt(np.mean(err**2))),
            max_error=float(np.max(err)),
        )

    def summaries(self):
        return {m: self.summary(m) for m in self.models}


def money(value, places=2):
    """Fixed-point text of ``value`` rounded half to even."""
    quantum = Decimal(1).scaleb(-places)
    return str(Decimal(repr(float(value))).quantize(quantum, rounding=ROUND_HALF_EVEN))


def _strike_text(k):
    return f"{k:g}"


def render_table(report):
    headers = ["Strike"] + [m for m in report.models] + ["Market"]
    rows = []
    for i, k in enumerate(report.strikes):
        rows.append(
            [_strike_text(k)]
            + [money(report.estimates[m][i]) for m in report.models]
            + [money(report.market[i])]
        )
    widths = [max(len(h), *(len(r[j]) for r in rows)) for j, h in enumerate(headers)]
    lines = []
    if report.title:
        lines.append(report.title)
    lines.append("  ".join(h.rjust(w) for h, w in zip(headers, widths)))
    lines.append("  ".join("-" * w for w in widths))
    for r in rows:
        lines.append("  ".join(c.rjust(w) for c, w in zip(r, widths)))
    lines.append("")
    lines.append(f"{'model':<10}{'MAE':>10}{'RMSE':>10}{'max_err':>10}")
    for m, s in report.summaries().items():
        lines.append(f"{m:<10}{s.mae:>10.3f}{s.rmse:>10.3f}{s.max_error:>10.3f}")
    return "\n".join(lines) + "\n"


def write_report_csv(report, path_or_buffer):
    """Header ``strike,<model...>,market,abs_err_<model...>``; values at full precision."""
    own = isinstance(path_or_buffer, (str, bytes)) or hasattr(path_or_buffer, "__fspath__")
    fh = open(path_or_buffer, "w", newline="", encoding="utf-8") if own else path_or_buffer
    try:
        writer = csv.writer(fh, lineterminator="\n")
        models = report.models
        writer.writerow(["strike", *models, "market", *(f"abs_err_{m}" for m in models)])
        errors = {m: report.abs_errors(m) for m in models}
        for i, k in enumerate(report.strikes):
            writer.writerow(
                [repr(k)]
                + [repr(report.estimates[m][i]) for m in models]
                + [repr(report.market[i])]
                + [repr(float(errors[m][i])) for m in models]
            )
    finally:
        if own:
            fh.close()


def report_to_csv_text(report):
    buf = io.StringIO()
    write_report_csv(report, buf)
    return buf.getvalue()


def read_report_csv(path_or_buffer, title=""):
    """Parse a report CSV; ``abs_err_*`` columns are recomputed, not trusted."""
    own = isinstance(path_or_buffer, (str, bytes)) or hasattr(path_or_buffer, "__fspath__")
    fh = open(path_or_buffer, newline="", encoding="utf-8") if own else path_or_buffer
    try:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("report CSV is empty", field="header") from None
        if not header or header[0] != "strike" or "market" not in header:
            raise ParseError("report CSV header must start with 'strike' and contain 'market'", field="header")
        market_at = header.index("market")
        models = header[1:market_at]
        if not models:
            raise ParseError("report CSV has no model columns", field="header")
        strikes, market, cols = [], [], {m: [] for m in models}
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                strikes.append(float(row[0]))
                for j, m in enumerate(models, start=1):
                    cols[m].append(float(row[j]))
                market.append(float(row[market_at]))
            except (ValueError, IndexError):
                raise ParseError(f"report CSV line {lineno} is malformed", field="row") from None
    finally:
        if own:
            fh.close()
    return ComparisonReport(tuple(strikes), cols, tuple(market), title)


def write_plot_data(report, path):
    """Plot-ready CSV: ``strike,<model...>,market`` at full precision."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["strike", *report.models, "market"])
        for i, k in enumerate(report.strikes):
            writer.writerow([repr(k)] + [repr(report.estimates[m][i]) for m in report.models] + [repr(report.market[i])])


def render_forecast_table(strikes, dates, prices, title=""):
    """Strike by future-date table of estimated option prices."""
    headers = ["Strike"] + [d.isoformat() for d in dates]
    rows = [[_strike_text(k)] + [money(p) for p in prices[i]] for i, k in enumerate(strikes)]
    widths = [max(len(h), *(len(r[j]) for r in rows)) for j, h in enumerate(headers)]
    lines = [title] if title else []
    lines.append("  ".join(h.rjust(w) for h, w in zip(headers, widths)))
    lines.append("  ".join("-" * w for w in widths))
    lines.extend("  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in rows)
    return "\n".join(lines) + "\n"
