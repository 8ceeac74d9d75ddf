"""Option-chain snapshots, price histories, and the series derived from them.

Snapshots are JSON documents; histories are ``date,close`` CSV files.  Both
loaders resolve relative paths against ``$VOLLAB_DATA_DIR`` when it is set.
"""

import csv
import datetime as dt
import http.client
import json
import math
import os
import urllib.error
import urllib.parse
import urllib.request
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DomainError, ParseError, StatusError, TransportError, ValidationError
from .validation import OPTION_TYPES, check_count

DATA_DIR_ENV = "VOLLAB_DATA_DIR"
DEFAULT_RISK_FREE_RATE = 0.0427
DEFAULT_VARIANCE_WINDOW = 252
DAY_COUNTS = {"ACT/365": 365.0}


@dataclass(frozen=True)
class OptionContract:
    strike: float
    market_price: float
    implied_volatility: float
    expiration: dt.date
    option_type: str = "call"

    def __post_init__(self):
        if not (math.isfinite(self.strike) and self.strike > 0):
            raise ValidationError(f"strike must be > 0, got {self.strike}")
        if not (math.isfinite(self.market_price) and self.market_price >= 0):
            raise ValidationError(f"market_price must be >= 0, got {self.market_price}")
        if not (math.isfinite(self.implied_volatility) and self.implied_volatility > 0):
            raise ValidationError(
                f"implied_volatility must be > 0, got {self.implied_volatility}"
            )
        if self.option_type not in OPTION_TYPES:
            raise ValidationError(f"option_type must be 'call' or 'put', got {self.option_type!r}")


@dataclass(frozen=True)
class OptionChainSnapshot:
    """Quoted contracts for one underlying on one date.

    Contracts are re-sorted by strike on construction, so callers may pass them
    in any order.
    """

    symbol: str
    spot: float
    as_of: dt.date
    contracts: tuple
    risk_free_rate: float = DEFAULT_RISK_FREE_RATE

    def __post_init__(self):
        if not (math.isfinite(self.spot) and self.spot > 0):
            raise ValidationError(f"spot must be > 0, got {self.spot}")
        if not math.isfinite(self.risk_free_rate):
            raise ValidationError("risk_free_rate must be finite")
        if len(self.contracts) == 0:
            raise ValidationError("snapshot must contain at least one contract")
        for c in self.contracts:
            if c.expiration < self.as_of:
                raise ValidationError(
                    f"contract K={c.strike} expires {c.expiration} before as_of {self.as_of}"
                )
        ordered = tuple(sorted(self.contracts, key=lambda c: c.strike))
        object.__setattr__(self, "contracts", ordered)

    @property
    def strikes(self):
        return np.array([c.strike for c in self.contracts])

    @property
    def market_prices(self):
        return np.array([c.market_price for c in self.contracts])

    def with_rate(self, risk_free_rate):
        return OptionChainSnapshot(
            self.symbol, self.spot, self.as_of, self.contracts, float(risk_free_rate)
        )


@dataclass(frozen=True)
class PriceHistory:
    symbol: str
    dates: tuple
    closes: np.ndarray = field(repr=False)

    def __post_init__(self):
        closes = np.asarray(self.closes, dtype=float)
        if closes.ndim != 1 or len(closes) != len(self.dates):
            raise ValidationError("dates and closes must be aligned 1-D sequences")
        if len(closes) < 2:
            raise ValidationError("price history needs at least 2 observations")
        if not np.all(np.isfinite(closes)) or np.any(closes <= 0):
            raise ValidationError("closes must be finite and > 0")
        if any(b <= a for a, b in zip(self.dates, self.dates[1:])):
            raise ValidationError("history dates must be strictly increasing")
        closes.setflags(write=False)
        object.__setattr__(self, "closes", closes)
        object.__setattr__(self, "dates", tuple(self.dates))

    def __len__(self):
        return len(self.closes)


@dataclass(frozen=True)
class ReturnSeries:
    values: np.ndarray = field(repr=False)
    source_dates: tuple = ()

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        if self.source_dates and len(self.source_dates) != len(values):
            raise ValidationError("source_dates must align with values")

    def __len__(self):
        return len(self.values)


def resolve_path(path):
    """Resolve a relative path against ``$VOLLAB_DATA_DIR`` when that is set."""
    path = Path(path)
    base = os.environ.get(DATA_DIR_ENV)
    if base and not path.is_absolute():
        return Path(base) / path
    return path


def _require(obj, key, kinds, where):
    if not isinstance(obj, dict) or key not in obj:
        raise ParseError(f"{where}: missing field {key!r}", field=key)
    value = obj[key]
    # bool is an int subclass; reject it for numeric fields
    if isinstance(value, bool) or not isinstance(value, kinds):
        raise ParseError(
            f"{where}: field {key!r} has wrong type {type(value).__name__}", field=key
        )
    return value


def _parse_date(text, key, where):
    try:
        return dt.date.fromisoformat(text)
    except ValueError:
        raise ParseError(f"{where}: field {key!r} is not an ISO date: {text!r}", field=key) from None


def snapshot_from_dict(doc):
    """Build a validated snapshot from the decoded JSON document."""
    where = "snapshot"
    symbol = _require(doc, "symbol", str, where)
    spot = _require(doc, "spot", (int, float), where)
    as_of = _parse_date(_require(doc, "as_of", str, where), "as_of", where)
    rate = _require(doc, "risk_free_rate", (int, float), where)
    raw = _require(doc, "contracts", list, where)
    contracts = []
    for i, item in enumerate(raw):
        cw = f"contracts[{i}]"
        option_type = _require(item, "option_type", str, cw)
        if option_type not in OPTION_TYPES:
            raise ParseError(f"{cw}: option_type must be 'call' or 'put'", field="option_type")
        contracts.append(
            OptionContract(
                strike=float(_require(item, "strike", (int, float), cw)),
                market_price=float(_require(item, "market_price", (int, float), cw)),
                implied_volatility=float(_require(item, "implied_volatility", (int, float), cw)),
                expiration=_parse_date(_require(item, "expiration", str, cw), "expiration", cw),
                option_type=option_type,
            )
        )
    return OptionChainSnapshot(symbol, float(spot), as_of, tuple(contracts), float(rate))


def snapshot_to_dict(snapshot):
    return {
        "symbol": snapshot.symbol,
        "spot": snapshot.spot,
        "as_of": snapshot.as_of.isoformat(),
        "risk_free_rate": snapshot.risk_free_rate,
        "contracts": [
            {
                "strike": c.strike,
                "market_price": c.market_price,
                "implied_volatility": c.implied_volatility,
                "expiration": c.expiration.isoformat(),
                "option_type": c.option_type,
            }
            for c in snapshot.contracts
        ],
    }


def parse_snapshot(data):
    """Parse snapshot bytes or text; shared by the file and HTTP loaders."""
    if isinstance(data, bytes):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(f"snapshot is not valid UTF-8: {exc}") from None
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise ParseError(f"snapshot is not valid JSON: {exc}") from None
    return snapshot_from_dict(doc)


def load_snapshot(path):
    path = resolve_path(path)
    return parse_snapshot(path.read_bytes())


def save_snapshot(snapshot, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(snapshot_to_dict(snapshot), fh, indent=2)
        fh.write("\n")


def fetch_snapshot(endpoint, symbol, timeout=10.0):
    """GET ``endpoint`` (with ``symbol`` substituted or appended) and parse it.

    A ``{symbol}`` placeholder in the endpoint is replaced; otherwise the
    symbol is sent as a ``symbol`` query parameter.
    """
    quoted = urllib.parse.quote(symbol)
    if "{symbol}" in endpoint:
        url = endpoint.replace("{symbol}", quoted)
    else:
        sep = "&" if urllib.parse.urlparse(endpoint).query else "?"
        url = f"{endpoint}{sep}symbol={quoted}"
    try:
        with urllib.request.urlopen(url, timeout=timeout) as resp:
            status = resp.status
            try:
                body = resp.read()
            except http.client.IncompleteRead as exc:
                body = exc.partial  # short body: let the parser report it
    except urllib.error.HTTPError as exc:
        raise StatusError(exc.code, f"GET {url} returned {exc.code}") from None
    except (urllib.error.URLError, OSError) as exc:
        raise TransportError(f"GET {url} failed: {exc}") from exc
    if not 200 <= status < 300:
        raise StatusError(status, f"GET {url} returned {status}")
    return parse_snapshot(body)


def load_history(path, symbol=None):
    """Read a ``date,close`` CSV into a :class:`PriceHistory`."""
    path = resolve_path(path)
    dates, closes = [], []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"date", "close"} <= set(reader.fieldnames):
            raise ParseError(f"{path}: header must contain 'date,close'", field="header")
        for lineno, row in enumerate(reader, start=2):
            dates.append(_parse_date(row["date"], "date", f"{path}:{lineno}"))
            try:
                closes.append(float(row["close"]))
            except (TypeError, ValueError):
                raise ParseError(f"{path}:{lineno}: bad close {row['close']!r}", field="close") from None
    return PriceHistory(symbol or Path(path).stem, tuple(dates), np.array(closes))


def save_history(history, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["date", "close"])
        for d, c in zip(history.dates, history.closes):
            writer.writerow([d.isoformat(), repr(float(c))])


def time_to_expiry(expiration, as_of, convention="ACT/365"):
    """Year fraction between ``as_of`` and ``expiration``."""
    if convention not in DAY_COUNTS:
        raise DomainError(f"unsupported day-count convention {convention!r}")
    if expiration < as_of:
        raise DomainError(f"expiration {expiration} precedes as_of {as_of}")
    return (expiration - as_of).days / DAY_COUNTS[convention]


def log_returns(history):
    closes = np.asarray(history.closes, dtype=float)
    if len(closes) < 2:
        raise DomainError("log_returns needs at least 2 observations")
    return ReturnSeries(np.log(closes[1:] / closes[:-1]), tuple(history.dates[1:]))


def realized_variance(returns, window=DEFAULT_VARIANCE_WINDOW):
    """Rolling unbiased sample variance, one value per full window.

    Output element ``i`` covers ``returns[i : i + window]`` and is aligned to the
    window's last element.
    """
    values = np.asarray(getattr(returns, "values", returns), dtype=float)
    window = check_count(window, "window", minimum=2)
    if len(values) < window:
        raise DomainError(f"window {window} exceeds series length {len(values)}")
    frames = np.lib.stride_tricks.sliding_window_view(values, window)
    out = frames.var(axis=1, ddof=1)
    return np.maximum(out, 0.0)
