import datetime as dt
import http.server
import json
import math
import threading

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vollab.errors import DomainError, ParseError, StatusError, TransportError, ValidationError
from vollab.market_data import (
    DATA_DIR_ENV,
    OptionContract,
    PriceHistory,
    fetch_snapshot,
    load_history,
    load_snapshot,
    log_returns,
    parse_snapshot,
    realized_variance,
    save_history,
    save_snapshot,
    snapshot_to_dict,
    time_to_expiry,
)

D = dt.date


def _doc(**overrides):
    doc = {
        "symbol": "TEST",
        "spot": 100.0,
        "as_of": "2024-11-18",
        "risk_free_rate": 0.0427,
        "contracts": [
            {"strike": 85, "market_price": 16.0, "implied_volatility": 0.3,
             "expiration": "2024-12-20", "option_type": "call"},
            {"strike": 80, "market_price": 21.0, "implied_volatility": 0.3,
             "expiration": "2024-12-20", "option_type": "call"},
        ],
    }
    doc.update(overrides)
    return doc


class TestLoadSnapshot:
    def test_shopify_strike_80_market_price(self, data_dir):
        snap = load_snapshot(data_dir / "shop_snapshot.json")
        c = snap.contracts[0]
        assert c.strike == 80 and c.market_price == 24.65

    def test_empty_contracts_is_validation_error(self, tmp_path):
        p = tmp_path / "s.json"
        p.write_text(json.dumps(_doc(contracts=[])))
        with pytest.raises(ValidationError):
            load_snapshot(p)

    def test_contracts_sorted_by_strike(self, tmp_path):
        p = tmp_path / "s.json"
        p.write_text(json.dumps(_doc()))
        assert [c.strike for c in load_snapshot(p).contracts] == [80, 85]

    @pytest.mark.parametrize("field", ["symbol", "spot", "as_of", "contracts"])
    def test_missing_field_named(self, field):
        doc = _doc()
        del doc[field]
        with pytest.raises(ParseError) as info:
            parse_snapshot(json.dumps(doc))
        assert info.value.field == field

    def test_missing_contract_field_named(self):
        doc = _doc()
        del doc["contracts"][0]["implied_volatility"]
        with pytest.raises(ParseError) as info:
            parse_snapshot(json.dumps(doc))
        assert info.value.field == "implied_volatility"

    def test_wrong_type_is_parse_error(self):
        with pytest.raises(ParseError) as info:
            parse_snapshot(json.dumps(_doc(spot="high")))
        assert info.value.field == "spot"

    def test_negative_strike_is_validation_error(self):
        doc = _doc()
        doc["contracts"][0]["strike"] = -1
        with pytest.raises(ValidationError):
            parse_snapshot(json.dumps(doc))

    def test_expiry_before_as_of_is_validation_error(self):
        doc = _doc()
        doc["contracts"][0]["expiration"] = "2024-11-01"
        with pytest.raises(ValidationError):
            parse_snapshot(json.dumps(doc))

    def test_bad_option_type_names_field(self):
        doc = _doc()
        doc["contracts"][0]["option_type"] = "straddle"
        with pytest.raises(ParseError) as info:
            parse_snapshot(json.dumps(doc))
        assert info.value.field == "option_type"

    def test_round_trip(self, data_dir, tmp_path):
        for name in ("shop_snapshot.json", "tsla_snapshot.json", "amc_snapshot.json"):
            snap = load_snapshot(data_dir / name)
            save_snapshot(snap, tmp_path / name)
            assert load_snapshot(tmp_path / name) == snap

    def test_relative_path_uses_data_dir_env(self, data_dir, monkeypatch):
        monkeypatch.setenv(DATA_DIR_ENV, str(data_dir))
        assert load_snapshot("meta_snapshot.json").symbol == "META"

    def test_contract_invariants(self):
        with pytest.raises(ValidationError):
            OptionContract(100, -1.0, 0.2, D(2025, 1, 1))
        with pytest.raises(ValidationError):
            OptionContract(100, 1.0, 0.0, D(2025, 1, 1))


class _Handler(http.server.BaseHTTPRequestHandler):
    routes = {}

    def do_GET(self):
        path = self.path.split("?")[0]
        status, body, declared = self.routes.get(path, (404, b"not found", None))
        self.send_response(status)
        self.send_header("Content-Length", str(declared if declared is not None else len(body)))
        self.end_headers()
        self.wfile.write(body)

    def log_message(self, *args):
        pass


@pytest.fixture
def server(data_dir):
    raw = (data_dir / "shop_snapshot.json").read_bytes()
    _Handler.routes = {
        "/SHOP": (200, raw, None),
        "/cut": (200, raw[: len(raw) // 2], None),
        "/short": (200, raw[: len(raw) // 2], len(raw)),
        "/query": (200, raw, None),
    }
    httpd = http.server.HTTPServer(("127.0.0.1", 0), _Handler)
    thread = threading.Thread(target=httpd.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{httpd.server_address[1]}"
    httpd.shutdown()
    httpd.server_close()


class TestFetchSnapshot:
    def test_same_as_file(self, server, data_dir):
        assert fetch_snapshot(server + "/{symbol}", "SHOP") == load_snapshot(data_dir / "shop_snapshot.json")

    def test_symbol_as_query(self, server):
        assert fetch_snapshot(server + "/query", "SHOP").symbol == "SHOP"

    def test_404_status_error(self, server):
        with pytest.raises(StatusError) as info:
            fetch_snapshot(server + "/{symbol}", "NOPE")
        assert info.value.status == 404

    @pytest.mark.parametrize("route", ["/cut", "/short"])
    def test_truncated_body_parse_error(self, server, route):
        with pytest.raises(ParseError):
            fetch_snapshot(server + route, "SHOP")

    def test_connection_refused_transport_error(self):
        import socket

        s = socket.socket()
        s.bind(("127.0.0.1", 0))
        port = s.getsockname()[1]
        s.close()
        with pytest.raises(TransportError):
            fetch_snapshot(f"http://127.0.0.1:{port}/{{symbol}}", "SHOP", timeout=2)


class TestTimeToExpiry:
    def test_one_year(self):
        assert time_to_expiry(D(2025, 11, 18), D(2024, 11, 18)) == 1.0

    def test_same_day(self):
        assert time_to_expiry(D(2024, 11, 18), D(2024, 11, 18)) == 0.0

    def test_thirty_days(self):
        assert time_to_expiry(D(2024, 12, 18), D(2024, 11, 18)) == pytest.approx(0.08219, abs=1e-5)

    def test_expired_is_domain_error(self):
        with pytest.raises(DomainError):
            time_to_expiry(D(2024, 11, 17), D(2024, 11, 18))

    def test_unknown_convention(self):
        with pytest.raises(DomainError):
            time_to_expiry(D(2024, 12, 18), D(2024, 11, 18), "30/360")

    @given(st.dates(D(2000, 1, 1), D(2040, 1, 1)), st.integers(0, 2000), st.integers(0, 2000))
    def test_additive(self, a, x, y):
        b = a + dt.timedelta(days=x)
        c = b + dt.timedelta(days=y)
        assert time_to_expiry(c, a) == pytest.approx(time_to_expiry(b, a) + time_to_expiry(c, b), abs=1e-12)


def _history(closes):
    dates = tuple(D(2024, 1, 1) + dt.timedelta(days=i) for i in range(len(closes)))
    return PriceHistory("X", dates, np.array(closes, dtype=float))


class TestReturnsAndVariance:
    def test_log_return(self):
        assert log_returns(_history([100, 105])).values[0] == pytest.approx(0.048790, abs=1e-6)

    def test_constant(self):
        np.testing.assert_array_equal(log_returns(_history([50, 50, 50])).values, [0.0, 0.0])

    def test_halving(self):
        assert log_returns(_history([100, 50])).values[0] == pytest.approx(-0.693147, abs=1e-6)

    def test_length_and_dates(self):
        h = _history([1, 2, 3, 4])
        r = log_returns(h)
        assert len(r) == 3 and r.source_dates == h.dates[1:]

    def test_too_short(self):
        with pytest.raises((DomainError, ValidationError)):
            log_returns(_history([100]))

    def test_history_invariants(self):
        with pytest.raises(ValidationError):
            _history([100, -1])
        with pytest.raises(ValidationError):
            PriceHistory("X", (D(2024, 1, 2), D(2024, 1, 1)), np.array([1.0, 2.0]))

    def test_geometric_series_constant_return(self):
        g = 1.0123
        r = log_returns(_history([3.0 * g**i for i in range(50)])).values
        np.testing.assert_allclose(r, math.log(g), atol=1e-12)

    def test_constant_returns_zero_variance(self):
        np.testing.assert_array_equal(realized_variance(np.full(10, 0.01), 5), 0.0)

    def test_two_point_variance(self):
        np.testing.assert_allclose(realized_variance([0.1, -0.1], 2), [0.02])

    def test_full_window(self):
        x = np.random.default_rng(1).normal(size=30)
        v = realized_variance(x, 30)
        assert v.shape == (1,) and v[0] == pytest.approx(np.var(x, ddof=1))

    def test_window_too_large(self):
        with pytest.raises(DomainError):
            realized_variance([0.1, 0.2], 3)

    def test_window_below_two(self):
        with pytest.raises(DomainError):
            realized_variance([0.1, 0.2], 1)

    @settings(max_examples=50)
    @given(st.lists(st.floats(-0.5, 0.5), min_size=5, max_size=40), st.integers(2, 5))
    def test_sign_symmetry_and_non_negative(self, xs, w):
        x = np.array(xs)
        v = realized_variance(x, w)
        assert np.all(v >= 0)
        np.testing.assert_allclose(v, realized_variance(-x, w), atol=1e-15)


def test_history_round_trip(tmp_path, data_dir):
    h = load_history(data_dir / "amc_history.csv")
    save_history(h, tmp_path / "h.csv")
    h2 = load_history(tmp_path / "h.csv", symbol=h.symbol)
    assert h2.dates == h.dates
    np.testing.assert_array_equal(h2.closes, h.closes)


def test_history_bad_header(tmp_path):
    p = tmp_path / "h.csv"
    p.write_text("day,price\n2024-01-01,1\n")
    with pytest.raises(ParseError):
        load_history(p)


def test_snapshot_to_dict_is_json(data_dir):
    json.dumps(snapshot_to_dict(load_snapshot(data_dir / "tsla_snapshot.json")))
