import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from microlab import io as mio
from microlab.book import BUY, SELL, OrderEvent
from microlab.series import LaggedCurve
from microlab.spread import PhasePoint

TAQ = """ts,type,price,volume,side,agent,venue,bid,ask
0.0,Q,,,,,,99.5,100.5
1.0,T,100.5,200,B,3,on,,
1.5,T,99.0,5000,,,off,,
2.0,Q,,,,,,100.0,99.0
3.0,Q,,,,,,99.0,100.0
4.0,T,99.0,100,,,on,,
"""


def _write(tmp_path, text, name="f.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_empty_files(tmp_path):
    assert mio.ingest_events(_write(tmp_path, "")) == []
    d = mio.ingest_taq(_write(tmp_path, "\n", "t.csv"))
    assert len(d.ts) == 0 and d.n_quarantined == 0


def test_on_off_book_split(tmp_path):
    d = mio.ingest_taq(_write(tmp_path, TAQ))
    assert len(d.on_book_trades().ts) == 2
    off = d.off_book_trades()
    assert len(off.ts) == 1 and off.volume[0] == 5000


def test_crossed_quote_quarantined(tmp_path):
    d = mio.ingest_taq(_write(tmp_path, TAQ))
    assert d.n_quarantined == 1
    assert d.quarantined[0][0] == 5  # file line
    assert len(d.quote_ts) == 2


def test_trade_series_quote_rule(tmp_path):
    ts = mio.ingest_taq(_write(tmp_path, TAQ)).to_trade_series()
    np.testing.assert_array_equal(ts.eps, [1, -1])
    np.testing.assert_allclose(ts.mid, [100.0, 99.5])
    np.testing.assert_allclose(ts.spread, [1.0, 1.0])


@pytest.mark.parametrize("bad, msg", [
    ("ts,type,price,volume\n0,T,-1,5\n", "must be positive"),
    ("ts,type,price,volume\n1,T,1,5\n0,T,1,5\n", "non-decreasing"),
    ("ts,type\n0,X\n", "unknown record type"),
    ("ts,price\n0,1\n", "missing columns"),
    ("ts,type,price,volume\n0,T,abc,5\n", "bad 'price'"),
])
def test_taq_schema_errors_have_line_numbers(tmp_path, bad, msg):
    with pytest.raises(mio.IngestError, match=msg) as ei:
        mio.ingest_taq(_write(tmp_path, bad))
    assert ei.value.line >= 1 and f":{ei.value.line}:" in str(ei.value)


def test_event_schema_errors(tmp_path):
    with pytest.raises(mio.IngestError, match="strictly increasing"):
        mio.ingest_events(_write(tmp_path, "seq,kind,side,price,volume\n1,L,B,100,1\n1,L,S,101,1\n"))
    with pytest.raises(mio.IngestError, match="event kind"):
        mio.ingest_events(_write(tmp_path, "seq,kind,side\n1,Z,B\n"))
    with pytest.raises(mio.IngestError, match=":3:"):
        mio.ingest_events(_write(tmp_path, "seq,kind,side,price,volume\n1,L,B,100,1\n2,L,Q,100,1\n"))


def test_event_round_trip(tmp_path):
    evs = [OrderEvent("L", BUY, 99, 2, 4, 0, None, 0.5), OrderEvent("L", SELL, 101, 1, None, 1, None, 0.75),
           OrderEvent("M", BUY, None, 1, None, 2, None, 1.0), OrderEvent("C", BUY, None, 0, None, 3, 0, 1.0)]
    p = mio.export_events(evs, tmp_path / "e.csv")
    back = mio.ingest_events(p)
    assert back == evs
    p2 = mio.export_events(back, tmp_path / "e2.csv")
    assert p.read_bytes() == p2.read_bytes()


def test_taq_round_trip_bytes(tmp_path):
    d = mio.ingest_taq(_write(tmp_path, TAQ))
    p1 = mio.export_taq(d, tmp_path / "a.csv")
    p2 = mio.export_taq(mio.ingest_taq(p1), tmp_path / "b.csv")
    assert p1.read_bytes() == p2.read_bytes()
    # the crossed quote is the only thing normalization drops
    assert len(p1.read_text().splitlines()) == len(TAQ.strip().splitlines()) - 1


def test_curve_header_exact(tmp_path):
    c = LaggedCurve([1, 2], [0.5, 0.25], [0.01, 0.02])
    p = mio.export_curve(c, tmp_path / "c.csv")
    assert p.read_text().splitlines()[0] == "lag,value,stderr"


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(allow_nan=False, allow_infinity=False, width=64), min_size=1, max_size=30))
def test_curve_round_trip_full_precision(tmp_path_factory, vals):
    d = tmp_path_factory.mktemp("c")
    c = LaggedCurve(np.arange(1, len(vals) + 1), vals, np.abs(vals))
    for name in ("c.csv", "c.jsonl"):
        p = mio.export_curve(c, d / name, "jsonl" if name.endswith("jsonl") else "csv")
        back = mio.read_curve(p)
        assert back.values.tobytes() == c.values.tobytes()
        assert back.stderr.tobytes() == c.stderr.tobytes()
        np.testing.assert_array_equal(back.lags, c.lags)


def test_phase_point_record(tmp_path):
    pt = PhasePoint(0.7, 2.0, 0.3, 1.4, "above-red", 1.42, {})
    p = mio.export_phase_point(pt, tmp_path / "p.jsonl")
    lines = p.read_text().splitlines()
    assert len(lines) == 1
    rec = json.loads(lines[0])
    assert set(rec) == {"x", "y", "C1", "lambda", "region", "lambda_beta"}


def test_fmt_seventeen_digits():
    assert mio.fmt(0.1) == "0.10000000000000001"
    assert float(mio.fmt(math.pi)) == math.pi
    assert mio.fmt(np.int64(3)) == "3" and mio.fmt(True) == "1" and mio.fmt(None) == ""
    assert mio.fmt(float("nan")) == "nan"
    assert json.loads(mio.dumps17({"a": 0.1, "b": [1.0, np.float64(2.5)]})) == {"a": 0.1, "b": [1.0, 2.5]}
    assert '"a": 0.10000000000000001' in mio.dumps17({"a": 0.1})


def test_unwritable_path(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError, match="cannot write"):
        mio.write_csv(blocker / "sub" / "out.csv", ["a"], [[1]])


def test_read_curve_bad_header(tmp_path):
    with pytest.raises(mio.IngestError, match="expected header"):
        mio.read_curve(_write(tmp_path, "a,b,c\n1,2,3\n"))
