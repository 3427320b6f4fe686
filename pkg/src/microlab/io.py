"""Ingestion of event and trade/quote files, and result export.

Event files carry one order-book event per row::

    seq,ts,kind,side,price,volume,agent,ref

TAQ-style files interleave trades (``type=T``) and quotes (``type=Q``)::

    ts,type,price,volume,side,agent,venue,bid,ask

``venue`` is ``on`` for trades executed in the visible book and ``off`` for
trades reported from the off-book market. Crossed quotes (bid > ask) are
quarantined rather than rejected. Floats are written with 17 significant
digits so every exported value re-imports exactly.
"""
from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .book import BUY, SELL, OrderEvent
from .series import LaggedCurve, TradeSeries

EVENT_COLUMNS = ("seq", "ts", "kind", "side", "price", "volume", "agent", "ref")
TAQ_COLUMNS = ("ts", "type", "price", "volume", "side", "agent", "venue", "bid", "ask")
CURVE_COLUMNS = ("lag", "value", "stderr")


class IngestError(ValueError):
    """Schema violation, reported with file and line number."""

    def __init__(self, path, line: int, msg: str):
        super().__init__(f"{path}:{line}: {msg}")
        self.path, self.line = str(path), line


def fmt(x) -> str:
    """Serialize a scalar; floats use 17 significant digits."""
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return format(x, ".17g")
    return str(x)


def _json_default(x):
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        return float(x)
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, np.bool_):
        return bool(x)
    raise TypeError(f"cannot serialize {type(x).__name__}")


def dumps17(obj) -> str:
    """JSON text with every float written to 17 significant digits."""
    floats: list[float] = []

    def walk(o):
        if isinstance(o, (bool, np.bool_)):
            return bool(o)
        if isinstance(o, (float, np.floating)):
            floats.append(float(o))
            return f"\x00{len(floats) - 1}\x00"
        if isinstance(o, dict):
            return {str(k): walk(v) for k, v in o.items()}
        if isinstance(o, (list, tuple, np.ndarray)):
            return [walk(v) for v in (o.tolist() if isinstance(o, np.ndarray) else o)]
        if isinstance(o, np.integer):
            return int(o)
        return o

    text = json.dumps(walk(obj), default=_json_default)
    for i, x in enumerate(floats):
        rep = ("NaN" if math.isnan(x) else ("Infinity" if x > 0 else "-Infinity")) \
            if not math.isfinite(x) else format(x, ".17g")
        if math.isfinite(x) and not any(c in rep for c in ".en"):
            rep += ".0"
        text = text.replace(f'"\\u0000{i}\\u0000"', rep, 1)
    return text


# --------------------------------------------------------------- reading

def _rows(path):
    path = Path(path)
    with path.open(newline="") as fh:
        text = fh.read()
    if not text.strip():
        return None, []
    rd = csv.reader(text.splitlines())
    header = None
    rows = []
    for lineno, row in enumerate(rd, start=1):
        if not row or (row[0].startswith("#")):
            continue
        if header is None:
            header = [c.strip() for c in row]
            continue
        rows.append((lineno, row))
    return header, rows


def _req(path, line, cols, row, name, conv, positive=False, optional=False):
    i = cols.get(name)
    raw = row[i].strip() if i is not None and i < len(row) else ""
    if raw == "":
        if optional:
            return None
        raise IngestError(path, line, f"missing value for {name!r}")
    try:
        v = conv(raw)
    except ValueError:
        raise IngestError(path, line, f"bad {name!r} value {raw!r}") from None
    if positive and not v > 0:
        raise IngestError(path, line, f"{name!r} must be positive, got {raw!r}")
    return v


def _side(raw: str) -> int:
    r = raw.strip().upper()
    if r in ("B", "BUY", "+1", "1"):
        return BUY
    if r in ("S", "SELL", "-1"):
        return SELL
    raise ValueError(raw)


def _check_header(path, header, needed):
    missing = [c for c in needed if c not in header]
    if missing:
        raise IngestError(path, 1, f"missing columns {missing}")
    return {c: i for i, c in enumerate(header)}


def ingest_events(path) -> list[OrderEvent]:
    """Read an event file into ``OrderEvent`` records.

    Timestamps must be non-decreasing and seq strictly increasing.
    """
    header, rows = _rows(path)
    if header is None:
        return []
    cols = _check_header(path, header, ("seq", "kind", "side"))
    out: list[OrderEvent] = []
    last_ts = -math.inf
    last_seq = None
    for line, row in rows:
        seq = _req(path, line, cols, row, "seq", int)
        kind = _req(path, line, cols, row, "kind", str).upper()
        if kind not in ("L", "M", "C"):
            raise IngestError(path, line, f"unknown event kind {kind!r}")
        side = _req(path, line, cols, row, "side", _side)
        ts = _req(path, line, cols, row, "ts", float, optional=True)
        if ts is not None:
            if ts < last_ts:
                raise IngestError(path, line, "timestamps must be non-decreasing")
            last_ts = ts
        if last_seq is not None and seq <= last_seq:
            raise IngestError(path, line, "seq must be strictly increasing")
        last_seq = seq
        price = _req(path, line, cols, row, "price", int, optional=kind != "L")
        if kind == "C":
            vol = 0
            ref = _req(path, line, cols, row, "ref", int)
        else:
            vol = _req(path, line, cols, row, "volume", int, positive=True)
            ref = None
        if kind == "L" and price <= 0:
            raise IngestError(path, line, "price must be positive")
        agent = _req(path, line, cols, row, "agent", int, optional=True)
        out.append(OrderEvent(kind, side, price if kind == "L" else None, vol, agent, seq, ref, ts))
    return out


def export_events(events, path) -> Path:
    rows = []
    for e in events:
        side = "B" if e.side == BUY else "S"
        rows.append([e.seq, e.ts, e.kind, side, e.price, e.volume if e.kind != "C" else None,
                     e.agent, e.ref])
    return write_csv(path, EVENT_COLUMNS, rows)


@dataclass
class TaqData:
    ts: np.ndarray
    price: np.ndarray
    volume: np.ndarray
    side: np.ndarray  # +1/-1, 0 if not reported
    agent: np.ndarray  # -1 if absent
    on_book: np.ndarray  # bool
    quote_ts: np.ndarray
    bid: np.ndarray
    ask: np.ndarray
    quarantined: list = field(default_factory=list)  # (line, ts, bid, ask)

    @property
    def n_quarantined(self) -> int:
        return len(self.quarantined)

    def _subset(self, mask) -> "TaqData":
        return TaqData(self.ts[mask], self.price[mask], self.volume[mask], self.side[mask],
                       self.agent[mask], self.on_book[mask], self.quote_ts, self.bid,
                       self.ask, list(self.quarantined))

    def on_book_trades(self) -> "TaqData":
        return self._subset(self.on_book)

    def off_book_trades(self) -> "TaqData":
        return self._subset(~self.on_book)

    def prevailing_mid(self) -> np.ndarray:
        """Mid of the last valid quote strictly before each trade (NaN if none)."""
        mid = 0.5 * (self.bid + self.ask)
        k = np.searchsorted(self.quote_ts, self.ts, side="left") - 1
        out = np.full(len(self.ts), np.nan)
        ok = k >= 0
        out[ok] = mid[k[ok]]
        return out

    def to_trade_series(self, on_book_only: bool = True) -> TradeSeries:
        """Signed trade series. Unreported signs come from the quote rule
        (price above the prevailing mid is a buy); trades at the mid or
        without a prior quote are dropped."""
        d = self.on_book_trades() if on_book_only else self
        mid = d.prevailing_mid()
        sign = d.side.astype(int).copy()
        inferred = np.sign(d.price - mid)
        fill = sign == 0
        sign[fill] = np.nan_to_num(inferred[fill]).astype(int)
        keep = (sign != 0) & np.isfinite(mid)
        k = np.searchsorted(d.quote_ts, d.ts, side="left") - 1
        spread = np.where(k >= 0, (d.ask - d.bid)[np.maximum(k, 0)], np.nan)
        agent = d.agent[keep] if np.any(d.agent >= 0) else None
        return TradeSeries(sign[keep], d.volume[keep], mid[keep], spread[keep], agent, d.ts[keep])


def ingest_taq(path) -> TaqData:
    header, rows = _rows(path)
    empty = np.empty(0)
    if header is None:
        return TaqData(empty, empty, empty, np.empty(0, int), np.empty(0, int),
                       np.empty(0, bool), empty, empty, empty, [])
    cols = _check_header(path, header, ("ts", "type"))
    t_ts, t_p, t_v, t_s, t_a, t_on = [], [], [], [], [], []
    q_ts, q_b, q_a, quarantine = [], [], [], []
    last_ts = -math.inf
    for line, row in rows:
        ts = _req(path, line, cols, row, "ts", float)
        if ts < last_ts:
            raise IngestError(path, line, "timestamps must be non-decreasing")
        last_ts = ts
        typ = _req(path, line, cols, row, "type", str).upper()
        if typ == "T":
            t_ts.append(ts)
            t_p.append(_req(path, line, cols, row, "price", float, positive=True))
            t_v.append(_req(path, line, cols, row, "volume", float, positive=True))
            s = _req(path, line, cols, row, "side", _side, optional=True)
            t_s.append(0 if s is None else s)
            a = _req(path, line, cols, row, "agent", int, optional=True)
            t_a.append(-1 if a is None else a)
            venue = _req(path, line, cols, row, "venue", str, optional=True) or "on"
            if venue.lower() not in ("on", "off"):
                raise IngestError(path, line, f"venue must be 'on' or 'off', got {venue!r}")
            t_on.append(venue.lower() == "on")
        elif typ == "Q":
            b = _req(path, line, cols, row, "bid", float, positive=True)
            a = _req(path, line, cols, row, "ask", float, positive=True)
            if b > a:
                quarantine.append((line, ts, b, a))
                continue
            q_ts.append(ts)
            q_b.append(b)
            q_a.append(a)
        else:
            raise IngestError(path, line, f"unknown record type {typ!r}")
    return TaqData(np.array(t_ts), np.array(t_p), np.array(t_v), np.array(t_s, dtype=int),
                   np.array(t_a, dtype=int), np.array(t_on, dtype=bool),
                   np.array(q_ts), np.array(q_b), np.array(q_a), quarantine)


def export_taq(data: TaqData, path) -> Path:
    """Write trades and valid quotes merged by time (quotes first on ties)."""
    recs = []
    for t, b, a in zip(data.quote_ts, data.bid, data.ask):
        recs.append((t, 0, [t, "Q", None, None, None, None, None, b, a]))
    for i in range(len(data.ts)):
        s = {BUY: "B", SELL: "S"}.get(int(data.side[i]))
        ag = int(data.agent[i]) if data.agent[i] >= 0 else None
        recs.append((data.ts[i], 1, [data.ts[i], "T", data.price[i], data.volume[i], s, ag,
                                     "on" if data.on_book[i] else "off", None, None]))
    recs.sort(key=lambda r: (r[0], r[1]))
    return write_csv(path, TAQ_COLUMNS, [r[2] for r in recs])


# --------------------------------------------------------------- writing

def _open_out(path):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        return path, path.open("w", newline="")
    except OSError as e:
        raise OSError(f"cannot write {path}: {e.strerror or e}") from e


def write_csv(path, header, rows) -> Path:
    path, fh = _open_out(path)
    with fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(x) for x in r])
    return path


def write_jsonl(path, records) -> Path:
    path, fh = _open_out(path)
    with fh:
        for r in records:
            fh.write(dumps17(r) + "\n")
    return path


def read_jsonl(path) -> list[dict]:
    with Path(path).open() as fh:
        return [json.loads(line) for line in fh if line.strip()]


def export_curve(curve: LaggedCurve, path, fmt_: str = "csv") -> Path:
    if fmt_ == "jsonl":
        return write_jsonl(path, ({"lag": int(l), "value": float(v), "stderr": float(s)}
                                  for l, v, s in zip(curve.lags, curve.values, curve.stderr)))
    if fmt_ != "csv":
        raise ValueError(f"unknown format {fmt_!r}")
    return write_csv(path, CURVE_COLUMNS, zip(curve.lags, curve.values, curve.stderr))


def read_curve(path) -> LaggedCurve:
    path = Path(path)
    if path.suffix == ".jsonl":
        recs = read_jsonl(path)
        return LaggedCurve([r["lag"] for r in recs], [r["value"] for r in recs],
                           [r["stderr"] for r in recs])
    header, rows = _rows(path)
    if header is None or tuple(header) != CURVE_COLUMNS:
        raise IngestError(path, 1, f"expected header {','.join(CURVE_COLUMNS)}")
    lags, vals, ses = [], [], []
    for line, row in rows:
        cols = {c: i for i, c in enumerate(CURVE_COLUMNS)}
        lags.append(_req(path, line, cols, row, "lag", int))
        vals.append(_req(path, line, cols, row, "value", float))
        ses.append(_req(path, line, cols, row, "stderr", float))
    return LaggedCurve(lags, vals, ses)


def export_phase_point(point, path) -> Path:
    """One JSON-lines record with keys x, y, C1, lambda, region, lambda_beta."""
    return write_jsonl(path, [point.as_record()])


def export_records(records, path, fmt_: str = "csv") -> Path:
    """Rows of dicts sharing the keys of the first row."""
    records = list(records)
    if fmt_ == "jsonl":
        return write_jsonl(path, records)
    header = list(records[0].keys()) if records else []
    return write_csv(path, header, ([r.get(k) for k in header] for r in records))


def output_root(default: str = "microlab-out") -> Path:
    return Path(os.environ.get("MICROLAB_OUT", default))
