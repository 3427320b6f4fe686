"""Record types shared across modules."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class PowerLawFit:
    prefactor: float
    exponent: float  # value ~ prefactor * lag ** (-exponent)
    window: tuple[int, int]
    r2: float = float("nan")
    n_points: int = 0

    def as_dict(self) -> dict:
        return {"prefactor": self.prefactor, "exponent": self.exponent,
                "window": list(self.window), "r2": self.r2, "n_points": self.n_points}


@dataclass
class LaggedCurve:
    lags: np.ndarray
    values: np.ndarray
    stderr: np.ndarray
    fit: PowerLawFit | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.lags = np.asarray(self.lags, dtype=np.int64)
        self.values = np.asarray(self.values, dtype=float)
        self.stderr = np.asarray(self.stderr, dtype=float)
        if len(self.lags) < 1:
            raise ValueError("a lagged curve needs at least one lag")
        if not (len(self.lags) == len(self.values) == len(self.stderr)):
            raise ValueError("lags, values and stderr must have equal length")
        if np.any(self.stderr < 0):
            raise ValueError("standard errors must be non-negative")

    def __len__(self) -> int:
        return len(self.lags)

    def at(self, lag: int) -> float:
        i = np.searchsorted(self.lags, lag)
        if i >= len(self.lags) or self.lags[i] != lag:
            raise KeyError(lag)
        return float(self.values[i])


@dataclass
class TradeSeries:
    """Per-trade records.

    ``mid[n]`` is the midprice just before trade ``n``. It may carry one
    extra trailing entry (the midprice after the last trade), in which case
    every trade has a return ``r_n = mid[n+1] - mid[n]``.
    """

    eps: np.ndarray
    vol: np.ndarray
    mid: np.ndarray
    spread: np.ndarray | None = None
    agent: np.ndarray | None = None
    ts: np.ndarray | None = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        self.eps = np.asarray(self.eps, dtype=np.int8)
        n = len(self.eps)
        self.vol = np.ones(n) if self.vol is None else np.asarray(self.vol, dtype=float)
        self.mid = np.asarray(self.mid, dtype=float)
        if len(self.vol) != n or len(self.mid) not in (n, n + 1):
            raise ValueError("eps, vol and mid lengths are inconsistent")
        if n and not np.all(np.abs(self.eps) == 1):
            raise ValueError("signs must be +1 or -1")
        if np.any(self.vol <= 0):
            raise ValueError("volumes must be positive")
        if self.spread is not None:
            self.spread = np.asarray(self.spread, dtype=float)
            if np.any(self.spread < 0):
                raise ValueError("spreads must be non-negative")
        if self.agent is not None:
            self.agent = np.asarray(self.agent)

    def __len__(self) -> int:
        return len(self.eps)

    @property
    def returns(self) -> np.ndarray:
        return np.diff(self.mid)
