"""Derived price series for the technical analyst.

Standard definitions, fixed here so every model sees the same numbers:
simple and exponential moving averages, MACD with its signal line, Wilder
RSI, trailing returns, and close-to-close volatility. A field is absent
(``None``) whenever the history is shorter than its window; absence is not
an error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .market_data import PriceBar


@dataclass(frozen=True)
class IndicatorSet:
    sma_20: float | None = None
    ema_12: float | None = None
    ema_26: float | None = None
    macd: float | None = None
    macd_signal: float | None = None
    rsi_14: float | None = None
    return_5d: float | None = None
    return_20d: float | None = None
    volatility_20d: float | None = None

    def to_dict(self) -> dict:
        return {
            "sma_20": self.sma_20,
            "ema_12": self.ema_12,
            "ema_26": self.ema_26,
            "macd": self.macd,
            "macd_signal": self.macd_signal,
            "rsi_14": self.rsi_14,
            "return_5d": self.return_5d,
            "return_20d": self.return_20d,
            "volatility_20d": self.volatility_20d,
        }


def ema_series(values: Sequence[float], n: int) -> list[float]:
    """Recursive EMA with alpha = 2/(n+1), seeded by the first value."""
    alpha = 2.0 / (n + 1)
    out: list[float] = []
    for value in values:
        if not out:
            out.append(value)
        else:
            out.append(alpha * value + (1 - alpha) * out[-1])
    return out


def wilder_rsi(closes: Sequence[float], n: int = 14) -> float | None:
    """Wilder-smoothed RSI; zero movement maps to the neutral 50."""
    if len(closes) < n + 1:
        return None
    changes = [closes[i + 1] - closes[i] for i in range(len(closes) - 1)]
    gains = [max(c, 0.0) for c in changes]
    losses = [max(-c, 0.0) for c in changes]
    avg_gain = sum(gains[:n]) / n
    avg_loss = sum(losses[:n]) / n
    for i in range(n, len(changes)):
        avg_gain = (avg_gain * (n - 1) + gains[i]) / n
        avg_loss = (avg_loss * (n - 1) + losses[i]) / n
    if avg_gain == 0.0 and avg_loss == 0.0:
        return 50.0
    if avg_loss == 0.0:
        return 100.0
    rs = avg_gain / avg_loss
    return 100.0 - 100.0 / (1.0 + rs)


def compute_indicators(bars: Sequence[PriceBar]) -> IndicatorSet:
    """Indicator values at the last bar of an ascending-by-date series."""
    closes = [float(bar.close) for bar in bars]
    n = len(closes)
    if n == 0:
        return IndicatorSet()

    sma_20 = sum(closes[-20:]) / 20 if n >= 20 else None

    ema12 = ema_series(closes, 12)
    ema26 = ema_series(closes, 26)
    ema_12 = ema12[-1] if n >= 12 else None
    ema_26 = ema26[-1] if n >= 26 else None
    macd = ema_12 - ema_26 if (ema_12 is not None and ema_26 is not None) else None

    # Signal line: EMA_9 over the MACD values from the first bar where both
    # EMAs have their full windows (bar 26), needing 9 such values.
    macd_signal = None
    if n >= 34:
        macd_values = [ema12[i] - ema26[i] for i in range(25, n)]
        macd_signal = ema_series(macd_values, 9)[-1]

    rsi_14 = wilder_rsi(closes, 14)

    return_5d = closes[-1] / closes[-6] - 1.0 if n >= 6 else None
    return_20d = closes[-1] / closes[-21] - 1.0 if n >= 21 else None

    volatility_20d = None
    if n >= 21:
        rets = [closes[i + 1] / closes[i] - 1.0 for i in range(n - 21, n - 1)]
        mean = sum(rets) / len(rets)
        var = sum((r - mean) ** 2 for r in rets) / (len(rets) - 1)
        volatility_20d = math.sqrt(var)

    return IndicatorSet(
        sma_20=sma_20,
        ema_12=ema_12,
        ema_26=ema_26,
        macd=macd,
        macd_signal=macd_signal,
        rsi_14=rsi_14,
        return_5d=return_5d,
        return_20d=return_20d,
        volatility_20d=volatility_20d,
    )
