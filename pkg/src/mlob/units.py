"""Integer money units.

Prices travel as integers in 1e-4 currency ("price units"). Mids are
``bid + ask``, an integer count of half price units ("half-units", 5e-5
currency), which keeps every ledger quantity an exact integer.
"""

from __future__ import annotations

import numpy as np

PRICE_SCALE = 10_000
HALF_SCALE = 2 * PRICE_SCALE


def price_to_currency(p):
    return np.asarray(p) / PRICE_SCALE if np.ndim(p) else p / PRICE_SCALE


def half_to_currency(h):
    return np.asarray(h) / HALF_SCALE if np.ndim(h) else h / HALF_SCALE


def _fixed(value: int, decimals: int) -> str:
    value = int(value)
    sign = "-" if value < 0 else ""
    whole, frac = divmod(abs(value), 10**decimals)
    return f"{sign}{whole}.{frac:0{decimals}d}"


def fmt_price(p: int) -> str:
    """Exact 4-decimal rendering of an integer price."""
    return _fixed(p, 4)


def fmt_half(h: int) -> str:
    """Exact 5-decimal rendering of an integer half-unit amount."""
    return _fixed(int(h) * 5, 5)


def fmt_prob(x: float | None) -> str:
    return "NA" if x is None else f"{x:.5f}"
