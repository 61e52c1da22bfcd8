"""Synthetic MLOB tapes with known ground truth.

Each trade is informed with probability ``informed_fraction``: the mid then
moves one tick in the trade's direction before the next trade. Otherwise it
is a noise trade with a random direction, after which the mid moves up or
down one tick with probability ``noise_move_q / 2`` each. Quotes keep a
constant spread, so Δp is always -tick, 0 or +tick.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import IO

import numpy as np

from .errors import InvalidConfig
from .tape.codec import (
    Add, Cancel, Delete, Directory, Execute, HiddenExec, Side, SpecialDeal, TapeMessage,
)

NOISE, INFORMED, INSIDER = 0, 1, 2
LABELS = {NOISE: "noise", INFORMED: "informed", INSIDER: "insider"}


@dataclass(frozen=True)
class SimConfig:
    seed: int = 0
    n_trades: int = 1000
    symbol: str = "SIM"
    locate: int = 1
    tick: int = 100  # price units (1e-4), i.e. one cent
    spread_ticks: int = 1
    initial_mid: float = 100.0
    informed_fraction: float = 0.3
    noise_move_q: float = 0.2
    lot: int = 100
    max_lots: int = 5
    depth: int = 10_000
    split_prob: float = 0.0  # chance a noise order prints as same-timestamp children
    max_children: int = 3
    special_rate: float = 0.0  # 'C' prints per trade
    hidden_rate: float = 0.0  # 'P' prints per trade
    cancel_rate: float = 0.0  # partial cancels on the untouched side per trade
    start_ns: int = 34_200 * 10**9
    # experimental: trades toward a fixed terminal target, no price impact
    insider_fraction: float = 0.0
    insider_target_ticks: int = 50
    # diffusion mode
    rho: float = 0.0
    diffusion_sigma: float = 1.0
    diffusion_l: float = 1.0

    def validate(self) -> None:
        for name in ("informed_fraction", "noise_move_q", "split_prob", "insider_fraction"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise InvalidConfig(f"{name}={v} outside [0, 1]")
        if self.informed_fraction + self.insider_fraction > 1.0:
            raise InvalidConfig("informed_fraction + insider_fraction exceeds 1")
        if not -1.0 <= self.rho <= 1.0:
            raise InvalidConfig(f"rho={self.rho} outside [-1, 1]")
        if self.n_trades < 1:
            raise InvalidConfig("n_trades must be >= 1")
        if self.spread_ticks < 1 or self.tick < 1:
            raise InvalidConfig("spread must be at least one positive tick")
        if self.lot < 1 or self.max_lots < 1 or self.max_children < 2:
            raise InvalidConfig("volume parameters must be positive")
        if min(self.special_rate, self.hidden_rate, self.cancel_rate) < 0:
            raise InvalidConfig("event rates must be non-negative")
        if self.diffusion_sigma < 0 or self.diffusion_l < 0:
            raise InvalidConfig("diffusion volatilities must be non-negative")
        bid = round(self.initial_mid * 10_000) - self.spread_ticks * self.tick // 2
        if bid < self.tick:
            raise InvalidConfig("initial mid too low for the spread")


@dataclass(frozen=True, eq=False)
class GroundTruth:
    """Per-trade labels; ``buy`` is the active side's direction."""

    label: np.ndarray
    buy: np.ndarray
    volume: np.ndarray
    move: np.ndarray  # mid change in ticks after the trade
    children: np.ndarray

    def __len__(self) -> int:
        return len(self.label)


class _Quotes:
    """One resting order per side, replaced wholesale on every quote move."""

    def __init__(self, cfg: SimConfig, out: list):
        self.cfg, self.out = cfg, out
        self.next_id = 1
        half = cfg.spread_ticks * cfg.tick
        self.bid = round(cfg.initial_mid * 10_000) - half // 2
        self.bid -= self.bid % cfg.tick
        self.ask = self.bid + half
        self.orders = {1: [0, 0], -1: [0, 0]}  # sign -> [order_id, remaining]

    def post(self, sign: int, shares: int, ts: int) -> None:
        oid = self.next_id
        self.next_id += 1
        price = self.bid if sign > 0 else self.ask
        self.out.append(Add(self.cfg.locate, ts, oid, Side.from_sign(sign), shares, price))
        self.orders[sign] = [oid, shares]

    def pull(self, sign: int, ts: int) -> None:
        self.out.append(Delete(self.cfg.locate, ts, self.orders[sign][0]))

    def shift(self, move: int, ts: int) -> None:
        step = move * self.cfg.tick
        # move the side in the direction of travel first so the book never crosses
        first = -1 if move > 0 else 1
        for sign in (first, -first):
            self.pull(sign, ts)
            if sign > 0:
                self.bid += step
            else:
                self.ask += step
            self.post(sign, self.cfg.depth, ts)


def generate_tape(cfg: SimConfig) -> tuple[list[TapeMessage], GroundTruth]:
    """Message stream realizing ``cfg.n_trades`` best-quote trades."""
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    n = cfg.n_trades
    u_kind = rng.random(n)
    buy = rng.random(n) < 0.5
    lots = rng.integers(1, cfg.max_lots + 1, size=n)
    u_move = rng.random(n)
    gaps = rng.integers(1_000, 1_000_000, size=n)
    u_split = rng.random(n)
    n_child = rng.integers(2, cfg.max_children + 1, size=n)
    n_special = rng.poisson(cfg.special_rate, size=n) if cfg.special_rate else np.zeros(n, int)
    n_hidden = rng.poisson(cfg.hidden_rate, size=n) if cfg.hidden_rate else np.zeros(n, int)
    u_cancel = rng.random(n)

    label = np.where(u_kind < cfg.informed_fraction, INFORMED,
                     np.where(u_kind < cfg.informed_fraction + cfg.insider_fraction, INSIDER, NOISE))
    volume = lots * cfg.lot
    move = np.zeros(n, dtype=np.int64)
    children = np.ones(n, dtype=np.int64)

    out: list[TapeMessage] = [Directory(cfg.locate, cfg.symbol)]
    q = _Quotes(cfg, out)
    ts = cfg.start_ns
    q.post(1, cfg.depth, ts)
    q.post(-1, cfg.depth, ts)
    target = q.bid + q.ask + 2 * cfg.insider_target_ticks * cfg.tick
    match = 0
    loc = cfg.locate
    for i in range(n):
        ts += int(gaps[i])
        for _ in range(int(n_special[i])):
            out.append(SpecialDeal(loc, ts, int(cfg.lot), q.bid))
        for _ in range(int(n_hidden[i])):
            match += 1
            out.append(HiddenExec(loc, ts, Side.BID, int(cfg.lot), q.bid, match))

        kind = label[i]
        if kind == INFORMED:
            if not buy[i] and q.bid - cfg.tick < cfg.tick:
                buy[i] = True  # price floor: an informed seller cannot push lower
            move[i] = 1 if buy[i] else -1
        elif kind == INSIDER:
            buy[i] = (q.bid + q.ask) < target
        if kind != INFORMED:
            u = u_move[i]
            m = 1 if u < cfg.noise_move_q / 2 else (-1 if u < cfg.noise_move_q else 0)
            if m < 0 and q.bid - cfg.tick < cfg.tick:
                m = 0
            move[i] = m

        v = int(volume[i])
        sign = -1 if buy[i] else 1  # passive side hit by the taker
        if q.orders[sign][1] < v:
            q.pull(sign, ts)
            q.post(sign, cfg.depth + v, ts)
        k = 1
        if kind == NOISE and u_split[i] < cfg.split_prob:
            k = int(min(n_child[i], v))
        children[i] = k
        sizes = [v // k] * k
        sizes[-1] += v - sum(sizes)
        oid = q.orders[sign][0]
        for size in sizes:
            match += 1
            out.append(Execute(loc, ts, oid, size, match))
        q.orders[sign][1] -= v
        if q.orders[sign][1] == 0:
            q.post(sign, cfg.depth, ts)

        if cfg.cancel_rate and u_cancel[i] < cfg.cancel_rate:
            other = -sign
            oid2, left = q.orders[other]
            if left > 1:
                out.append(Cancel(loc, ts + 1, oid2, left // 2))
                q.orders[other][1] = left - left // 2
        if move[i]:
            q.shift(int(move[i]), ts + 1)
        ts += 1

    truth = GroundTruth(label=label, buy=buy, volume=volume, move=move, children=children)
    return out, truth


def write_truth_csv(out: IO[str], truth: GroundTruth) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(("trade", "label", "side", "volume", "move_ticks", "children"))
    for i in range(len(truth)):
        w.writerow((i + 1, LABELS[int(truth.label[i])], "B" if truth.buy[i] else "S",
                    int(truth.volume[i]), int(truth.move[i]), int(truth.children[i])))


@dataclass(frozen=True, eq=False)
class DiffusionIncrements:
    dp: np.ndarray
    dl: np.ndarray


def generate_diffusion_tape(cfg: SimConfig) -> DiffusionIncrements:
    """Correlated Gaussian (Δp, ΔL) increments on a unit-time grid of n_trades steps."""
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    n = cfg.n_trades
    scale = 1.0 / np.sqrt(n)
    z1 = rng.standard_normal(n)
    z2 = rng.standard_normal(n)
    dw_l = cfg.rho * z1 + np.sqrt(1.0 - cfg.rho**2) * z2
    return DiffusionIncrements(dp=cfg.diffusion_sigma * scale * z1,
                               dl=cfg.diffusion_l * scale * dw_l)


def write_increments_csv(out: IO[str], inc: DiffusionIncrements) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(("dp", "dL"))
    for a, b in zip(inc.dp, inc.dl):
        w.writerow((repr(float(a)), repr(float(b))))


def read_increments_csv(src: IO[str]) -> DiffusionIncrements:
    """Inverse of :func:`write_increments_csv`; lines starting with '#' are skipped."""
    rows = list(csv.DictReader(line for line in src if not line.startswith("#")))
    if not rows or set(rows[0]) != {"dp", "dL"}:
        raise InvalidConfig("increments CSV needs a dp,dL header and at least one row")
    return DiffusionIncrements(dp=np.array([float(r["dp"]) for r in rows]),
                               dl=np.array([float(r["dL"]) for r in rows]))
