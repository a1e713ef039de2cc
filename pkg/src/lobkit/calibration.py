"""LOBSTER ingestion and method-of-moments parameter estimation.

Message files carry (time, type, order id, size, price, direction) rows;
orderbook files carry 4L columns of (ask price, ask size, bid price,
bid size) per occupied level, row-aligned with the messages.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import pandas as pd

from .errors import DataFormatError

MESSAGE_COLUMNS = ("time", "type", "order_id", "size", "price", "direction")
VALID_TYPES = frozenset((1, 2, 3, 4, 5, 7))
# inflow = limit submissions; outflow = cancellations plus executions,
# which hit the profile the same way
INFLOW_TYPES = (1,)
OUTFLOW_TYPES = (2, 3, 4, 5)


@dataclass(frozen=True)
class CalibrationScaling:
    """Unit conventions: volumes in units of 10^4 shares, level i at
    position i/grid_size, prices in units of 10^-4 dollars, time in
    minutes."""

    levels: int = 50
    grid_size: int = 51
    volume_unit: float = 1e4
    minutes: float = 60.0
    tick_units: int = 100           # price units per tick (1 cent)


@dataclass
class LobsterData:
    messages: pd.DataFrame
    book: np.ndarray                # (rows, 4 * levels) integer
    levels: int

    @property
    def num_rows(self) -> int:
        return len(self.messages)

    def mid_cents(self) -> np.ndarray:
        if self.num_rows == 0:
            return np.empty(0)
        return (self.book[:, 0] + self.book[:, 2]) / 2.0 / 100.0

    def best_volumes(self):
        """(bid size, ask size) at relative level 1, in shares."""
        if self.num_rows == 0:
            return np.empty(0), np.empty(0)
        return self.book[:, 3].astype(float), self.book[:, 1].astype(float)

    def side_sizes(self, side: str) -> np.ndarray:
        """(rows, levels) size matrix for one side, in shares."""
        off = 3 if side == "bid" else 1
        cols = off + 4 * np.arange(self.levels)
        return self.book[:, cols].astype(float)


def _read_csv(path, n_cols, what):
    try:
        df = pd.read_csv(path, header=None, comment=None)
    except pd.errors.EmptyDataError:
        return pd.DataFrame(np.empty((0, n_cols)))
    except (OSError, pd.errors.ParserError) as exc:
        raise DataFormatError(f"cannot parse {what} file {path}: {exc}")
    if df.shape[1] != n_cols:
        raise DataFormatError(
            f"{what} file {path} has {df.shape[1]} columns, expected {n_cols}")
    return df


def parse_lobster(message_path: str, orderbook_path: str,
                  levels: int = 50,
                  tick_units: int = 100) -> LobsterData:
    """Parse row-aligned LOBSTER message/orderbook files.

    Adds per-event relative-level attribution against the aligned
    snapshot and flags limit orders placed into unoccupied queues
    (excluded by the estimators).
    """
    msg = _read_csv(message_path, 6, "message")
    msg.columns = MESSAGE_COLUMNS
    book_df = _read_csv(orderbook_path, 4 * levels, "orderbook")
    if len(msg) != len(book_df):
        raise DataFormatError(
            f"misaligned files: {len(msg)} messages vs {len(book_df)} "
            f"orderbook rows")
    if len(msg) == 0:
        return LobsterData(messages=msg.assign(rel_level=np.empty(0, int),
                                               occupied=np.empty(0, bool)),
                           book=np.empty((0, 4 * levels), dtype=np.int64),
                           levels=levels)

    for col in ("type", "order_id", "size", "price", "direction"):
        msg[col] = pd.to_numeric(msg[col], errors="coerce")
    bad = msg["type"].isna() | ~msg["type"].isin(VALID_TYPES)
    if bad.any():
        raise DataFormatError(
            f"malformed message row {int(np.argmax(bad.values)) + 1}: "
            f"invalid event type")
    if (msg["size"] <= 0).any():
        raise DataFormatError(
            f"malformed message row "
            f"{int(np.argmax((msg['size'] <= 0).values)) + 1}: "
            f"nonpositive size")
    book = book_df.to_numpy(dtype=np.int64)

    best_ask = book[:, 0].astype(float)
    best_bid = book[:, 2].astype(float)
    price = msg["price"].to_numpy(dtype=float)
    direction = msg["direction"].to_numpy()

    rel = np.where(direction > 0,
                   (best_bid - price) / tick_units + 1,
                   (price - best_ask) / tick_units + 1)
    rel_int = np.rint(rel).astype(np.int64)
    valid = (np.abs(rel - rel_int) < 1e-9) & (rel_int >= 1) & (rel_int <= levels)
    rel_int = np.where(valid, rel_int, -1)

    # occupied test against the book state before the event (previous row;
    # the first row falls back to its own snapshot)
    prev_book = np.vstack((book[:1], book[:-1]))
    rows = np.arange(len(msg))
    safe_rel = np.clip(rel_int, 1, levels)
    size_col = np.where(direction > 0, 3 + 4 * (safe_rel - 1),
                        1 + 4 * (safe_rel - 1))
    occupied = prev_book[rows, size_col] > 0
    occupied &= rel_int > 0

    msg = msg.assign(rel_level=rel_int, occupied=occupied)
    return LobsterData(messages=msg, book=book, levels=levels)


def _included(msg: pd.DataFrame) -> pd.Series:
    """Rows used by the flow estimators: attributable relative level, and
    limit orders only when placed into an occupied queue."""
    usable = msg["rel_level"] > 0
    is_limit = msg["type"].isin(INFLOW_TYPES)
    return usable & (~is_limit | msg["occupied"]) \
        & msg["type"].isin(INFLOW_TYPES + OUTFLOW_TYPES)


def estimate_volatility(data: LobsterData,
                        scaling: CalibrationScaling = CalibrationScaling()):
    """Per-level volatility from the order-size quadratic variation:
    grid * minutes * sigma^2(i) = (1/2) sum (size / volume_unit)^2 pooled
    over both sides.  Returns (sigma_hat, event_counts)."""
    sigma = np.zeros(scaling.levels)
    counts = np.zeros(scaling.levels, dtype=np.int64)
    msg = data.messages
    if len(msg) == 0:
        return sigma, counts
    inc = _included(msg)
    sizes = (msg["size"].to_numpy(dtype=float) / scaling.volume_unit) ** 2
    rel = msg["rel_level"].to_numpy()
    denom = 2.0 * scaling.grid_size * scaling.minutes
    for i in range(1, scaling.levels + 1):
        mask = inc.to_numpy() & (rel == i)
        counts[i - 1] = int(mask.sum())
        sigma[i - 1] = np.sqrt(sizes[mask].sum() / denom)
    if np.any(counts == 0):
        warnings.warn("levels with no events: sigma set to 0 there",
                      RuntimeWarning)
    return sigma, counts


@dataclass
class FlowCounts:
    inflow_bid: np.ndarray
    inflow_ask: np.ndarray
    outflow_bid: np.ndarray
    outflow_ask: np.ndarray


def flow_volumes(data: LobsterData,
                 scaling: CalibrationScaling = CalibrationScaling()) -> FlowCounts:
    """Share volume of limit inflow and cancellation/execution outflow per
    side and relative level."""
    L = scaling.levels
    out = FlowCounts(np.zeros(L), np.zeros(L), np.zeros(L), np.zeros(L))
    msg = data.messages
    if len(msg) == 0:
        return out
    inc = _included(msg).to_numpy()
    rel = msg["rel_level"].to_numpy()
    sizes = msg["size"].to_numpy(dtype=float)
    types = msg["type"].to_numpy()
    is_bid = msg["direction"].to_numpy() > 0
    inflow = np.isin(types, INFLOW_TYPES)
    for i in range(1, L + 1):
        at = inc & (rel == i)
        out.inflow_bid[i - 1] = sizes[at & inflow & is_bid].sum()
        out.inflow_ask[i - 1] = sizes[at & inflow & ~is_bid].sum()
        out.outflow_bid[i - 1] = sizes[at & ~inflow & is_bid].sum()
        out.outflow_ask[i - 1] = sizes[at & ~inflow & ~is_bid].sum()
    return out


def average_dirichlet_laplacian(data: LobsterData,
                                scaling: CalibrationScaling = CalibrationScaling()):
    """Time-averaged discrete Laplacian (in x-units, i.e. scaled by
    grid_size^2) of the volume profile in model units, averaged over both
    sides, with the 0th and grid-th queues taken to be empty."""
    if data.num_rows == 0:
        return np.zeros(scaling.levels)
    acc = np.zeros(scaling.levels)
    for side in ("bid", "ask"):
        u = data.side_sizes(side) / scaling.volume_unit
        padded = np.zeros((u.shape[0], scaling.levels + 2))
        padded[:, 1:-1] = u
        lap = padded[:, 2:] + padded[:, :-2] - 2.0 * padded[:, 1:-1]
        acc += lap.mean(axis=0)
    return 0.5 * acc * scaling.grid_size ** 2


def estimate_drift(data: LobsterData, alpha: float = 0.01,
                   scaling: CalibrationScaling = CalibrationScaling()):
    """Drift from net order flow per minute minus the smoothing-term
    contribution.  Returns (f_hat, FlowCounts, laplacian)."""
    flows = flow_volumes(data, scaling)
    net_hour = 0.5 * (flows.inflow_ask + flows.inflow_bid
                      - flows.outflow_ask - flows.outflow_bid) \
        / scaling.volume_unit
    lap = average_dirichlet_laplacian(data, scaling)
    f_hat = net_hour / scaling.minutes - alpha * lap
    return f_hat, flows, lap


@dataclass
class PriceRateEstimates:
    gamma_hat: Optional[float]
    delta_hat: Optional[float]
    imbalance: float                # I, signed
    imbalance_abs: float            # I-tilde
    qv_cents2: float
    price_change_cents: float
    n_price_moves: int
    delta_clamped: bool = False


def estimate_price_params(mid_cents, bid_best, ask_best,
                          scaling: CalibrationScaling = CalibrationScaling(),
                          gamma_hat: Optional[float] = None) -> PriceRateEstimates:
    """Fit the price-change rates from the price path and best-queue
    imbalance.  gamma solves P(end) - P(start) = gamma * minutes * I;
    delta solves 2 * minutes * delta = sum dP^2 - minutes * gamma * Itilde,
    clamped at zero with a warning."""
    mid_cents = np.asarray(mid_cents, dtype=float)
    bid_best = np.asarray(bid_best, dtype=float)
    ask_best = np.asarray(ask_best, dtype=float)
    J = mid_cents.shape[0]
    if J == 0:
        return PriceRateEstimates(None, None, 0.0, 0.0, 0.0, 0.0, 0)
    norm = 2.0 * scaling.grid_size * scaling.volume_unit * J
    diff = bid_best - ask_best
    imbalance = float(diff.sum() / norm)
    imbalance_abs = float(np.abs(diff).sum() / norm)
    dp = np.diff(mid_cents)
    qv = float(np.sum(dp ** 2))
    total_move = float(mid_cents[-1] - mid_cents[0])
    n_moves = int(np.count_nonzero(dp))

    if imbalance != 0.0:
        gamma_hat = total_move / (scaling.minutes * imbalance)
    elif gamma_hat is None:
        warnings.warn("zero average imbalance: gamma not estimable",
                      RuntimeWarning)
        gamma_hat = None

    clamped = False
    if gamma_hat is None:
        delta_hat = qv / (2.0 * scaling.minutes)
    else:
        delta_hat = (qv - scaling.minutes * gamma_hat * imbalance_abs) \
            / (2.0 * scaling.minutes)
    if delta_hat is not None and delta_hat < 0:
        warnings.warn("negative delta estimate clamped to 0", RuntimeWarning)
        delta_hat = 0.0
        clamped = True
    return PriceRateEstimates(
        gamma_hat=gamma_hat, delta_hat=delta_hat, imbalance=imbalance,
        imbalance_abs=imbalance_abs, qv_cents2=qv,
        price_change_cents=total_move, n_price_moves=n_moves,
        delta_clamped=clamped)


@dataclass
class EstimateSet:
    sigma_hat: np.ndarray
    f_hat: np.ndarray
    price: PriceRateEstimates
    event_counts: np.ndarray
    flows: FlowCounts
    laplacian: np.ndarray
    scaling: CalibrationScaling
    n_events: int

    def positions(self) -> np.ndarray:
        return np.arange(1, self.scaling.levels + 1) / self.scaling.grid_size

    def per_level_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "position": self.positions(),
            "sigma_hat": self.sigma_hat,
            "f_hat": self.f_hat,
            "event_count": self.event_counts,
            "inflow_bid": self.flows.inflow_bid,
            "inflow_ask": self.flows.inflow_ask,
            "outflow_bid": self.flows.outflow_bid,
            "outflow_ask": self.flows.outflow_ask,
            "avg_laplacian": self.laplacian,
        })

    def report_text(self) -> str:
        p = self.price
        lines = [
            "calibration report",
            f"events parsed: {self.n_events}",
            f"gamma_hat: {p.gamma_hat if p.gamma_hat is not None else 'not estimable'}",
            f"delta_hat: {p.delta_hat}"
            + (" (clamped at 0)" if p.delta_clamped else ""),
            f"imbalance I: {p.imbalance:.6g}",
            f"imbalance |I|~: {p.imbalance_abs:.6g}",
            f"price QV: {p.qv_cents2:.6g} cents^2 "
            f"({p.qv_cents2 * 1e-4:.6g} dollars^2)",
            f"price moves (nonzero mid changes): {p.n_price_moves}",
            f"net price change: {p.price_change_cents:.6g} cents",
        ]
        return "\n".join(lines) + "\n"


def run_calibration(message_path: str, orderbook_path: str,
                    alpha: float = 0.01,
                    scaling: CalibrationScaling = CalibrationScaling()) -> EstimateSet:
    """Full pipeline: parse, then estimate sigma, f, gamma and delta."""
    data = parse_lobster(message_path, orderbook_path,
                         levels=scaling.levels, tick_units=scaling.tick_units)
    sigma_hat, counts = estimate_volatility(data, scaling)
    f_hat, flows, lap = estimate_drift(data, alpha, scaling)
    bid_best, ask_best = data.best_volumes()
    price = estimate_price_params(data.mid_cents(), bid_best, ask_best,
                                  scaling)
    return EstimateSet(sigma_hat=sigma_hat, f_hat=f_hat, price=price,
                       event_counts=counts, flows=flows, laplacian=lap,
                       scaling=scaling, n_events=data.num_rows)
