"""Synthetic LOBSTER-format data with planted parameters.

Runs the forward scheme to get a book trajectory and a jump path, then
regenerates an order-flow message stream whose per-level quadratic
variation and net flow match the planted volatility and drift tables, so
the estimators can be validated end to end.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .calibration import CalibrationScaling
from .errors import ConfigurationError
from .macro import MacroField, MacroResult, SchemeParams, simulate_macro
from .model import (
    CoefficientSet, GridSpec, PriceChangeSpec, RegenerationRule,
)

MARKET_OPEN_SECONDS = 34_200.0      # 09:30
OUTFLOW_TYPE_CHOICES = (2, 3, 4)


@dataclass
class SyntheticResult:
    """What the generator actually wrote, for comparison after re-estimation."""

    planted_sigma: np.ndarray       # pooled per level
    planted_f: np.ndarray           # side-averaged per level
    gamma: float
    delta: float
    num_events: int
    num_jumps: int
    avg_imbalance_mass: float       # time average of the theta window mass
    event_counts: np.ndarray        # per level, both sides pooled
    message_path: str
    orderbook_path: str


def _book_rows(snaps_bid, snaps_ask, snap_times, times, volume_unit):
    """Sizes in shares at each event time, floored at one share so every
    queue counts as occupied."""
    idx = np.searchsorted(snap_times, times, side="right") - 1
    idx = np.clip(idx, 0, snaps_bid.shape[0] - 1)
    bid = np.maximum(np.rint(snaps_bid[idx] * volume_unit), 1.0)
    ask = np.maximum(np.rint(snaps_ask[idx] * volume_unit), 1.0)
    return bid.astype(np.int64), ask.astype(np.int64)


def _dirichlet_laplacian_rows(sizes, grid_size, volume_unit):
    """Row-averaged discrete Laplacian in x-units for one side, matching
    the estimator's convention of empty queues beyond both ends."""
    u = sizes / volume_unit
    padded = np.zeros((u.shape[0], u.shape[1] + 2))
    padded[:, 1:-1] = u
    lap = padded[:, 2:] + padded[:, :-2] - 2.0 * padded[:, 1:-1]
    return lap.mean(axis=0) * grid_size ** 2


def _flow_counts(total: int, net: float):
    """Inflow count out of ``total`` events whose realized net flow
    2*inflow - total is nearest to the (real-valued) target net."""
    n_in = int(np.rint((total + net) / 2.0))
    return min(max(n_in, 0), total)


def generate_synthetic_lobster(
        coeffs: CoefficientSet, price_spec: PriceChangeSpec,
        message_path: str, orderbook_path: str,
        scaling: CalibrationScaling = CalibrationScaling(),
        event_size: int = 6500, seed: int = 0,
        num_steps: int = 200_000, num_snapshots: int = 2000,
        start_mid_cents: float = 500_000.5,
        init_bid=None, init_ask=None,
        rule: RegenerationRule = RegenerationRule(variant="identity"),
        ) -> SyntheticResult:
    """Write a row-aligned message/orderbook pair with planted parameters.

    Book snapshots and the price path come from a forward-scheme run with
    the planted gamma and delta.  Order events are laid down with constant
    size so that, per level, the sum of squared sizes matches the planted
    volatility identity and the net flow matches the planted drift plus
    the realized smoothing term.
    """
    L = coeffs.num_levels
    if L != scaling.levels or L != scaling.grid_size - 1:
        raise ConfigurationError("coefficient tables must cover "
                                 "grid_size - 1 levels")
    grid = GridSpec(num_ticks=scaling.grid_size)
    params = SchemeParams(horizon=scaling.minutes, num_space=scaling.grid_size,
                          num_steps=num_steps)
    if init_bid is None:
        init_bid = np.full(L, 0.3)
    if init_ask is None:
        init_ask = np.full(L, 0.3)
    field = MacroField(bid=np.asarray(init_bid, dtype=float),
                      ask=np.asarray(init_ask, dtype=float), price=0.0)
    snap_every = max(num_steps // num_snapshots, 1)
    # identity regeneration by default: the book keeps its stationary
    # imbalance between jumps, which is what identifies gamma
    run: MacroResult = simulate_macro(field, coeffs, price_spec, params,
                                      seed=seed, grid=grid, rule=rule,
                                      snapshot_every=snap_every)

    rng = np.random.default_rng(np.random.SeedSequence((seed, 0x5EED)))
    w = event_size / scaling.volume_unit

    # per-side, per-level event totals from the volatility identity:
    # count * w^2 = grid * minutes * sigma^2 per side
    budget = scaling.grid_size * scaling.minutes / w ** 2
    tot_bid = np.rint(budget * coeffs.bid.sigma_base ** 2).astype(int)
    tot_ask = np.rint(budget * coeffs.ask.sigma_base ** 2).astype(int)
    n_total = int(tot_bid.sum() + tot_ask.sum())
    if n_total == 0:
        raise ConfigurationError("volatility tables produce no events")

    times = np.sort(rng.uniform(0.0, scaling.minutes, n_total))
    labels = np.empty((n_total, 2), dtype=np.int64)    # (side, level)
    pos = 0
    for s, tot in ((0, tot_bid), (1, tot_ask)):
        for i in range(L):
            labels[pos:pos + tot[i]] = (s, i)
            pos += tot[i]
    rng.shuffle(labels)

    snap_times = np.concatenate(([0.0], run.snapshot_times))
    snaps_b = np.vstack((field.bid[None, :], run.snapshot_bid))
    snaps_a = np.vstack((field.ask[None, :], run.snapshot_ask))
    book_bid, book_ask = _book_rows(snaps_b, snaps_a, snap_times, times,
                                    scaling.volume_unit)

    # realized smoothing correction, computed exactly as the estimator will
    lap_bid = _dirichlet_laplacian_rows(book_bid, scaling.grid_size,
                                        scaling.volume_unit)
    lap_ask = _dirichlet_laplacian_rows(book_ask, scaling.grid_size,
                                        scaling.volume_unit)

    is_inflow = np.zeros(n_total, dtype=bool)
    for s, tabs, lap in ((0, coeffs.bid, lap_bid), (1, coeffs.ask, lap_ask)):
        f_clean = tabs.limit_base - tabs.cancel_base
        nu = f_clean + tabs.smoothing * lap     # model units per minute
        for i in range(L):
            at = np.flatnonzero((labels[:, 0] == s) & (labels[:, 1] == i))
            net = scaling.minutes * nu[i] / w
            n_in = _flow_counts(at.shape[0], net)
            is_inflow[rng.permutation(at)[:n_in]] = True

    # price path in cents at each event time
    jump_incr = np.zeros(n_total)
    if run.num_jumps > 0:
        j_idx = np.searchsorted(run.jump_times, times, side="right")
        cum = np.concatenate(([0], np.cumsum(run.jump_dirs)))
        jump_incr = cum[j_idx].astype(float)
    mid_cents = start_mid_cents + jump_incr
    tick = scaling.tick_units
    bid1 = np.rint((mid_cents - 0.5) * 100.0).astype(np.int64)
    ask1 = bid1 + tick

    side = labels[:, 0]
    level = labels[:, 1]
    price = np.where(side == 0, bid1 - level * tick, ask1 + level * tick)
    direction = np.where(side == 0, 1, -1)
    types = np.where(is_inflow, 1,
                     rng.choice(OUTFLOW_TYPE_CHOICES, size=n_total))

    msg = np.empty((n_total, 6))
    msg[:, 0] = MARKET_OPEN_SECONDS + times * 60.0
    msg[:, 1] = types
    msg[:, 2] = np.arange(1, n_total + 1)
    msg[:, 3] = event_size
    msg[:, 4] = price
    msg[:, 5] = direction
    np.savetxt(message_path, msg, delimiter=",",
               fmt=("%.9f", "%d", "%d", "%d", "%d", "%d"))

    book = np.empty((n_total, 4 * L), dtype=np.int64)
    lev = np.arange(L)
    book[:, 0::4] = ask1[:, None] + lev[None, :] * tick
    book[:, 1::4] = book_ask
    book[:, 2::4] = bid1[:, None] - lev[None, :] * tick
    book[:, 3::4] = book_bid
    np.savetxt(orderbook_path, book, delimiter=",", fmt="%d")

    planted_sigma = np.sqrt(0.5 * (coeffs.bid.sigma_base ** 2
                                   + coeffs.ask.sigma_base ** 2))
    planted_f = 0.5 * ((coeffs.bid.limit_base - coeffs.bid.cancel_base)
                       + (coeffs.ask.limit_base - coeffs.ask.cancel_base))
    mass = (book_bid[:, 0] - book_ask[:, 0]).astype(float).mean() \
        / (2.0 * scaling.grid_size * scaling.volume_unit)
    counts = np.zeros(L, dtype=np.int64)
    for i in range(L):
        counts[i] = int(np.count_nonzero(level == i))
    return SyntheticResult(
        planted_sigma=planted_sigma, planted_f=planted_f,
        gamma=price_spec.gamma, delta=price_spec.delta,
        num_events=n_total, num_jumps=run.num_jumps,
        avg_imbalance_mass=float(mass), event_counts=counts,
        message_path=message_path, orderbook_path=orderbook_path)
