"""Coupled reflected-SDE system for the mesoscopic book.

Integration uses projected (reflected) Euler-Maruyama: the unprojected
step is clipped at zero and the clipped amount is accrued in an explicit
reflection ledger, which makes the complementarity property testable.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .errors import NumericalBlowupError
from .model import (
    UP, DOWN, CoefficientSet, GridSpec, PriceChangeSpec, PriceEvent,
    RegenerationRule, shift_profiles, theta_rates,
)


@dataclass
class MesoState:
    bid: np.ndarray
    ask: np.ndarray
    mid: float
    ledger_bid: np.ndarray
    ledger_ask: np.ndarray

    @classmethod
    def initial(cls, bid, ask, mid=0.0) -> "MesoState":
        bid = np.asarray(bid, dtype=np.float64).copy()
        ask = np.asarray(ask, dtype=np.float64).copy()
        return cls(bid=bid, ask=ask, mid=mid,
                   ledger_bid=np.zeros_like(bid),
                   ledger_ask=np.zeros_like(ask))

    @property
    def num_levels(self) -> int:
        return self.bid.shape[0]


def _side_step(x, tab, dt, noise):
    """Projected Euler-Maruyama step for one side; returns (x', clipped)."""
    lap = np.empty_like(x)
    lap[:] = -2.0 * x
    lap[:-1] += x[1:]
    lap[1:] += x[:-1]
    drift = tab.smoothing * lap \
        + (tab.limit_base + tab.limit_slope * x) \
        - (tab.cancel_base + tab.cancel_slope * x)
    sigma = tab.sigma_base + tab.sigma_slope * x
    prop = x + drift * dt + sigma * np.sqrt(dt) * noise
    clipped = np.maximum(-prop, 0.0)
    return np.maximum(prop, 0.0), clipped


_warned_stability = False


def step_meso(state: MesoState, coeffs: CoefficientSet, dt: float,
              rng: np.random.Generator) -> MesoState:
    """One projected Euler-Maruyama step of the coupled system."""
    global _warned_stability
    if not _warned_stability:
        slope = max(float(np.max(np.abs(coeffs.bid.limit_slope - coeffs.bid.cancel_slope))),
                    float(np.max(np.abs(coeffs.ask.limit_slope - coeffs.ask.cancel_slope))))
        alpha = max(coeffs.bid.smoothing, coeffs.ask.smoothing)
        if dt * (2.0 * alpha + slope) >= 1.0:
            warnings.warn("time step too coarse: dt*(2*alpha + |h slope|) >= 1",
                          RuntimeWarning)
            _warned_stability = True
    L = state.num_levels
    noise = rng.standard_normal((2, L))
    new_bid, clip_b = _side_step(state.bid, coeffs.bid, dt, noise[0])
    new_ask, clip_a = _side_step(state.ask, coeffs.ask, dt, noise[1])
    if not (np.all(np.isfinite(new_bid)) and np.all(np.isfinite(new_ask))):
        raise NumericalBlowupError("meso state became non-finite")
    return MesoState(bid=new_bid, ask=new_ask, mid=state.mid,
                     ledger_bid=state.ledger_bid + clip_b,
                     ledger_ask=state.ledger_ask + clip_a)


@dataclass
class MesoPath:
    snapshot_times: np.ndarray
    snapshot_bid: np.ndarray
    snapshot_ask: np.ndarray
    snapshot_mid: np.ndarray
    terminal: MesoState
    price_events: List[PriceEvent] = field(default_factory=list)


def simulate_meso_dynamic(init: MesoState, coeffs: CoefficientSet,
                          spec: Optional[PriceChangeSpec],
                          rule: Optional[RegenerationRule],
                          horizon: float, dt: float,
                          rng: np.random.Generator,
                          grid: Optional[GridSpec] = None,
                          snapshot_times=None) -> MesoPath:
    """Dynamic mesoscopic model: reflected SDEs between price changes,
    with trapezoidal accumulation of the price-clock integrals."""
    state = MesoState(bid=init.bid.copy(), ask=init.ask.copy(), mid=init.mid,
                      ledger_bid=init.ledger_bid.copy(),
                      ledger_ask=init.ledger_ask.copy())
    rule = rule or RegenerationRule(variant="shift")
    grid = grid or GridSpec(num_ticks=state.num_levels + 1)
    snap_times = np.asarray(
        [] if snapshot_times is None else snapshot_times, dtype=np.float64)
    n_steps = int(np.ceil(horizon / dt - 1e-12))
    price_events: List[PriceEvent] = []
    snaps_b, snaps_a, snap_mids = [], [], []
    snap_idx = 0

    if spec is not None:
        a_u = a_d = 0.0
        y_u = rng.exponential()
        y_d = rng.exponential()
        th_u, th_d = theta_rates(state.bid, state.ask, grid.num_ticks, spec)

    t = 0.0
    for _ in range(n_steps):
        step_dt = min(dt, horizon - t)
        state = step_meso(state, coeffs, step_dt, rng)
        t += step_dt
        if spec is not None:
            nth_u, nth_d = theta_rates(state.bid, state.ask, grid.num_ticks, spec)
            a_u += 0.5 * (th_u + nth_u) * step_dt
            a_d += 0.5 * (th_d + nth_d) * step_dt
            th_u, th_d = nth_u, nth_d
            if a_u >= y_u or a_d >= y_d:
                direction = UP if a_u >= y_u else DOWN
                new_mid = state.mid + (grid.jump_size if direction == UP
                                       else -grid.jump_size)
                price_events.append(PriceEvent(
                    time=t, direction=direction, new_mid=new_mid,
                    pre_bid=state.bid.copy(), pre_ask=state.ask.copy()))
                if rule.variant == "shift":
                    nb, na = shift_profiles(state.bid, state.ask, direction,
                                            rule.shift_bins)
                elif rule.variant == "identity":
                    nb, na = state.bid, state.ask
                else:
                    nb, na = rule.sampler(state.bid, state.ask, direction, rng)
                state = MesoState(bid=np.maximum(nb, 0.0),
                                  ask=np.maximum(na, 0.0), mid=new_mid,
                                  ledger_bid=state.ledger_bid,
                                  ledger_ask=state.ledger_ask)
                a_u = a_d = 0.0
                y_u = rng.exponential()
                y_d = rng.exponential()
                th_u, th_d = theta_rates(state.bid, state.ask,
                                         grid.num_ticks, spec)
        while snap_idx < snap_times.shape[0] and snap_times[snap_idx] <= t + 1e-12:
            snaps_b.append(state.bid.copy())
            snaps_a.append(state.ask.copy())
            snap_mids.append(state.mid)
            snap_idx += 1

    L = state.num_levels
    return MesoPath(
        snapshot_times=snap_times[:len(snaps_b)],
        snapshot_bid=np.asarray(snaps_b).reshape(-1, L),
        snapshot_ask=np.asarray(snaps_a).reshape(-1, L),
        snapshot_mid=np.asarray(snap_mids),
        terminal=state, price_events=price_events)


def meso_terminal_ensemble(init_bid, init_ask, coeffs: CoefficientSet,
                           t: float, dt: float, paths: int,
                           seed: int = 0,
                           checkpoints=None) -> np.ndarray:
    """Static-model terminal marginals over an ensemble, vectorized over
    paths.  Returns (paths, 2, L) or, with checkpoints, (C, paths, 2, L)."""
    rng = np.random.default_rng(seed)
    init_bid = np.asarray(init_bid, dtype=np.float64)
    init_ask = np.asarray(init_ask, dtype=np.float64)
    L = init_bid.shape[0]
    x = np.empty((paths, 2, L))
    x[:, 0] = init_bid
    x[:, 1] = init_ask

    tabs = (coeffs.bid, coeffs.ask)
    checks = sorted(checkpoints) if checkpoints is not None else [t]
    out = np.empty((len(checks), paths, 2, L))
    n_steps = int(np.ceil(checks[-1] / dt - 1e-12))
    sqdt = np.sqrt(dt)
    check_idx = 0
    cur_t = 0.0
    for step in range(n_steps):
        noise = rng.standard_normal((paths, 2, L))
        for s in (0, 1):
            tab = tabs[s]
            xs = x[:, s]
            lap = -2.0 * xs
            lap[:, :-1] += xs[:, 1:]
            lap[:, 1:] += xs[:, :-1]
            drift = tab.smoothing * lap \
                + (tab.limit_base + tab.limit_slope * xs) \
                - (tab.cancel_base + tab.cancel_slope * xs)
            sigma = tab.sigma_base + tab.sigma_slope * xs
            np.maximum(xs + drift * dt + sigma * sqdt * noise[:, s], 0.0,
                       out=xs)
        cur_t += dt
        while check_idx < len(checks) and checks[check_idx] <= cur_t + 1e-12:
            out[check_idx] = x
            check_idx += 1
    while check_idx < len(checks):
        out[check_idx] = x
        check_idx += 1
    if not np.all(np.isfinite(x)):
        raise NumericalBlowupError("meso ensemble became non-finite")
    if checkpoints is None:
        return out[0]
    return out
