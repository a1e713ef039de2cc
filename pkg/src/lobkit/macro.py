"""Forward time-stepping scheme for the pair of reflected stochastic heat
equations with imbalance-driven price jumps and shift regeneration.

Per time step the price update runs first, then the field update
u' = max(u + (alpha*T*N^2/M) * Lap(u) + (T/M) h + sqrt(T*N/M) sigma Z, 0).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .accel import njit
from .errors import ConfigurationError, NumericalBlowupError
from .model import (
    UP, DOWN, CoefficientSet, GridSpec, PriceChangeSpec, RegenerationRule,
    shift_profiles, window_mass,
)


@dataclass(frozen=True)
class SchemeParams:
    """Discretization: T minutes, N space steps, M time steps."""

    horizon: float = 60.0
    num_space: int = 50
    num_steps: int = 1_500_000
    allow_unstable: bool = False

    def __post_init__(self):
        if self.num_space < 2 or self.num_steps < 1 or self.horizon <= 0:
            raise ConfigurationError("invalid scheme parameters")

    @property
    def dt(self) -> float:
        return self.horizon / self.num_steps

    @property
    def dx(self) -> float:
        return 1.0 / self.num_space

    @property
    def lap_gain(self) -> float:
        """T*N^2/M, multiplied by the smoothing rate in the update."""
        return self.horizon * self.num_space ** 2 / self.num_steps

    @property
    def noise_gain(self) -> float:
        """sqrt(T*N/M)."""
        return math.sqrt(self.horizon * self.num_space / self.num_steps)

    def stability_ratio(self, alpha: float) -> float:
        return 2.0 * alpha * self.lap_gain

    def check_stability(self, alpha: float) -> None:
        if self.stability_ratio(alpha) > 1.0:
            msg = (f"stability ratio 2*alpha*T*N^2/M = "
                   f"{self.stability_ratio(alpha):.3g} exceeds 1")
            if self.allow_unstable:
                warnings.warn(msg, RuntimeWarning)
            else:
                raise ConfigurationError(msg)


@dataclass
class MacroField:
    """Interior grid values of both sides plus the price."""

    bid: np.ndarray
    ask: np.ndarray
    price: float
    step_index: int = 0

    def __post_init__(self):
        self.bid = np.asarray(self.bid, dtype=np.float64)
        self.ask = np.asarray(self.ask, dtype=np.float64)
        if self.bid.shape != self.ask.shape or self.bid.ndim != 1:
            raise ConfigurationError("field sides must be 1-d and equal length")
        if np.any(self.bid < 0) or np.any(self.ask < 0):
            raise ConfigurationError("field values must be nonnegative")

    @property
    def num_levels(self) -> int:
        return self.bid.shape[0]


def jump_probabilities(field: MacroField, spec: PriceChangeSpec,
                       params: SchemeParams):
    """(pi_plus, pi_minus) for one time step."""
    diff = field.bid - field.ask
    mass = window_mass(diff, params.num_space, spec.window_width)
    pi_plus = (spec.gamma * max(mass, 0.0) + spec.delta) * params.dt
    pi_minus = (spec.gamma * max(-mass, 0.0) + spec.delta) * params.dt
    if pi_plus + pi_minus > 1.0:
        raise ConfigurationError(
            f"time step too coarse: pi+ + pi- = {pi_plus + pi_minus:.3g} > 1")
    return pi_plus, pi_minus


def price_update(field: MacroField, spec: PriceChangeSpec,
                 params: SchemeParams, rng: np.random.Generator,
                 grid: Optional[GridSpec] = None,
                 rule: Optional[RegenerationRule] = None,
                 uniform: Optional[float] = None):
    """Possibly jump the price by one epsilon and regenerate the profiles.

    Returns (field', jumped) with jumped in {None, 'u', 'd'}.
    """
    grid = grid or GridSpec(num_ticks=params.num_space)
    rule = rule or RegenerationRule(variant="shift", shift_bins=grid.jump_bins)
    pi_plus, pi_minus = jump_probabilities(field, spec, params)
    y = rng.random() if uniform is None else uniform
    if y < pi_plus:
        direction = UP
    elif y < pi_plus + pi_minus:
        direction = DOWN
    else:
        return field, None
    new_price = field.price + (grid.jump_size if direction == UP
                               else -grid.jump_size)
    if rule.variant == "identity":
        nb, na = field.bid, field.ask
    elif rule.variant == "shift":
        nb, na = shift_profiles(field.bid, field.ask, direction,
                                rule.shift_bins)
    else:
        nb, na = rule.sampler(field.bid, field.ask, direction, rng)
        nb, na = np.maximum(nb, 0.0), np.maximum(na, 0.0)
    return MacroField(bid=nb, ask=na, price=new_price,
                      step_index=field.step_index), direction


def field_step(field: MacroField, coeffs: CoefficientSet,
               params: SchemeParams, rng: np.random.Generator,
               noise: Optional[np.ndarray] = None) -> MacroField:
    """One explicit step of both sides with independent normals per point."""
    if noise is None:
        noise = rng.standard_normal((2, field.num_levels))
    out = []
    for s, (u, tab) in enumerate((("bid", coeffs.bid), ("ask", coeffs.ask))):
        x = field.bid if s == 0 else field.ask
        lap = -2.0 * x
        lap[:-1] += x[1:]
        lap[1:] += x[:-1]
        drift = (tab.limit_base + tab.limit_slope * x) \
            - (tab.cancel_base + tab.cancel_slope * x)
        sigma = tab.sigma_base + tab.sigma_slope * x
        nxt = x + tab.smoothing * params.lap_gain * lap \
            + params.dt * drift + params.noise_gain * sigma * noise[s]
        out.append(np.maximum(nxt, 0.0))
    if not (np.all(np.isfinite(out[0])) and np.all(np.isfinite(out[1]))):
        raise NumericalBlowupError("macro field became non-finite")
    return MacroField(bid=out[0], ask=out[1], price=field.price,
                      step_index=field.step_index + 1)


def _macro_core(ub, ua, drift_b, drift_sb, sig_b, sig_sb,
                drift_a, drift_sa, sig_a, sig_sa, alpha_b, alpha_a,
                horizon, num_space, num_steps, gamma, delta, win_w,
                eps_bins, regen_shift, seed, snap_every):
    """Full scheme loop; numba-compatible (vectorized space ops)."""
    np.random.seed(seed)
    L = ub.shape[0]
    dt = horizon / num_steps
    lam_b = alpha_b * horizon * num_space ** 2 / num_steps
    lam_a = alpha_a * horizon * num_space ** 2 / num_steps
    gain = math.sqrt(horizon * num_space / num_steps)
    dx = 1.0 / num_space

    max_jumps = num_steps
    jump_steps = np.empty(max_jumps, dtype=np.int64)
    jump_dirs = np.empty(max_jumps, dtype=np.int8)
    n_jumps = 0

    n_snaps = num_steps // snap_every if snap_every > 0 else 0
    snaps_b = np.zeros((n_snaps, L))
    snaps_a = np.zeros((n_snaps, L))
    sum_b = np.zeros(L)
    sum_a = np.zeros(L)

    full = int(win_w * num_space + 1e-12)
    if full > num_space:
        full = num_space
    remw = win_w - full * dx
    frac = remw * num_space

    status = 0
    for j in range(num_steps):
        # price update first
        mass = 0.0
        prev = 0.0
        for i in range(1, full + 1):
            cur = ub[i - 1] - ua[i - 1] if i <= L else 0.0
            mass += 0.5 * (prev + cur) * dx
            prev = cur
        if remw > 1e-12 and full < num_space:
            nxt = ub[full] - ua[full] if full < L else 0.0
            v_end = prev * (1.0 - frac) + nxt * frac
            mass += 0.5 * (prev + v_end) * remw
        pos = mass if mass > 0.0 else 0.0
        neg = -mass if mass < 0.0 else 0.0
        pi_plus = (gamma * pos + delta) * dt
        pi_minus = (gamma * neg + delta) * dt
        if pi_plus + pi_minus > 1.0:
            status = 1
            break
        y = np.random.random()
        if y < pi_plus + pi_minus:
            up = y < pi_plus
            jump_steps[n_jumps] = j
            jump_dirs[n_jumps] = 1 if up else -1
            n_jumps += 1
            if regen_shift:
                k = eps_bins if eps_bins < L else L
                nb = np.zeros(L)
                na = np.zeros(L)
                if up:
                    nb[k:] = ub[:L - k]
                    na[:L - k] = ua[k:]
                else:
                    nb[:L - k] = ub[k:]
                    na[k:] = ua[:L - k]
                ub = nb
                ua = na

        noise = np.random.standard_normal(2 * L)
        lap = -2.0 * ub
        lap[:L - 1] += ub[1:]
        lap[1:] += ub[:L - 1]
        nb = ub + lam_b * lap + dt * (drift_b + drift_sb * ub) \
            + gain * (sig_b + sig_sb * ub) * noise[:L]
        lap = -2.0 * ua
        lap[:L - 1] += ua[1:]
        lap[1:] += ua[:L - 1]
        na = ua + lam_a * lap + dt * (drift_a + drift_sa * ua) \
            + gain * (sig_a + sig_sa * ua) * noise[L:]
        ub = np.maximum(nb, 0.0)
        ua = np.maximum(na, 0.0)

        sum_b += ub
        sum_a += ua
        if snap_every > 0 and (j + 1) % snap_every == 0:
            idx = (j + 1) // snap_every - 1
            if idx < n_snaps:
                snaps_b[idx] = ub
                snaps_a[idx] = ua

    finite = np.all(np.isfinite(ub)) and np.all(np.isfinite(ua))
    if not finite:
        status = 2
    return (status, ub, ua, jump_steps[:n_jumps], jump_dirs[:n_jumps],
            sum_b, sum_a, snaps_b, snaps_a)


_macro_core_jit = njit(cache=True)(_macro_core)


@dataclass
class MacroResult:
    params: SchemeParams
    grid: GridSpec
    initial_price: float
    jump_times: np.ndarray
    jump_dirs: np.ndarray
    snapshot_times: np.ndarray
    snapshot_bid: np.ndarray
    snapshot_ask: np.ndarray
    avg_bid: np.ndarray
    avg_ask: np.ndarray
    terminal: MacroField

    @property
    def num_jumps(self) -> int:
        return self.jump_times.shape[0]

    @property
    def quadratic_variation(self) -> float:
        """Realized price QV in dollars^2; jumps are single-epsilon so this
        is exactly eps^2 times the jump count."""
        return self.grid.jump_size ** 2 * self.num_jumps

    def price_series(self):
        """(times, prices) sampled at start, every jump, and the horizon."""
        times = np.concatenate(([0.0], self.jump_times, [self.params.horizon]))
        prices = np.concatenate(
            ([self.initial_price],
             self.initial_price + self.grid.jump_size * np.cumsum(self.jump_dirs),
             [self.terminal.price]))
        return times, prices


def simulate_macro(init: MacroField, coeffs: CoefficientSet,
                   spec: PriceChangeSpec, params: SchemeParams,
                   seed: int = 0, grid: Optional[GridSpec] = None,
                   rule: Optional[RegenerationRule] = None,
                   snapshot_every: Optional[int] = None) -> MacroResult:
    """Run the full scheme: M iterations of price update then field step."""
    grid = grid or GridSpec(num_ticks=params.num_space)
    rule = rule or RegenerationRule(variant="shift", shift_bins=grid.jump_bins)
    if rule.variant == "custom":
        raise ConfigurationError("custom regeneration is not supported by "
                                 "the macro kernel")
    if init.num_levels != params.num_space - 1:
        raise ConfigurationError("initial field length must be N-1")
    params.check_stability(max(coeffs.bid.smoothing, coeffs.ask.smoothing))
    if snapshot_every is None:
        snapshot_every = max(params.num_steps // 5, 1)

    b, a = coeffs.bid, coeffs.ask
    res = _macro_core_jit(
        init.bid.copy(), init.ask.copy(),
        b.limit_base - b.cancel_base, b.limit_slope - b.cancel_slope,
        b.sigma_base, b.sigma_slope,
        a.limit_base - a.cancel_base, a.limit_slope - a.cancel_slope,
        a.sigma_base, a.sigma_slope,
        b.smoothing, a.smoothing,
        float(params.horizon), params.num_space, params.num_steps,
        spec.gamma, spec.delta, spec.window_width,
        grid.jump_bins, rule.variant == "shift",
        int(seed) & 0x7FFFFFFF, int(snapshot_every))
    status, ub, ua, jump_steps, jump_dirs, sum_b, sum_a, snaps_b, snaps_a = res
    if status == 1:
        raise ConfigurationError("time step too coarse: pi+ + pi- > 1")
    if status == 2:
        raise NumericalBlowupError("macro field became non-finite")

    dt = params.dt
    price = init.price + grid.jump_size * float(np.sum(jump_dirs))
    n_snaps = snaps_b.shape[0]
    snap_times = dt * snapshot_every * np.arange(1, n_snaps + 1)
    terminal = MacroField(bid=ub, ask=ua, price=price,
                          step_index=params.num_steps)
    return MacroResult(
        params=params, grid=grid, initial_price=init.price,
        jump_times=jump_steps * dt, jump_dirs=jump_dirs,
        snapshot_times=snap_times, snapshot_bid=snaps_b, snapshot_ask=snaps_a,
        avg_bid=sum_b / params.num_steps, avg_ask=sum_a / params.num_steps,
        terminal=terminal)
