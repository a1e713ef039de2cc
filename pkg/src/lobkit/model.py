"""Shared domain types: grids, coefficients, price-change rates, regeneration.

Volume profiles live on a relative tick grid with interior levels
``1..N-1``; level ``i`` maps to the spatial position ``i/N`` on ``[0, 1]``
with both endpoints pinned to zero.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from .errors import ConfigurationError

SIDES = ("bid", "ask")
UP = "u"
DOWN = "d"


@dataclass(frozen=True)
class GridSpec:
    """Relative price grid: N ticks, interior volume levels 1..N-1."""

    num_ticks: int
    tick_size: float = 0.01
    jump_size: float = 0.01

    def __post_init__(self):
        if self.num_ticks < 2:
            raise ConfigurationError("num_ticks must be >= 2")
        if self.tick_size <= 0:
            raise ConfigurationError("tick_size must be positive")
        if self.jump_size <= 0:
            raise ConfigurationError("jump_size must be positive")
        ratio = self.jump_size / self.tick_size
        if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
            raise ConfigurationError(
                "jump_size must be a positive integer multiple of tick_size"
            )

    @property
    def num_levels(self) -> int:
        return self.num_ticks - 1

    @property
    def jump_bins(self) -> int:
        """Price jump expressed in grid bins."""
        return int(round(self.jump_size / self.tick_size))


@dataclass(frozen=True)
class SideCoefficients:
    """Tabulated-affine volatility and order-flow rates for one book side.

    Each function of (level, volume) is stored as a per-level base value
    plus a per-level slope in the volume argument, so Lipschitz continuity
    in volume holds by construction.
    """

    sigma_base: np.ndarray
    sigma_slope: np.ndarray
    limit_base: np.ndarray
    limit_slope: np.ndarray
    cancel_base: np.ndarray
    cancel_slope: np.ndarray
    smoothing: float

    def __post_init__(self):
        arrays = {}
        for name in ("sigma_base", "sigma_slope", "limit_base",
                     "limit_slope", "cancel_base", "cancel_slope"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if arr.ndim != 1:
                raise ConfigurationError(f"{name} must be one-dimensional")
            arrays[name] = arr
            object.__setattr__(self, name, arr)
        lengths = {a.shape[0] for a in arrays.values()}
        if len(lengths) != 1:
            raise ConfigurationError("coefficient tables must share one length")
        for name in ("sigma_base", "limit_base", "cancel_base"):
            if np.any(arrays[name] < 0):
                raise ConfigurationError(f"{name} must be nonnegative")
        if self.smoothing <= 0:
            raise ConfigurationError("smoothing rate must be positive")

    @property
    def num_levels(self) -> int:
        return self.sigma_base.shape[0]

    def sigma(self, level, u, mid=None):
        return self.sigma_base[level - 1] + self.sigma_slope[level - 1] * u

    def limit_rate(self, level, u, mid=None):
        return self.limit_base[level - 1] + self.limit_slope[level - 1] * u

    def cancel_rate(self, level, u, mid=None):
        return self.cancel_base[level - 1] + self.cancel_slope[level - 1] * u

    def drift(self, level, u, mid=None):
        """h = limit rate minus cancel rate."""
        return self.limit_rate(level, u, mid) - self.cancel_rate(level, u, mid)


@dataclass(frozen=True)
class CoefficientSet:
    bid: SideCoefficients
    ask: SideCoefficients

    def __post_init__(self):
        if self.bid.num_levels != self.ask.num_levels:
            raise ConfigurationError("bid/ask tables must share one length")

    @property
    def num_levels(self) -> int:
        return self.bid.num_levels

    def side(self, k: str) -> SideCoefficients:
        if k == "bid":
            return self.bid
        if k == "ask":
            return self.ask
        raise ConfigurationError(f"unknown side {k!r}")

    @classmethod
    def constant(cls, num_levels, sigma=1.0, limit=0.0, cancel=0.0,
                 smoothing=1.0, sigma_slope=0.0, limit_slope=0.0,
                 cancel_slope=0.0):
        """Level-independent coefficients, identical on both sides."""
        full = lambda v: np.full(num_levels, float(v))
        side = SideCoefficients(
            sigma_base=full(sigma), sigma_slope=full(sigma_slope),
            limit_base=full(limit), limit_slope=full(limit_slope),
            cancel_base=full(cancel), cancel_slope=full(cancel_slope),
            smoothing=smoothing)
        return cls(bid=side, ask=side)

    @classmethod
    def symmetric(cls, sigma_base, limit_base, cancel_base, smoothing,
                  sigma_slope=None, limit_slope=None, cancel_slope=None):
        """Same tables on both sides."""
        sigma_base = np.asarray(sigma_base, dtype=np.float64)
        zeros = np.zeros_like(sigma_base)
        side = SideCoefficients(
            sigma_base=sigma_base,
            sigma_slope=zeros if sigma_slope is None else sigma_slope,
            limit_base=np.asarray(limit_base, dtype=np.float64),
            limit_slope=zeros if limit_slope is None else limit_slope,
            cancel_base=np.asarray(cancel_base, dtype=np.float64),
            cancel_slope=zeros if cancel_slope is None else cancel_slope,
            smoothing=smoothing)
        return cls(bid=side, ask=side)


@dataclass(frozen=True)
class PriceChangeSpec:
    """Imbalance-driven price jump intensities.

    lambda_u = gamma * max(window imbalance mass, 0) + delta, and
    symmetrically for lambda_d.  ``window_width`` is measured on [0, 1].
    """

    gamma: float
    delta: float
    window_width: float

    def __post_init__(self):
        if self.gamma < 0:
            raise ConfigurationError("gamma must be nonnegative")
        if self.delta <= 0:
            raise ConfigurationError("delta must be positive")
        if not (0 < self.window_width <= 1):
            raise ConfigurationError("window_width must lie in (0, 1]")


@dataclass(frozen=True)
class RegenerationRule:
    """Post-price-change profile rule: shift, identity or a custom sampler."""

    variant: str = "shift"
    shift_bins: int = 1
    sampler: Optional[Callable] = None

    def __post_init__(self):
        if self.variant not in ("shift", "identity", "custom"):
            raise ConfigurationError(f"unknown regeneration variant {self.variant!r}")
        if self.variant == "shift" and self.shift_bins < 1:
            raise ConfigurationError("shift_bins must be >= 1")
        if self.variant == "custom" and self.sampler is None:
            raise ConfigurationError("custom regeneration needs a sampler")


@dataclass(frozen=True)
class DiscreteBook:
    """Volume profiles on the interior levels plus the mid price.

    Micro-scale books carry integer volumes (with scale index ``n``);
    meso-scale books carry nonnegative reals.
    """

    bid: np.ndarray
    ask: np.ndarray
    mid: float
    scale: str = "meso"
    n: int = 1

    def __post_init__(self):
        bid = np.asarray(self.bid)
        ask = np.asarray(self.ask)
        if self.scale == "micro":
            bid = bid.astype(np.int64)
            ask = ask.astype(np.int64)
        else:
            bid = bid.astype(np.float64)
            ask = ask.astype(np.float64)
        if bid.shape != ask.shape or bid.ndim != 1:
            raise ConfigurationError("bid/ask profiles must be 1-d and equal length")
        if np.any(bid < 0) or np.any(ask < 0):
            raise ConfigurationError("volumes must be nonnegative")
        if self.scale not in ("micro", "meso"):
            raise ConfigurationError(f"unknown scale {self.scale!r}")
        if self.n < 1:
            raise ConfigurationError("scale index n must be >= 1")
        object.__setattr__(self, "bid", bid)
        object.__setattr__(self, "ask", ask)

    @property
    def num_levels(self) -> int:
        return self.bid.shape[0]

    @property
    def num_ticks(self) -> int:
        return self.num_levels + 1

    def with_profiles(self, bid, ask, mid=None):
        return replace(self, bid=bid, ask=ask,
                       mid=self.mid if mid is None else mid)


@dataclass(frozen=True)
class PriceEvent:
    time: float
    direction: str
    new_mid: float
    pre_bid: np.ndarray
    pre_ask: np.ndarray


@dataclass
class PriceClock:
    """Accumulated intensity integrals racing unit-exponential thresholds."""

    a_u: float
    a_d: float
    y_u: float
    y_d: float

    @classmethod
    def fresh(cls, rng: np.random.Generator) -> "PriceClock":
        return cls(0.0, 0.0, rng.exponential(), rng.exponential())

    def reset(self, rng: np.random.Generator) -> None:
        self.a_u = 0.0
        self.a_d = 0.0
        self.y_u = rng.exponential()
        self.y_d = rng.exponential()


def window_mass(values, num_ticks: int, width: float) -> float:
    """Integral over [0, width] of the piecewise-linear profile through
    (i/N, v_i) with the pinned zeros at both endpoints."""
    values = np.asarray(values, dtype=np.float64)
    n_lev = values.shape[0]
    if n_lev != num_ticks - 1:
        raise ConfigurationError("profile length must equal num_ticks - 1")
    if not (0 < width <= 1):
        raise ConfigurationError("window wider than the domain")
    nodes = np.concatenate(([0.0], values, [0.0]))
    dx = 1.0 / num_ticks
    full = int(np.floor(width * num_ticks + 1e-12))
    full = min(full, num_ticks)
    total = 0.0
    for j in range(1, full + 1):
        total += 0.5 * (nodes[j - 1] + nodes[j]) * dx
    rem = width - full * dx
    if rem > 1e-12 and full < num_ticks:
        frac = rem / dx
        v_end = nodes[full] * (1 - frac) + nodes[full + 1] * frac
        total += 0.5 * (nodes[full] + v_end) * rem
    return total


def theta_rates(bid, ask, num_ticks: int, spec: PriceChangeSpec):
    """Upward/downward price-change intensities for the given profiles."""
    diff = np.asarray(bid, dtype=np.float64) - np.asarray(ask, dtype=np.float64)
    mass = window_mass(diff, num_ticks, spec.window_width)
    lam_u = spec.gamma * max(mass, 0.0) + spec.delta
    lam_d = spec.gamma * max(-mass, 0.0) + spec.delta
    return lam_u, lam_d


def theta_rates_book(book: DiscreteBook, spec: PriceChangeSpec):
    """theta_rates on a book; micro volumes are rescaled by 1/sqrt(n)."""
    if book.scale == "micro":
        root = np.sqrt(book.n)
        return theta_rates(book.bid / root, book.ask / root,
                           book.num_ticks, spec)
    return theta_rates(book.bid, book.ask, book.num_ticks, spec)


def shift_profiles(bid, ask, direction: str, k: int = 1):
    """Shift both profiles by k bins following a price change.

    Upward move: the bid profile shifts away from the mid with zeroed bins
    entering next to the mid; the ask profile shifts toward the mid with
    its far-boundary bins zeroed.  Downward is the mirror image.
    """
    bid = np.asarray(bid)
    ask = np.asarray(ask)
    new_bid = np.zeros_like(bid)
    new_ask = np.zeros_like(ask)
    n = bid.shape[0]
    k = min(k, n)
    if direction == UP:
        new_bid[k:] = bid[:n - k]
        new_ask[:n - k] = ask[k:]
    elif direction == DOWN:
        new_bid[:n - k] = bid[k:]
        new_ask[k:] = ask[:n - k]
    else:
        raise ConfigurationError(f"unknown direction {direction!r}")
    return new_bid, new_ask


def regenerate(book: DiscreteBook, direction: str, rule: RegenerationRule,
               rng: Optional[np.random.Generator] = None) -> DiscreteBook:
    """Apply the regeneration rule; the mid is updated by the caller."""
    if rule.variant == "identity":
        return book
    if rule.variant == "shift":
        new_bid, new_ask = shift_profiles(book.bid, book.ask, direction,
                                          rule.shift_bins)
        return book.with_profiles(new_bid, new_ask)
    new_bid, new_ask = rule.sampler(book.bid, book.ask, direction, rng)
    return book.with_profiles(np.maximum(new_bid, 0), np.maximum(new_ask, 0))


def eval_rates_micro(book: DiscreteBook, coeffs: CoefficientSet, side: str,
                     level: int, n: Optional[int] = None):
    """Microscopic event rates (add, remove, move-left, move-right) at one
    level, with the scale-n coefficient rescaling applied."""
    if not (1 <= level <= book.num_levels):
        raise ConfigurationError(f"level {level} out of range")
    if n is None:
        n = book.n
    tab = coeffs.side(side)
    z = float(book.bid[level - 1] if side == "bid" else book.ask[level - 1])
    root = np.sqrt(n)
    u = z / root
    sig = tab.sigma(level, u)
    half_sig2 = 0.5 * sig * sig
    f = max(tab.limit_rate(level, u), 0.0) / root
    g = max(tab.cancel_rate(level, u), 0.0) / root
    lam_add = half_sig2 * (2.0 if z == 0 else 1.0) + f
    lam_remove = (half_sig2 + g) if z >= 1 else 0.0
    lam_move = (tab.smoothing / n) * z
    return lam_add, lam_remove, lam_move, lam_move
