"""Event-driven simulator of the microscopic order book.

The event loop is an exact Gillespie race over all level clocks plus the
two price clocks (which are piecewise constant between book events, so
folding them into the race introduces no thinning error).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .accel import njit
from .errors import RunawayRateError
from .model import (
    UP, DOWN, CoefficientSet, DiscreteBook, GridSpec, PriceChangeSpec,
    PriceClock, PriceEvent, RegenerationRule, eval_rates_micro, regenerate,
    theta_rates_book,
)

# event kind codes used in logs
ADD, REMOVE, MOVE_LEFT, MOVE_RIGHT = 0, 1, 2, 3
KIND_NAMES = ("add", "remove", "move-left", "move-right")

_STATUS_OK = 0
_STATUS_FROZEN = 1
_STATUS_CAP = 2

DEFAULT_EVENT_CAP = 100_000_000


@dataclass
class MicroPath:
    """One realized trajectory of the dynamic microscopic model."""

    n: int
    event_times: np.ndarray
    event_side: np.ndarray      # 0 bid, 1 ask
    event_level: np.ndarray     # 1-based
    event_kind: np.ndarray
    snapshot_times: np.ndarray
    snapshot_bid: np.ndarray
    snapshot_ask: np.ndarray
    price_events: List[PriceEvent] = field(default_factory=list)
    terminal: Optional[DiscreteBook] = None
    frozen: bool = False

    @property
    def num_events(self) -> int:
        return self.event_times.shape[0]


def _micro_core(bid, ask, sb, ss, fb, fs, gb, gs, alpha_b, alpha_a,
                n_scale, gamma, delta, win_w, num_ticks, eps_bins,
                regen_shift, horizon, seed, record_events, snap_times,
                event_cap, track_prices):
    """Run the static/dynamic micro model; numba-compatible.

    Coefficient tables are (2, L) arrays indexed by side (0 bid, 1 ask).
    Returns the terminal state plus event/price/snapshot logs.
    """
    np.random.seed(seed)
    L = bid.shape[0]
    root_n = math.sqrt(n_scale)
    vols = np.empty((2, L), dtype=np.int64)
    vols[0] = bid
    vols[1] = ask
    alphas = np.empty(2)
    alphas[0] = alpha_b / n_scale
    alphas[1] = alpha_a / n_scale

    rates = np.empty((2, L, 4))

    cap_ev = 1024 if record_events else 1
    ev_t = np.empty(cap_ev)
    ev_side = np.empty(cap_ev, dtype=np.int8)
    ev_level = np.empty(cap_ev, dtype=np.int16)
    ev_kind = np.empty(cap_ev, dtype=np.int8)
    n_ev = 0
    total_ev = 0

    cap_pe = 64
    pe_t = np.empty(cap_pe)
    pe_dir = np.empty(cap_pe, dtype=np.int8)
    pe_prebid = np.empty((cap_pe, L), dtype=np.int64)
    pe_preask = np.empty((cap_pe, L), dtype=np.int64)
    n_pe = 0

    n_snap = snap_times.shape[0]
    snap_bid = np.zeros((n_snap, L), dtype=np.int64)
    snap_ask = np.zeros((n_snap, L), dtype=np.int64)
    snap_idx = 0

    t = 0.0
    status = _STATUS_OK
    dx = 1.0 / num_ticks

    while True:
        # level rates, with the scale-n coefficient rescaling
        total_book = 0.0
        for s in range(2):
            for l in range(L):
                z = vols[s, l]
                u = z / root_n
                sig = sb[s, l] + ss[s, l] * u
                half = 0.5 * sig * sig
                fv = fb[s, l] + fs[s, l] * u
                if fv < 0.0:
                    fv = 0.0
                gv = gb[s, l] + gs[s, l] * u
                if gv < 0.0:
                    gv = 0.0
                add = half + fv / root_n
                if z == 0:
                    add += half
                rem = half + gv / root_n if z >= 1 else 0.0
                mv = alphas[s] * z
                rates[s, l, 0] = add
                rates[s, l, 1] = rem
                rates[s, l, 2] = mv
                rates[s, l, 3] = mv
                total_book += add + rem + 2.0 * mv

        lam_u = 0.0
        lam_d = 0.0
        if track_prices:
            # trapezoid imbalance mass over [0, win_w] of (bid-ask)/sqrt(n)
            mass = 0.0
            full = int(win_w * num_ticks + 1e-12)
            if full > num_ticks:
                full = num_ticks
            prev = 0.0
            for j in range(1, full + 1):
                cur = (vols[0, j - 1] - vols[1, j - 1]) / root_n if j <= L else 0.0
                mass += 0.5 * (prev + cur) * dx
                prev = cur
            remw = win_w - full * dx
            if remw > 1e-12 and full < num_ticks:
                nxt = (vols[0, full] - vols[1, full]) / root_n if full < L else 0.0
                frac = remw * num_ticks
                v_end = prev * (1.0 - frac) + nxt * frac
                mass += 0.5 * (prev + v_end) * remw
            pos = mass if mass > 0.0 else 0.0
            neg = -mass if mass < 0.0 else 0.0
            lam_u = (gamma * pos + delta) / n_scale
            lam_d = (gamma * neg + delta) / n_scale

        total = total_book + lam_u + lam_d
        if total <= 0.0:
            status = _STATUS_FROZEN
            break

        dt = np.random.exponential() / total
        t_next = t + dt
        while snap_idx < n_snap and snap_times[snap_idx] <= t_next \
                and snap_times[snap_idx] <= horizon:
            for l in range(L):
                snap_bid[snap_idx, l] = vols[0, l]
                snap_ask[snap_idx, l] = vols[1, l]
            snap_idx += 1
        if t_next >= horizon:
            t = horizon
            break
        t = t_next

        pick = np.random.random() * total
        if pick >= total_book:
            # price change; ties go upward
            up = pick < total_book + lam_u or lam_d <= 0.0
            if n_pe >= cap_pe:
                new_t = np.empty(2 * cap_pe)
                new_t[:cap_pe] = pe_t
                pe_t = new_t
                new_d = np.empty(2 * cap_pe, dtype=np.int8)
                new_d[:cap_pe] = pe_dir
                pe_dir = new_d
                new_b = np.empty((2 * cap_pe, L), dtype=np.int64)
                new_b[:cap_pe] = pe_prebid
                pe_prebid = new_b
                new_a = np.empty((2 * cap_pe, L), dtype=np.int64)
                new_a[:cap_pe] = pe_preask
                pe_preask = new_a
                cap_pe *= 2
            pe_t[n_pe] = t
            pe_dir[n_pe] = 1 if up else -1
            for l in range(L):
                pe_prebid[n_pe, l] = vols[0, l]
                pe_preask[n_pe, l] = vols[1, l]
            n_pe += 1
            if regen_shift:
                k = eps_bins
                if k > L:
                    k = L
                if up:
                    for l in range(L - 1, k - 1, -1):
                        vols[0, l] = vols[0, l - k]
                    for l in range(k):
                        vols[0, l] = 0
                    for l in range(L - k):
                        vols[1, l] = vols[1, l + k]
                    for l in range(L - k, L):
                        vols[1, l] = 0
                else:
                    for l in range(L - k):
                        vols[0, l] = vols[0, l + k]
                    for l in range(L - k, L):
                        vols[0, l] = 0
                    for l in range(L - 1, k - 1, -1):
                        vols[1, l] = vols[1, l - k]
                    for l in range(k):
                        vols[1, l] = 0
        else:
            # book event: locate side/level/kind by cumulative scan
            acc = 0.0
            s_hit = 0
            l_hit = 0
            k_hit = 0
            done = False
            for s in range(2):
                if done:
                    break
                for l in range(L):
                    if done:
                        break
                    for k in range(4):
                        acc += rates[s, l, k]
                        if pick < acc:
                            s_hit = s
                            l_hit = l
                            k_hit = k
                            done = True
                            break
            if not done:
                s_hit = 1
                l_hit = L - 1
                k_hit = 3
            if k_hit == ADD:
                vols[s_hit, l_hit] += 1
            elif k_hit == REMOVE:
                vols[s_hit, l_hit] -= 1
            elif k_hit == MOVE_LEFT:
                vols[s_hit, l_hit] -= 1
                if l_hit > 0:
                    vols[s_hit, l_hit - 1] += 1
            else:
                vols[s_hit, l_hit] -= 1
                if l_hit < L - 1:
                    vols[s_hit, l_hit + 1] += 1
            if record_events:
                if n_ev >= cap_ev:
                    new_t = np.empty(2 * cap_ev)
                    new_t[:cap_ev] = ev_t
                    ev_t = new_t
                    new_s = np.empty(2 * cap_ev, dtype=np.int8)
                    new_s[:cap_ev] = ev_side
                    ev_side = new_s
                    new_l = np.empty(2 * cap_ev, dtype=np.int16)
                    new_l[:cap_ev] = ev_level
                    ev_level = new_l
                    new_k = np.empty(2 * cap_ev, dtype=np.int8)
                    new_k[:cap_ev] = ev_kind
                    ev_kind = new_k
                    cap_ev *= 2
                ev_t[n_ev] = t
                ev_side[n_ev] = s_hit
                ev_level[n_ev] = l_hit + 1
                ev_kind[n_ev] = k_hit
                n_ev += 1

        total_ev += 1
        if total_ev > event_cap:
            status = _STATUS_CAP
            break

    while snap_idx < n_snap and snap_times[snap_idx] <= horizon:
        for l in range(L):
            snap_bid[snap_idx, l] = vols[0, l]
            snap_ask[snap_idx, l] = vols[1, l]
        snap_idx += 1

    return (status, t, vols[0].copy(), vols[1].copy(),
            ev_t[:n_ev], ev_side[:n_ev], ev_level[:n_ev], ev_kind[:n_ev],
            pe_t[:n_pe], pe_dir[:n_pe], pe_prebid[:n_pe], pe_preask[:n_pe],
            snap_bid, snap_ask, total_ev)


_micro_core_jit = njit(cache=True)(_micro_core)


def _side_tables(coeffs: CoefficientSet):
    b, a = coeffs.bid, coeffs.ask
    stack = lambda x, y: np.vstack((x, y))
    return (stack(b.sigma_base, a.sigma_base), stack(b.sigma_slope, a.sigma_slope),
            stack(b.limit_base, a.limit_base), stack(b.limit_slope, a.limit_slope),
            stack(b.cancel_base, a.cancel_base), stack(b.cancel_slope, a.cancel_slope))


def step_micro(book: DiscreteBook, coeffs: CoefficientSet,
               spec: Optional[PriceChangeSpec], clock: Optional[PriceClock],
               rng: np.random.Generator,
               rule: Optional[RegenerationRule] = None,
               jump_size: float = 0.01):
    """Advance the book by one event.

    Returns (book', dt, price_event_or_None).  A frozen book (all rates
    zero) is signalled with dt = inf and an unchanged book.
    """
    L = book.num_levels
    level_rates = np.empty((2, L, 4))
    for s, side in enumerate(("bid", "ask")):
        for level in range(1, L + 1):
            level_rates[s, level - 1] = eval_rates_micro(book, coeffs, side, level)
    total_book = level_rates.sum()

    lam_u = lam_d = 0.0
    if spec is not None:
        lam_u, lam_d = theta_rates_book(book, spec)
        lam_u /= book.n
        lam_d /= book.n

    if total_book <= 0 and lam_u <= 0 and lam_d <= 0:
        return book, math.inf, None

    dt_book = rng.exponential() / total_book if total_book > 0 else math.inf
    if clock is not None:
        dt_u = (clock.y_u - clock.a_u) / lam_u if lam_u > 0 else math.inf
        dt_d = (clock.y_d - clock.a_d) / lam_d if lam_d > 0 else math.inf
    else:
        dt_u = rng.exponential() / lam_u if lam_u > 0 else math.inf
        dt_d = rng.exponential() / lam_d if lam_d > 0 else math.inf

    dt = min(dt_book, dt_u, dt_d)
    if clock is not None:
        clock.a_u += lam_u * dt
        clock.a_d += lam_d * dt

    if min(dt_u, dt_d) <= dt_book:
        # ties between the two price clocks resolve upward
        direction = UP if dt_u <= dt_d else DOWN
        new_mid = book.mid + (jump_size if direction == UP else -jump_size)
        event = PriceEvent(time=dt, direction=direction, new_mid=new_mid,
                           pre_bid=book.bid.copy(), pre_ask=book.ask.copy())
        new_book = regenerate(book, direction,
                              rule or RegenerationRule(variant="shift"), rng)
        new_book = new_book.with_profiles(new_book.bid, new_book.ask, mid=new_mid)
        if clock is not None:
            clock.reset(rng)
        return new_book, dt, event

    flat = level_rates.ravel()
    idx = np.searchsorted(np.cumsum(flat), rng.random() * total_book)
    idx = min(idx, flat.shape[0] - 1)
    s, l, kind = np.unravel_index(idx, (2, L, 4))
    vols = np.vstack((book.bid, book.ask)).astype(np.int64)
    if kind == ADD:
        vols[s, l] += 1
    elif kind == REMOVE:
        vols[s, l] -= 1
    elif kind == MOVE_LEFT:
        vols[s, l] -= 1
        if l > 0:
            vols[s, l - 1] += 1
    else:
        vols[s, l] -= 1
        if l < L - 1:
            vols[s, l + 1] += 1
    return book.with_profiles(vols[0], vols[1]), dt, None


def simulate_micro(book: DiscreteBook, coeffs: CoefficientSet,
                   spec: Optional[PriceChangeSpec], horizon: float,
                   n: Optional[int] = None, seed: int = 0,
                   rule: Optional[RegenerationRule] = None,
                   grid: Optional[GridSpec] = None,
                   snapshot_times=None, record_events: bool = True,
                   event_cap: int = DEFAULT_EVENT_CAP) -> MicroPath:
    """Run the dynamic microscopic model to the given (microscopic) time
    horizon with the scale-n coefficient rescaling applied."""
    if n is None:
        n = book.n
    rule = rule or RegenerationRule(variant="shift")
    grid = grid or GridSpec(num_ticks=book.num_ticks)
    snap_times = np.asarray(
        [] if snapshot_times is None else snapshot_times, dtype=np.float64)
    sb, ss, fb, fs, gb, gs = _side_tables(coeffs)

    track = spec is not None
    gamma = spec.gamma if track else 0.0
    delta = spec.delta if track else 0.0
    win_w = spec.window_width if track else 1.0

    if rule.variant == "custom":
        return _simulate_micro_python(book, coeffs, spec, horizon, n, seed,
                                      rule, grid, snap_times, record_events,
                                      event_cap)

    res = _micro_core_jit(
        book.bid.astype(np.int64), book.ask.astype(np.int64),
        sb, ss, fb, fs, gb, gs,
        coeffs.bid.smoothing, coeffs.ask.smoothing,
        float(n), gamma, delta, win_w, book.num_ticks, grid.jump_bins,
        rule.variant == "shift", float(horizon), int(seed) & 0x7FFFFFFF,
        record_events, snap_times, event_cap, track)
    (status, t_end, bid, ask, ev_t, ev_side, ev_level, ev_kind,
     pe_t, pe_dir, pe_prebid, pe_preask, snap_bid, snap_ask, total_ev) = res

    if status == _STATUS_CAP:
        raise RunawayRateError(
            f"event cap {event_cap} exceeded at t={t_end:.6g} "
            f"({total_ev} events)")

    mid = book.mid
    price_events = []
    for i in range(pe_t.shape[0]):
        direction = UP if pe_dir[i] > 0 else DOWN
        mid += grid.jump_size if direction == UP else -grid.jump_size
        price_events.append(PriceEvent(
            time=pe_t[i], direction=direction, new_mid=mid,
            pre_bid=pe_prebid[i], pre_ask=pe_preask[i]))

    terminal = DiscreteBook(bid=bid, ask=ask, mid=mid, scale="micro", n=n)
    return MicroPath(
        n=n, event_times=ev_t, event_side=ev_side, event_level=ev_level,
        event_kind=ev_kind, snapshot_times=snap_times,
        snapshot_bid=snap_bid, snapshot_ask=snap_ask,
        price_events=price_events, terminal=terminal,
        frozen=status == _STATUS_FROZEN)


def _simulate_micro_python(book, coeffs, spec, horizon, n, seed, rule, grid,
                           snap_times, record_events, event_cap):
    """Reference loop used for custom regeneration samplers."""
    rng = np.random.default_rng(seed)
    book = DiscreteBook(bid=book.bid, ask=book.ask, mid=book.mid,
                        scale="micro", n=n)
    clock = PriceClock.fresh(rng) if spec is not None else None
    t = 0.0
    events = []
    price_events = []
    snaps_b, snaps_a = [], []
    snap_idx = 0
    total_ev = 0
    frozen = False
    while True:
        new_book, dt, pe = step_micro(book, coeffs, spec, clock, rng,
                                      rule=rule, jump_size=grid.jump_size)
        if math.isinf(dt):
            frozen = True
            break
        t_next = t + dt
        while snap_idx < snap_times.shape[0] and snap_times[snap_idx] <= t_next \
                and snap_times[snap_idx] <= horizon:
            snaps_b.append(book.bid.copy())
            snaps_a.append(book.ask.copy())
            snap_idx += 1
        if t_next >= horizon:
            break
        t = t_next
        if pe is not None:
            price_events.append(PriceEvent(
                time=t, direction=pe.direction, new_mid=pe.new_mid,
                pre_bid=pe.pre_bid, pre_ask=pe.pre_ask))
        elif record_events:
            events.append(t)
        book = new_book
        total_ev += 1
        if total_ev > event_cap:
            raise RunawayRateError(f"event cap {event_cap} exceeded")
    while snap_idx < snap_times.shape[0] and snap_times[snap_idx] <= horizon:
        snaps_b.append(book.bid.copy())
        snaps_a.append(book.ask.copy())
        snap_idx += 1
    L = book.num_levels
    return MicroPath(
        n=n, event_times=np.asarray(events),
        event_side=np.zeros(len(events), dtype=np.int8),
        event_level=np.zeros(len(events), dtype=np.int16),
        event_kind=np.zeros(len(events), dtype=np.int8),
        snapshot_times=snap_times,
        snapshot_bid=np.asarray(snaps_b, dtype=np.int64).reshape(-1, L),
        snapshot_ask=np.asarray(snaps_a, dtype=np.int64).reshape(-1, L),
        price_events=price_events, terminal=book, frozen=frozen)


def rescale_path(path: MicroPath, n: Optional[int] = None) -> MicroPath:
    """Apply the diffusive rescaling: times /= n, volumes /= sqrt(n)."""
    if n is None:
        n = path.n
    root = math.sqrt(n)
    terminal = path.terminal
    scaled_terminal = None
    if terminal is not None:
        scaled_terminal = DiscreteBook(
            bid=terminal.bid / root, ask=terminal.ask / root,
            mid=terminal.mid, scale="meso")
    return MicroPath(
        n=n,
        event_times=path.event_times / n,
        event_side=path.event_side, event_level=path.event_level,
        event_kind=path.event_kind,
        snapshot_times=path.snapshot_times / n,
        snapshot_bid=path.snapshot_bid / root,
        snapshot_ask=path.snapshot_ask / root,
        price_events=[PriceEvent(time=pe.time / n, direction=pe.direction,
                                 new_mid=pe.new_mid,
                                 pre_bid=pe.pre_bid / root,
                                 pre_ask=pe.pre_ask / root)
                      for pe in path.price_events],
        terminal=scaled_terminal, frozen=path.frozen)


def scale_initial_profile(profile, n: int) -> np.ndarray:
    """Integer micro initial condition approximating sqrt(n) * profile."""
    return np.rint(np.sqrt(n) * np.asarray(profile, dtype=np.float64)).astype(np.int64)


def micro_terminal_ensemble(book: DiscreteBook, coeffs: CoefficientSet,
                            spec: Optional[PriceChangeSpec], t: float,
                            n: int, paths: int, seed: int = 0,
                            rule: Optional[RegenerationRule] = None,
                            grid: Optional[GridSpec] = None,
                            event_cap: int = DEFAULT_EVENT_CAP):
    """Rescaled terminal profiles over an ensemble of independent runs.

    Returns an array of shape (paths, 2, L): index 1 is bid/ask.
    The micro horizon is n*t so the rescaled paths end at time t.
    """
    seeds = np.random.SeedSequence(seed).generate_state(paths)
    L = book.num_levels
    out = np.empty((paths, 2, L))
    root = math.sqrt(n)
    for p in range(paths):
        path = simulate_micro(book, coeffs, spec, horizon=n * t, n=n,
                              seed=int(seeds[p]), rule=rule, grid=grid,
                              record_events=False, event_cap=event_cap)
        out[p, 0] = path.terminal.bid / root
        out[p, 1] = path.terminal.ask / root
    return out
