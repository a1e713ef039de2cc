"""Model configuration files.

Configs are INI-style key-value files with sections ``grid``,
``coefficients-bid``, ``coefficients-ask``, ``price-change``,
``regeneration`` plus optional ``initial``, ``scheme``, ``meso`` and
``micro`` sections.  Coefficient tables are scalars (broadcast over
levels), comma-separated lists, or ``csv:relative/path`` pointing at a
two-column CSV of (grid position, value).
"""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConfigurationError
from .macro import SchemeParams
from .model import (
    CoefficientSet, GridSpec, PriceChangeSpec, RegenerationRule,
    SideCoefficients,
)


@dataclass(frozen=True)
class MesoParams:
    horizon: float = 1.0
    dt: Optional[float] = None

    def step_size(self) -> float:
        # default dt: horizon / 1e5
        return self.dt if self.dt is not None else self.horizon / 100_000


@dataclass(frozen=True)
class MicroParams:
    scale_n: int = 1
    horizon: float = 1.0
    event_cap: int = 100_000_000


@dataclass(frozen=True)
class ModelConfig:
    grid: GridSpec
    coeffs: CoefficientSet
    price_spec: PriceChangeSpec
    rule: RegenerationRule
    scheme: SchemeParams
    meso: MesoParams
    micro: MicroParams
    init_bid: np.ndarray
    init_ask: np.ndarray
    init_price: float


def _parse_table(raw: str, num_levels: int, base_dir: str) -> np.ndarray:
    raw = raw.strip()
    if raw.startswith("csv:"):
        path = os.path.join(base_dir, raw[4:].strip())
        try:
            data = np.loadtxt(path, delimiter=",", ndmin=2, comments="#")
        except OSError as exc:
            raise ConfigurationError(f"cannot read coefficient CSV {path}: {exc}")
        if data.shape[1] != 2:
            raise ConfigurationError(
                f"coefficient CSV {path} must have two columns")
        values = data[:, 1]
    elif "," in raw:
        values = np.asarray([float(v) for v in raw.split(",") if v.strip()])
    else:
        return np.full(num_levels, float(raw))
    if values.shape[0] != num_levels:
        raise ConfigurationError(
            f"coefficient table has {values.shape[0]} entries, "
            f"expected {num_levels}")
    return values.astype(np.float64)


def _side_from_section(cp, section: str, num_levels: int,
                       base_dir: str) -> SideCoefficients:
    if section not in cp:
        raise ConfigurationError(f"missing config section [{section}]")
    sec = cp[section]
    get = lambda key, default: _parse_table(sec.get(key, default),
                                            num_levels, base_dir)
    try:
        return SideCoefficients(
            sigma_base=get("sigma_base", "0"),
            sigma_slope=get("sigma_slope", "0"),
            limit_base=get("limit_base", "0"),
            limit_slope=get("limit_slope", "0"),
            cancel_base=get("cancel_base", "0"),
            cancel_slope=get("cancel_slope", "0"),
            smoothing=sec.getfloat("smoothing", 1.0))
    except ValueError as exc:
        raise ConfigurationError(f"bad value in [{section}]: {exc}")


def load_model_config(path: str) -> ModelConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    read = cp.read(path)
    if not read:
        raise ConfigurationError(f"cannot read config file {path}")
    base_dir = os.path.dirname(os.path.abspath(path))

    try:
        g = cp["grid"]
        grid = GridSpec(num_ticks=g.getint("num_ticks"),
                        tick_size=g.getfloat("tick_size", 0.01),
                        jump_size=g.getfloat("jump_size", 0.01))
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigurationError(f"bad [grid] section: {exc}")

    num_levels = grid.num_levels
    coeffs = CoefficientSet(
        bid=_side_from_section(cp, "coefficients-bid", num_levels, base_dir),
        ask=_side_from_section(cp, "coefficients-ask", num_levels, base_dir))

    try:
        pc = cp["price-change"]
        window_default = grid.jump_bins / grid.num_ticks
        price_spec = PriceChangeSpec(
            gamma=pc.getfloat("gamma"),
            delta=pc.getfloat("delta"),
            window_width=pc.getfloat("window_width", window_default))
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigurationError(f"bad [price-change] section: {exc}")

    rg = cp["regeneration"] if "regeneration" in cp else {}
    rule = RegenerationRule(
        variant=rg.get("variant", "shift"),
        shift_bins=int(rg.get("shift_bins", grid.jump_bins)))

    sc = cp["scheme"] if "scheme" in cp else {}
    scheme = SchemeParams(
        horizon=float(sc.get("horizon", 60.0)),
        num_space=int(sc.get("num_space", grid.num_ticks)),
        num_steps=int(float(sc.get("num_steps", 1_500_000))),
        allow_unstable=str(sc.get("allow_unstable", "no")).lower()
        in ("1", "true", "yes"))

    ms = cp["meso"] if "meso" in cp else {}
    meso = MesoParams(
        horizon=float(ms.get("horizon", 1.0)),
        dt=float(ms["dt"]) if "dt" in ms else None)

    mi = cp["micro"] if "micro" in cp else {}
    micro = MicroParams(
        scale_n=int(mi.get("scale_n", 1)),
        horizon=float(mi.get("horizon", 1.0)),
        event_cap=int(float(mi.get("event_cap", 100_000_000))))

    ini = cp["initial"] if "initial" in cp else {}
    init_bid = _parse_table(ini.get("bid", "0"), num_levels, base_dir)
    init_ask = _parse_table(ini.get("ask", "0"), num_levels, base_dir)
    init_price = float(ini.get("price", 0.0))
    if np.any(init_bid < 0) or np.any(init_ask < 0):
        raise ConfigurationError("initial profiles must be nonnegative")

    return ModelConfig(grid=grid, coeffs=coeffs, price_spec=price_spec,
                       rule=rule, scheme=scheme, meso=meso, micro=micro,
                       init_bid=init_bid, init_ask=init_ask,
                       init_price=init_price)
