"""Shared fixtures and small builders for the test suite."""

import numpy as np
import pytest

from lobkit.calibration import CalibrationScaling
from lobkit.model import CoefficientSet, PriceChangeSpec, SideCoefficients


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def constant_coeffs(num_levels, **kw):
    return CoefficientSet.constant(num_levels, **kw)


def roundtrip_coeffs():
    """Mean-reverting tables on the 13-tick grid used by the synthetic
    round-trip fixture: strong volume-proportional cancellation keeps the
    book near its stationary profile so the imbalance signal persists."""
    L, G = 12, 13
    x = np.arange(1, G) / G
    sigma = 0.2 + 0.1 * np.sin(np.pi * x)
    f_bid = 2.5 * (1.0 - 0.5 * x)
    f_ask = 0.5 * (1.0 - 0.5 * x)

    def side(f):
        return SideCoefficients(
            sigma_base=sigma, sigma_slope=np.zeros(L),
            limit_base=f, limit_slope=np.zeros(L),
            cancel_base=np.zeros(L), cancel_slope=np.full(L, 5.0),
            smoothing=0.02)

    coeffs = CoefficientSet(bid=side(f_bid), ask=side(f_ask))
    price_spec = PriceChangeSpec(gamma=800.0, delta=4.0, window_width=1 / G)
    scaling = CalibrationScaling(levels=L, grid_size=G)
    return coeffs, price_spec, scaling, f_bid / 5.0, f_ask / 5.0
