"""LOBSTER parsing and method-of-moments estimators."""

import numpy as np
import pytest

from lobkit.calibration import (
    CalibrationScaling, average_dirichlet_laplacian, estimate_drift,
    estimate_price_params, estimate_volatility, flow_volumes, parse_lobster,
)
from lobkit.errors import DataFormatError


def write_files(tmp_path, messages, book):
    mpath = tmp_path / "messages.csv"
    bpath = tmp_path / "orderbook.csv"
    np.savetxt(mpath, np.asarray(messages, dtype=float), delimiter=",",
               fmt="%.6f")
    np.savetxt(bpath, np.asarray(book, dtype=np.int64), delimiter=",",
               fmt="%d")
    return str(mpath), str(bpath)


# book with best bid 100000 and best ask 100100 (price units of 1e-4
# dollars, 100 units per tick), three levels per side
BOOK3 = [100100, 40, 100000, 50,
         100200, 30, 99900, 60,
         100300, 20, 99800, 70]


class TestParseLobster:
    def test_three_event_fixture(self, tmp_path):
        messages = [
            [34200.1, 1, 11, 100, 99900, 1],     # buy limit, level 2
            [34200.2, 3, 12, 200, 100200, -1],   # sell deletion, level 2
            [34200.3, 4, 13, 300, 100000, 1],    # buy execution, level 1
        ]
        mpath, bpath = write_files(tmp_path, messages, [BOOK3] * 3)
        data = parse_lobster(mpath, bpath, levels=3)
        assert data.num_rows == 3
        assert data.messages["type"].tolist() == [1, 3, 4]
        assert data.messages["rel_level"].tolist() == [2, 2, 1]
        assert data.messages["occupied"].all()
        assert data.mid_cents().tolist() == [1000.5] * 3

    def test_empty_files(self, tmp_path):
        mpath = tmp_path / "m.csv"
        bpath = tmp_path / "b.csv"
        mpath.write_text("")
        bpath.write_text("")
        data = parse_lobster(str(mpath), str(bpath), levels=3)
        assert data.num_rows == 0
        sigma, counts = estimate_volatility(data)
        assert np.all(sigma == 0) and np.all(counts == 0)

    def test_misaligned_files(self, tmp_path):
        messages = [[34200.1, 1, 11, 100, 99900, 1]] * 2
        mpath, bpath = write_files(tmp_path, messages, [BOOK3] * 3)
        with pytest.raises(DataFormatError):
            parse_lobster(mpath, bpath, levels=3)

    def test_invalid_event_type(self, tmp_path):
        messages = [[34200.1, 9, 11, 100, 99900, 1]]
        mpath, bpath = write_files(tmp_path, messages, [BOOK3])
        with pytest.raises(DataFormatError):
            parse_lobster(mpath, bpath, levels=3)

    def test_nonpositive_size(self, tmp_path):
        messages = [[34200.1, 1, 11, 0, 99900, 1]]
        mpath, bpath = write_files(tmp_path, messages, [BOOK3])
        with pytest.raises(DataFormatError):
            parse_lobster(mpath, bpath, levels=3)

    def test_wrong_column_count(self, tmp_path):
        mpath = tmp_path / "m.csv"
        mpath.write_text("1,2,3\n")
        bpath = tmp_path / "b.csv"
        np.savetxt(bpath, [BOOK3], delimiter=",", fmt="%d")
        with pytest.raises(DataFormatError):
            parse_lobster(str(mpath), str(bpath), levels=3)

    def test_in_spread_event_gets_no_level(self, tmp_path):
        # execution of a hidden order inside the spread: not attributable
        messages = [[34200.1, 4, 11, 100, 100050, 1]]
        mpath, bpath = write_files(tmp_path, messages, [BOOK3])
        data = parse_lobster(mpath, bpath, levels=3)
        assert data.num_rows == 1
        assert data.messages["rel_level"].tolist() == [-1]

    def test_limit_into_unoccupied_queue_flagged(self, tmp_path):
        book = list(BOOK3)
        book[7] = 0    # empty bid level 2
        messages = [
            [34200.1, 1, 11, 100, 99900, 1],
            [34200.2, 1, 12, 100, 99900, 1],
        ]
        mpath, bpath = write_files(tmp_path, messages, [book, book])
        data = parse_lobster(mpath, bpath, levels=3)
        assert data.messages["occupied"].tolist() == [False, False]
        _, counts = estimate_volatility(
            data, CalibrationScaling(levels=3, grid_size=4))
        assert counts.tolist() == [0, 0, 0]


class TestVolatilityEstimator:
    def test_arithmetic_inversion(self, tmp_path):
        # half the squared model-unit sizes sum to 30.6 at level 1:
        # 51 * 60 * sigma^2 = 30.6 so sigma = 0.1
        messages = [
            [34200.1, 1, 11, 78000, 100000, 1],
            [34200.2, 2, 11, 6000, 100000, 1],
        ]
        book = [100100, 40, 100000, 50]
        mpath, bpath = write_files(tmp_path, messages, [book, book])
        data = parse_lobster(mpath, bpath, levels=1)
        sigma, counts = estimate_volatility(
            data, CalibrationScaling(levels=1, grid_size=51))
        assert counts.tolist() == [2]
        assert sigma[0] == pytest.approx(0.1, rel=1e-12)

    def test_silent_levels_warn_and_zero(self, tmp_path):
        messages = [[34200.1, 1, 11, 100, 100000, 1]]
        book = [100100, 40, 100000, 50, 100200, 30, 99900, 60]
        mpath, bpath = write_files(tmp_path, messages, [book])
        data = parse_lobster(mpath, bpath, levels=2)
        with pytest.warns(RuntimeWarning):
            sigma, counts = estimate_volatility(
                data, CalibrationScaling(levels=2, grid_size=3))
        assert sigma[1] == 0.0
        assert counts.tolist() == [1, 0]


class TestDriftEstimator:
    def test_zero_flow_zero_laplacian(self, tmp_path):
        # inflow and outflow of equal size cancel; an empty book has zero
        # curvature
        messages = [
            [34200.1, 2, 11, 500, 100000, 1],
            [34200.2, 1, 12, 500, 100000, 1],
        ]
        book = [100100, 1, 100000, 1]
        mpath, bpath = write_files(tmp_path, messages, [book, book])
        data = parse_lobster(mpath, bpath, levels=1)
        scaling = CalibrationScaling(levels=1, grid_size=2)
        flows = flow_volumes(data, scaling)
        assert flows.inflow_bid.tolist() == [500.0]
        assert flows.outflow_bid.tolist() == [500.0]
        f_hat, _, lap = estimate_drift(data, alpha=0.0, scaling=scaling)
        assert f_hat[0] == pytest.approx(0.0)

    def test_net_flow_minus_smoothing_term(self, tmp_path):
        # one-level book held at one volume unit per side: the Dirichlet
        # second difference is -2 * grid^2 = -8, so
        # f = 6 / 60 - alpha * (-8) = 0.18 for net hourly flow 6
        messages = [[34200.1, 1, 11, 120000, 100000, 1]]
        book = [100100, 10000, 100000, 10000]
        mpath, bpath = write_files(tmp_path, messages, [book])
        data = parse_lobster(mpath, bpath, levels=1)
        scaling = CalibrationScaling(levels=1, grid_size=2)
        lap = average_dirichlet_laplacian(data, scaling)
        assert lap[0] == pytest.approx(-8.0)
        f_hat, flows, _ = estimate_drift(data, alpha=0.01, scaling=scaling)
        assert f_hat[0] == pytest.approx(6.0 / 60.0 + 0.08, rel=1e-12)


class TestPriceParamEstimator:
    def test_symmetric_book_gamma_not_estimable(self):
        mids = np.array([0.0, 1.0, 0.0, 2.0])
        best = np.full(4, 300.0)
        with pytest.warns(RuntimeWarning):
            est = estimate_price_params(mids, best, best)
        assert est.imbalance == 0.0
        assert est.imbalance_abs == 0.0
        assert est.gamma_hat is None
        # sum of squared one-cent moves is 6
        assert est.delta_hat == pytest.approx(6.0 / 120.0)
        assert est.n_price_moves == 3

    def test_alternating_imbalance_consistency_identity(self):
        # zero signed imbalance with positive absolute imbalance: supply
        # the fitted gamma and recover the production-rate identity
        # 120 * delta = 1531.2 from total squared moves 2417
        steps = [2.0] * 600 + [1.0] * 17
        mids = np.concatenate(([0.0], np.cumsum(steps)))
        J = mids.shape[0]
        v = 5536.25
        diff = v * (-1.0) ** np.arange(J)
        assert J % 2 == 0    # signed sum cancels exactly
        ask = np.full(J, 1e5)
        est = estimate_price_params(mids, ask + diff, ask, gamma_hat=2720.0)
        assert est.imbalance == pytest.approx(0.0, abs=1e-15)
        assert est.qv_cents2 == pytest.approx(2417.0)
        assert est.delta_hat == pytest.approx(12.76, rel=1e-9)
        assert 120.0 * est.delta_hat == pytest.approx(1531.2, rel=1e-9)

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_gamma_from_drifting_price(self):
        J = 101
        mids = 0.1 * np.arange(J)    # net move 10 cents
        bid = np.full(J, 2e5)
        ask = np.full(J, 1e5)
        est = estimate_price_params(mids, bid, ask)
        norm = 2.0 * 51 * 1e4
        assert est.imbalance == pytest.approx(1e5 / norm)
        assert est.gamma_hat == pytest.approx(10.0 / (60.0 * est.imbalance))
        assert abs(est.imbalance) <= est.imbalance_abs

    def test_negative_delta_clamped(self):
        # many small moves: total squared moves 1 while the endogenous
        # share removes 10, so the raw delta estimate is negative
        J = 101
        mids = 0.1 * np.arange(J)
        bid = np.full(J, 2e5)
        ask = np.full(J, 1e5)
        with pytest.warns(RuntimeWarning):
            est = estimate_price_params(mids, bid, ask)
        assert est.delta_hat == 0.0
        assert est.delta_clamped

    def test_empty_series(self):
        est = estimate_price_params([], [], [])
        assert est.gamma_hat is None and est.delta_hat is None
