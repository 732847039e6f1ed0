"""Error metrics against independent loop oracles."""

import math

import numpy as np
import pytest

from eiformer.errors import ConfigError, ShapeError
from eiformer.train import EPS_MASK, MetricsReport, mae, mape, rmse, validate_horizons


def mae_oracle(pred, target):
    total, count = 0.0, 0
    for p, t in zip(pred.ravel().tolist(), target.ravel().tolist()):
        total += abs(p - t)
        count += 1
    return total / count


def rmse_oracle(pred, target):
    total, count = 0.0, 0
    for p, t in zip(pred.ravel().tolist(), target.ravel().tolist()):
        total += (p - t) ** 2
        count += 1
    return math.sqrt(total / count)


def mape_oracle(pred, target, eps):
    total, used, masked = 0.0, 0, 0
    for p, t in zip(pred.ravel().tolist(), target.ravel().tolist()):
        if abs(t) > eps:
            total += abs(p - t) / abs(t)
            used += 1
        else:
            masked += 1
    if used == 0:
        return math.nan, 0, masked
    return 100.0 * total / used, used, masked


class TestPointMetrics:
    def test_known_values(self):
        pred = np.array([1.0, 2.0, 3.0])
        target = np.array([2.0, 2.0, 5.0])
        assert mae(pred, target) == pytest.approx(1.0, abs=1e-15)
        assert rmse(pred, target) == pytest.approx(math.sqrt(5.0 / 3.0), abs=1e-15)
        m = mape(pred, target)
        assert m.percent == pytest.approx(100.0 * (0.5 + 0.0 + 0.4) / 3.0, abs=1e-12)
        assert m.used == 3 and m.masked_out == 0 and m.defined

    def test_matches_loop_oracle_on_random_arrays(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            shape = tuple(rng.integers(1, 5, size=rng.integers(1, 4)))
            pred = rng.normal(size=shape)
            target = rng.normal(size=shape)
            target[rng.random(size=shape) < 0.2] = 0.0
            assert mae(pred, target) == pytest.approx(mae_oracle(pred, target), rel=1e-12)
            assert rmse(pred, target) == pytest.approx(rmse_oracle(pred, target), rel=1e-12)
            want_pct, want_used, want_masked = mape_oracle(pred, target, EPS_MASK)
            got = mape(pred, target)
            assert got.used == want_used and got.masked_out == want_masked
            if want_used:
                assert got.percent == pytest.approx(want_pct, rel=1e-12)
            else:
                assert math.isnan(got.percent) and not got.defined

    def test_mape_masks_near_zero_targets(self):
        pred = np.array([1.0, 1.0, 1.0])
        target = np.array([0.0, 5e-5, 2.0])
        m = mape(pred, target)
        assert m.used == 1 and m.masked_out == 2
        assert m.percent == pytest.approx(50.0, abs=1e-12)

    def test_mape_all_masked_is_undefined_not_an_error(self):
        m = mape(np.ones(4), np.zeros(4))
        assert not m.defined and math.isnan(m.percent)
        assert m.masked_out == 4
        assert math.isnan(float(m))

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ShapeError):
            mae(np.ones(3), np.ones(4))

    def test_summation_is_order_independent(self):
        rng = np.random.default_rng(0)
        vals = rng.normal(size=4096) * 10.0 ** rng.integers(-8, 8, size=4096)
        target = np.zeros(4096)
        forward = mae(vals, target)
        backward_order = mae(vals[::-1].copy(), target)
        assert forward == backward_order


class TestMetricsReport:
    def make_report(self):
        return MetricsReport(
            horizons=[1, 3],
            per_step_mae=[1.0, 2.0, 3.0],
            per_step_rmse=[1.5, 2.5, 3.5],
            per_step_mape=[10.0, math.nan, 30.0],
            per_step_mape_masked=[0, 4, 1],
            n_windows=7,
            n_entities=5,
        )

    def test_average_row_is_mean_of_step_rows(self):
        r = self.make_report()
        avg = r.average_row()
        assert avg["mae"] == pytest.approx(2.0, abs=1e-15)
        assert avg["rmse"] == pytest.approx(2.5, abs=1e-15)
        # nan steps drop out of the mape average instead of poisoning it
        assert avg["mape_percent"] == pytest.approx(20.0, abs=1e-12)
        assert avg["mape_masked_out"] == 5

    def test_rows_cover_requested_horizons_plus_average(self):
        rows = self.make_report().rows()
        assert [row["horizon"] for row in rows] == ["1", "3", "average"]
        assert rows[0]["mae"] == 1.0
        assert rows[1]["rmse"] == 3.5

    def test_csv_text_round_trips_floats_exactly(self):
        r = self.make_report()
        r.per_step_mae[0] = 1.0 / 3.0
        text = r.to_csv_text()
        lines = text.strip().split("\n")
        assert lines[0] == "horizon,mae,rmse,mape_percent,mape_masked_out"
        first = lines[1].split(",")
        assert float(first[1]) == 1.0 / 3.0
        assert text.endswith("\n")

    def test_json_dict_is_serializable_structure(self):
        d = self.make_report().to_json_dict()
        assert d["n_windows"] == 7
        assert len(d["rows"]) == 3
        assert d["per_step_mae"] == [1.0, 2.0, 3.0]


class TestHorizonValidation:
    def test_accepts_in_range(self):
        assert validate_horizons([1, 6, 12], 12) == [1, 6, 12]

    def test_rejects_out_of_range(self):
        with pytest.raises(ConfigError):
            validate_horizons([0], 12)
        with pytest.raises(ConfigError):
            validate_horizons([13], 12)

    def test_rejects_empty(self):
        with pytest.raises(ConfigError):
            validate_horizons([], 12)
