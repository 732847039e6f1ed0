"""Synthetic generator and entity-shift scenario tests."""

import numpy as np
import numpy.testing as npt
import pytest

from eiformer.data import (
    ScenarioSpec,
    apply_scenario,
    chrono_split,
    gen_synthetic,
    scenario_selection,
    zero_mask_entities,
)
from eiformer.errors import ConfigError


class TestGenSynthetic:
    def test_deterministic_per_seed(self):
        a = gen_synthetic(20, 4, 100, seed=3)
        b = gen_synthetic(20, 4, 100, seed=3)
        assert a.values.tobytes() == b.values.tobytes()
        assert gen_synthetic(20, 4, 100, seed=4).values.tobytes() != a.values.tobytes()

    def test_noiseless_equal_scales_identical_series(self):
        d = gen_synthetic(2, 1, 50, noise_sigma=0.0, scale_range=(1.0, 1.0), seed=0)
        npt.assert_array_equal(d.values[:, 0], d.values[:, 1])

    def test_emerging_count_and_leading_zeros(self):
        d = gen_synthetic(100, 5, 200, emerge_frac=0.1, seed=1)
        leading_zero = [i for i in range(100) if d.values[0, i, 0] == 0.0
                        and np.all(d.values[:120, i, 0] == 0.0)]
        assert len(leading_zero) == 10
        for i in leading_zero:
            # onset lands in the final 40%
            nonzero = np.nonzero(d.values[:, i, 0])[0]
            assert nonzero.size > 0 and nonzero[0] >= 120

    def test_vanishing_trailing_zeros(self):
        d = gen_synthetic(50, 5, 200, vanish_frac=0.1, seed=2)
        # 5 entities are active early, then exactly zero from some offset >= 120 on
        trailing = []
        for i in range(50):
            series = d.values[:, i, 0]
            if series[-1] == 0.0 and series[:120].all():
                offset = np.nonzero(series == 0.0)[0][0]
                assert offset >= 120
                assert np.all(series[offset:] == 0.0)
                trailing.append(i)
        assert len(trailing) == 5

    def test_cluster_correlation_margin(self):
        d = gen_synthetic(60, 5, 1500, noise_sigma=0.3, seed=5)
        x = d.values[:, :, 0]
        cluster_of = np.arange(60) % 5
        corr = np.corrcoef(x.T)
        within, cross = [], []
        for i in range(60):
            for j in range(i + 1, 60):
                (within if cluster_of[i] == cluster_of[j] else cross).append(corr[i, j])
        assert np.mean(within) > np.mean(cross) + 0.2

    def test_bad_fraction_names_field(self):
        with pytest.raises(ConfigError) as err:
            gen_synthetic(10, 2, 50, emerge_frac=0.9)
        assert "emerge_frac" in str(err.value)

    def test_cluster_count_validated(self):
        with pytest.raises(ConfigError):
            gen_synthetic(3, 5, 50)


class TestScenarios:
    def make(self):
        d = gen_synthetic(100, 5, 50, seed=7)
        # reuse the same cube as both pseudo-train and pseudo-test segments
        return d.slice_time(0, 30), d.slice_time(30, 50)

    def test_scenario_0_is_identity(self):
        tr, te = self.make()
        tr2, te2 = apply_scenario(tr, te, ScenarioSpec(0, 0.10, seed=1))
        assert tr2.values.tobytes() == tr.values.tobytes()
        assert te2.values.tobytes() == te.values.tobytes()

    def test_scenario_1_counts(self):
        tr, te = self.make()
        tr2, te2 = apply_scenario(tr, te, ScenarioSpec(1, 0.10, seed=1))
        assert tr2.num_entities == 90
        assert te2.num_entities == 100
        withheld = set(te2.entity_ids) - set(tr2.entity_ids)
        assert len(withheld) == 10

    def test_scenario_2_counts(self):
        tr, te = self.make()
        tr2, te2 = apply_scenario(tr, te, ScenarioSpec(2, 0.10, seed=1))
        assert tr2.num_entities == 100
        assert te2.num_entities == 90

    def test_scenario_3_disjoint_overlap(self):
        tr, te = self.make()
        tr2, te2 = apply_scenario(tr, te, ScenarioSpec(3, 0.10, seed=1))
        assert tr2.num_entities == 90
        assert te2.num_entities == 90
        assert len(set(tr2.entity_ids) & set(te2.entity_ids)) == 80

    def test_scenario_3_fraction_guard(self):
        with pytest.raises(ConfigError):
            ScenarioSpec(3, 0.6).validate()

    def test_retained_series_bitwise(self):
        tr, te = self.make()
        tr2, _ = apply_scenario(tr, te, ScenarioSpec(1, 0.10, seed=1))
        for new_i, e in enumerate(tr2.entity_ids):
            old_i = tr.entity_ids.index(e)
            assert tr2.values[:, new_i].tobytes() == tr.values[:, old_i].tobytes()

    def test_selection_deterministic(self):
        ids = [f"e{i}" for i in range(50)]
        a = scenario_selection(ids, ScenarioSpec(1, 0.2, seed=9))
        b = scenario_selection(ids, ScenarioSpec(1, 0.2, seed=9))
        assert a == b

    def test_zero_mask_keeps_slots(self):
        tr, _ = self.make()
        masked = zero_mask_entities(tr, tr.entity_ids[:10])
        assert masked.entity_ids == tr.entity_ids
        assert np.all(masked.values[:, :10] == 0.0)
        assert masked.values[:, 10:].tobytes() == tr.values[:, 10:].tobytes()
