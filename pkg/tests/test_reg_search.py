import json

import numpy as np
import pytest
import torch

from interpretabnet.encoder import MaskTensor
from interpretabnet.errors import ConfigError, EmptyInputError, NoFeasibleRegError
from interpretabnet.reg_search import (
    CriteriaConfig,
    aggregated_step_importance,
    criteria_check,
    max_trainer_calls,
    search_rm,
)


def masks_from_importances(rows):
    """One-sample mask tensor whose aggregated importance equals the rows."""
    arr = np.asarray(rows, dtype=np.float64)[:, None, :]
    return MaskTensor(torch.as_tensor(arr))


def spread(remainder, count):
    return [remainder / count] * count


class TestCriteriaCheck:
    def test_three_features_in_band_pass(self):
        row = [0.23, 0.22, 0.21] + spread(1 - 0.66, 8)
        result = criteria_check(masks_from_importances([row]), CriteriaConfig())
        assert result.passed
        assert result.steps[0].in_band == 3

    def test_uniform_importances_fail(self):
        row = [1 / 14] * 14
        result = criteria_check(masks_from_importances([row]), CriteriaConfig())
        assert not result.passed
        assert result.steps[0].in_band == 0

    def test_one_hot_step_fails(self):
        row = [1.0] + [0.0] * 10
        result = criteria_check(masks_from_importances([row]), CriteriaConfig())
        assert not result.passed
        assert result.steps[0].in_band == 0

    def test_too_many_in_band_fails(self):
        row = [0.24, 0.22, 0.22, 0.21] + spread(1 - 0.89, 7)
        result = criteria_check(masks_from_importances([row]), CriteriaConfig())
        assert result.steps[0].in_band == 4
        assert not result.passed

    def test_all_steps_must_pass(self):
        good = [0.23, 0.22, 0.21] + spread(1 - 0.66, 8)
        bad = [1 / 11] * 11
        result = criteria_check(masks_from_importances([good, bad]), CriteriaConfig())
        assert result.steps[0].passed and not result.steps[1].passed
        assert not result.passed

    def test_empty_tensor_rejected(self):
        with pytest.raises(EmptyInputError):
            criteria_check(MaskTensor(torch.zeros(2, 0, 5)), CriteriaConfig())

    def test_aggregation_renormalizes_mean_over_samples(self):
        values = np.zeros((1, 2, 4))
        values[0, 0] = [1.0, 0.0, 0.0, 0.0]
        values[0, 1] = [0.0, 1.0, 0.0, 0.0]
        agg = aggregated_step_importance(MaskTensor(torch.as_tensor(values)))
        np.testing.assert_allclose(agg[0], [0.5, 0.5, 0.0, 0.0])


PASS_ROW = [0.23, 0.22, 0.21] + spread(1 - 0.66, 8)
FAIL_ROW = [1 / 11] * 11


def scripted_handle(table):
    """Trainer double: r_m -> (accuracy, passes?); counts invocations."""
    calls = []

    def handle(r_m, seed):
        calls.append(r_m)
        accuracy, passes = table[r_m]
        row = PASS_ROW if passes else FAIL_ROW
        return accuracy, masks_from_importances([row, row])

    handle.calls = calls
    return handle


class TestSearchTraces:
    def test_pass_rich_trace(self):
        """Hand trace: candidates 0, 10, 100, 1000; third pass at 1000 stops
        the sweep; best accuracy among passing candidates is at 100."""
        table = {
            0.0: (0.80, False),
            10.0: (0.86, True),
            100.0: (0.87, True),
            1000.0: (0.85, True),
        }
        handle = scripted_handle(table)
        cfg = CriteriaConfig(range_start=0.0, range_end=1e7, required_passes=3)
        result = search_rm(handle, cfg)
        assert result.r_m_star == 100.0
        assert handle.calls == [0.0, 10.0, 100.0, 1000.0]
        assert result.ledger.trainer_calls == 4
        assert result.ledger.pass_count == 3
        assert set(result.ledger.entries) == {0.0, 10.0, 100.0, 1000.0}

    def test_pass_sparse_trace_recurses_linearly(self):
        """Hand trace: coarse sweep 0..1e7 finds exactly one pass (100), so the
        search recurses over [10, 1000] with step (1000-10)/8 = 123.75.
        Candidates 10 and 1000 are already known and are not re-trained; the
        sweep stops once 505.0 delivers the third pass."""
        table = {
            0.0: (0.70, False),
            10.0: (0.72, False),
            100.0: (0.85, True),
            1000.0: (0.80, False),
            10_000.0: (0.75, False),
            100_000.0: (0.74, False),
            1_000_000.0: (0.73, False),
            10_000_000.0: (0.72, False),
            133.75: (0.83, False),
            257.5: (0.88, True),
            381.25: (0.84, False),
            505.0: (0.86, True),
        }
        handle = scripted_handle(table)
        cfg = CriteriaConfig(range_start=0.0, range_end=1e7, required_passes=3)
        result = search_rm(handle, cfg)
        assert result.r_m_star == 257.5
        assert handle.calls == [
            0.0,
            10.0,
            100.0,
            1000.0,
            10_000.0,
            100_000.0,
            1_000_000.0,
            10_000_000.0,
            133.75,
            257.5,
            381.25,
            505.0,
        ]
        assert result.ledger.trainer_calls == 12
        assert result.ledger.pass_count == 3

    def test_infeasible_trace_raises_with_ledger(self):
        table = {r: (0.8, False) for r in (0.0, 10.0, 100.0, 1000.0)}
        handle = scripted_handle(table)
        cfg = CriteriaConfig(range_start=0.0, range_end=1000.0, required_passes=3)
        with pytest.raises(NoFeasibleRegError) as err:
            search_rm(handle, cfg)
        assert handle.calls == [0.0, 10.0, 100.0, 1000.0]
        ledger = err.value.ledger
        assert len(ledger.entries) == 4
        assert ledger.pass_count == 0

    def test_candidate_sequence_spans_default_range(self):
        table = {float(10**k) if k else 0.0: (0.5, False) for k in range(8)}
        handle = scripted_handle(table)
        cfg = CriteriaConfig(range_start=0.0, range_end=1e7, required_passes=3)
        with pytest.raises(NoFeasibleRegError):
            search_rm(handle, cfg)
        assert handle.calls == [0.0, 10.0, 100.0, 1e3, 1e4, 1e5, 1e6, 1e7]

    def test_stops_immediately_at_required_passes(self):
        table = {0.0: (0.9, True), 10.0: (0.91, True)}
        handle = scripted_handle(table)
        cfg = CriteriaConfig(range_start=0.0, range_end=1e7, required_passes=2)
        result = search_rm(handle, cfg)
        assert handle.calls == [0.0, 10.0]  # nothing evaluated past the stop
        assert result.r_m_star == 10.0

    def test_termination_bound(self):
        cfg = CriteriaConfig(range_start=0.0, range_end=1e7, required_passes=3)
        bound = max_trainer_calls(cfg)
        table = {
            0.0: (0.70, False),
            10.0: (0.72, False),
            100.0: (0.85, True),
            1000.0: (0.80, False),
            10_000.0: (0.75, False),
            100_000.0: (0.74, False),
            1_000_000.0: (0.73, False),
            10_000_000.0: (0.72, False),
            133.75: (0.83, False),
            257.5: (0.84, False),
            381.25: (0.82, False),
            505.0: (0.81, False),
            628.75: (0.80, False),
            752.5: (0.79, False),
            876.25: (0.78, False),
        }
        handle = scripted_handle(table)
        result = search_rm(handle, cfg)  # single pass at 100 still wins
        assert result.r_m_star == 100.0
        assert result.ledger.trainer_calls <= bound

    def test_ledger_deterministic(self):
        table = {
            0.0: (0.80, False),
            10.0: (0.86, True),
            100.0: (0.87, True),
            1000.0: (0.85, True),
        }
        cfg = CriteriaConfig(range_start=0.0, range_end=1e7, required_passes=3)
        a = search_rm(scripted_handle(table), cfg)
        b = search_rm(scripted_handle(table), cfg)
        assert a.ledger.to_json(sort_keys=True) == b.ledger.to_json(sort_keys=True)
        assert a.r_m_star == b.r_m_star

    def test_returned_weight_is_ledger_argmax_among_passing(self):
        table = {
            0.0: (0.99, False),  # high accuracy but fails criteria
            10.0: (0.80, True),
            100.0: (0.82, True),
            1000.0: (0.81, True),
        }
        cfg = CriteriaConfig(range_start=0.0, range_end=1e7, required_passes=3)
        result = search_rm(scripted_handle(table), cfg)
        assert result.r_m_star == 100.0
        best = result.ledger.best()
        passing = [e for e in result.ledger.entries.values() if e.passed]
        assert all(e.accuracy <= best.accuracy for e in passing)

    def test_report_serializes(self):
        table = {0.0: (0.8, True), 10.0: (0.81, True)}
        cfg = CriteriaConfig(range_start=0.0, range_end=10.0, required_passes=2)
        result = search_rm(scripted_handle(table), cfg)
        report = json.loads(result.ledger.to_json())
        assert report["pass_count"] == 2
        assert [e["r_m"] for e in report["entries"]] == [0.0, 10.0]
        assert all("steps" in e for e in report["entries"])


class TestCriteriaConfigValidation:
    def test_band_inside_unit_interval(self):
        with pytest.raises(ConfigError):
            CriteriaConfig(importance_band=(0.0, 0.25))
        with pytest.raises(ConfigError):
            CriteriaConfig(importance_band=(0.3, 0.2))

    def test_range_must_be_increasing(self):
        with pytest.raises(ConfigError):
            CriteriaConfig(range_start=10.0, range_end=5.0)

    def test_band_count_lower_bound(self):
        with pytest.raises(ConfigError):
            CriteriaConfig(band_count=(0, 3))
