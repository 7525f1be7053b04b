"""Best-of-k resampling, correlation, and their display formats."""

import numpy as np
import pytest

from reqforge.errors import DegenerateError
from reqforge.hpo.space import HyperparameterSetting, Optimizer, Schedule
from reqforge.hpo.stats import (
    BestOfK,
    Quartiles,
    best_of_k_stats,
    correlation_report,
    format_mean_std,
    pearson,
)

# hand-checked with a separate implementation; pinned to full precision
PEARSON_XS = [0.12, 0.47, 0.91, 1.53, 2.08, 2.66, 3.14, 3.77, 4.25, 4.99]
PEARSON_YS = [2.31, 1.88, 2.95, 2.04, 3.62, 3.11, 4.47, 3.95, 5.28, 4.86]
PEARSON_R = 0.8984625921123196


class TestBestOfK:
    def test_constant_population_is_flat(self):
        rows = best_of_k_stats([[0.7, 0.7, 0.7]], repeats=200, rng_seed=1)
        assert len(rows) == 10
        for row in rows:
            assert row.mean == pytest.approx(0.7)
            assert row.std == pytest.approx(0.0)

    def test_uniform_population_tracks_the_known_curve(self):
        # E[max of k uniforms] = k / (k + 1)
        pop = np.random.default_rng(42).uniform(0, 1, 5000)
        rows = best_of_k_stats([pop], repeats=10_000, rng_seed=0)
        for row in rows:
            assert row.mean == pytest.approx(row.k / (row.k + 1), abs=0.01)

    def test_k_runs_one_through_max_k(self):
        rows = best_of_k_stats([[0.1, 0.9]], repeats=50, rng_seed=3, max_k=4)
        assert [row.k for row in rows] == [1, 2, 3, 4]

    def test_means_never_decrease(self):
        rng = np.random.default_rng(8)
        for trial in range(20):
            pops = [rng.uniform(0, 1, rng.integers(2, 40)) for _ in range(3)]
            rows = best_of_k_stats(pops, repeats=100, rng_seed=trial)
            means = [row.mean for row in rows]
            assert means == sorted(means)

    def test_multiple_populations_average_their_curves(self):
        rows = best_of_k_stats([[0.2], [0.8]], repeats=10, rng_seed=0)
        # both populations are single-valued, so every draw is exact
        for row in rows:
            assert row.mean == pytest.approx(0.5)
            assert row.std == pytest.approx(0.0)

    def test_bad_arguments_rejected(self):
        with pytest.raises(ValueError):
            best_of_k_stats([[0.5]], repeats=0, rng_seed=0)
        with pytest.raises(ValueError):
            best_of_k_stats([], repeats=10, rng_seed=0)
        with pytest.raises(ValueError):
            best_of_k_stats([[0.5], []], repeats=10, rng_seed=0)

    def test_display_uses_four_decimals_and_a_plus_minus(self):
        assert BestOfK(1, 0.6704, 0.0609).display == "0.6704±0.0609"
        assert format_mean_std(0.5, 0.25) == "0.5000±0.2500"
        assert format_mean_std(0.70365, 0.0308, decimals=3) == "0.704±0.031"


class TestPearson:
    def test_perfect_linear_relations(self):
        assert pearson([1, 2, 3], [10, 20, 30]) == pytest.approx(1.0)
        assert pearson([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0)

    def test_frozen_fixture_to_full_precision(self):
        assert pearson(PEARSON_XS, PEARSON_YS) == pytest.approx(PEARSON_R, abs=1e-12)

    def test_constant_vector_is_degenerate(self):
        with pytest.raises(DegenerateError, match="constant vector"):
            pearson([1.0, 1.0, 1.0], [1, 2, 3])
        with pytest.raises(DegenerateError):
            pearson([1, 2, 3], [4.0, 4.0, 4.0])

    def test_shape_mismatch_and_short_input_rejected(self):
        with pytest.raises(ValueError):
            pearson([1, 2], [1, 2, 3])
        with pytest.raises(ValueError):
            pearson([1.0], [2.0])

    def test_result_is_clipped_to_the_unit_interval(self):
        rng = np.random.default_rng(17)
        for _ in range(200):
            xs = rng.normal(size=5)
            ys = rng.normal(size=5)
            assert -1.0 <= pearson(xs, ys) <= 1.0


def test_quartiles_of_one_through_five():
    q = Quartiles.of(np.array([5.0, 3.0, 1.0, 4.0, 2.0]))
    assert (q.min, q.q1, q.median, q.q3, q.max) == (1.0, 2.0, 3.0, 4.0, 5.0)


def _sample(opt, sched, lr, wd, iters, batch, value):
    return (
        HyperparameterSetting(
            optimizer=opt,
            schedule=sched,
            learning_rate=lr,
            weight_decay=wd,
            iters=iters,
            batch_size=batch,
        ),
        value,
    )


class TestCorrelationReport:
    def _samples(self):
        # metric rises with log lr and falls with batch size
        out = []
        for i in range(8):
            out.append(
                _sample(
                    Optimizer.SGD if i % 2 else Optimizer.ADAMW,
                    Schedule.STEP,
                    10 ** (-8 + 0.9 * i),
                    10 ** (-5 + 0.5 * i),
                    2000 + 137 * i,
                    64 - 8 * i,
                    0.1 * i,
                )
            )
        return out

    def test_numeric_signs_and_keys(self):
        report = correlation_report(self._samples())
        assert list(report.numeric) == [
            "learning rate",
            "weight decay",
            "iters",
            "batch size",
        ]
        assert report.numeric["learning rate"] > 0.99
        assert report.numeric["batch size"] < -0.99

    def test_rates_correlate_on_the_log_scale(self):
        # linear in log10(lr) means r = 1 exactly on the log scale
        report = correlation_report(self._samples())
        assert report.numeric["learning rate"] == pytest.approx(1.0)
        assert report.numeric["weight decay"] == pytest.approx(1.0)

    def test_constant_numeric_column_is_degenerate(self):
        pair = [
            _sample(Optimizer.SGD, Schedule.STEP, 1e-4, 1e-3, 3000, 8, 0.5),
            _sample(Optimizer.SGD, Schedule.STEP, 1e-3, 1e-4, 3000, 16, 0.6),
        ]
        with pytest.raises(DegenerateError):
            correlation_report(pair)

    def test_categorical_groups_get_quartiles(self):
        report = correlation_report(self._samples())
        opt = report.categorical["optimizer"]
        assert set(opt) == {"AdamW", "SGD"}
        # even indices carry AdamW and the even metric values
        assert opt["AdamW"].median == pytest.approx(np.median([0.0, 0.2, 0.4, 0.6]))
        assert report.categorical["lr schedule"]["StepLR"].max == pytest.approx(0.7)

    def test_thin_categories_warn_and_drop(self):
        samples = self._samples()
        samples[0] = _sample(
            Optimizer.RMSPROP, Schedule.STEP, 1e-8, 1e-3, 3000, 64, 0.0
        )
        with pytest.warns(UserWarning, match="skipping optimizer 'RMSprop'"):
            report = correlation_report(samples)
        assert "RMSprop" not in report.categorical["optimizer"]

    def test_json_dict_round_trips_through_json(self):
        import json

        report = correlation_report(self._samples())
        obj = json.loads(json.dumps(report.to_json_dict()))
        assert obj["numeric"]["iters"] == report.numeric["iters"]
        assert obj["categorical"]["optimizer"]["SGD"]["median"] == (
            report.categorical["optimizer"]["SGD"].median
        )

    def test_needs_two_samples(self):
        with pytest.raises(ValueError, match="at least 2"):
            correlation_report(self._samples()[:1])
