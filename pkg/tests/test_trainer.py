"""Synthetic response surface, simulated trainer, and the external adapter.

The surface constants sum to 0.95 at the best setting with noise off, so
that value is asserted exactly from a hand-built parameter set.
"""

import dataclasses
import json
import sys

import numpy as np
import pytest

from reqforge.errors import ContractError
from reqforge.hpo.space import (
    HyperparameterSetting,
    Optimizer,
    Schedule,
    default_grid,
    sample_batch,
    space_for_task,
)
from reqforge.registry import ModelCard
from reqforge.schema import MetricTarget, Task
from reqforge.trainer import (
    METRIC_NAMES,
    NOISE_AMPLITUDE,
    SCHEDULE_OFFSET_POOL,
    DataSummary,
    ExternalTrainer,
    SimulatedTrainer,
    SurfaceParams,
    TrainJob,
    TrainResult,
    oracle_best,
    surface_params_for_request,
    surface_score,
)

CLS_SPACE = space_for_task(Task.CLASSIFICATION)

# a surface with every term at a known value: peak lr 1e-4, exact wd
# anchor 1e-3, batch anchor at the top of the range, no noise
FLAT_PARAMS = SurfaceParams(
    task=Task.CLASSIFICATION,
    lr_peak=-4.0,
    lr_width=1.0,
    wd_anchor=-3.0,
    batch_anchor=1.0,
    schedule_offsets=(0.02, 0.01, -0.01, -0.02),
    noise_amplitude=0.0,
)

BEST_SETTING = HyperparameterSetting(
    optimizer=Optimizer.ADAMW,
    schedule=Schedule.MULTISTEP,
    learning_rate=1e-4,
    weight_decay=1e-3,
    iters=5000,
    batch_size=64,
)


def _card():
    return ModelCard(
        name="resnet34_8xb32_in1k",
        task=Task.CLASSIFICATION,
        structure="ResNet",
        params_m=21.8,
        flops_g=3.68,
        speed_ms=8.5,
        performance=MetricTarget("accuracy", 0.7434),
        source="test",
    )


def _job(setting, request_id="crops-demo", task=Task.CLASSIFICATION, seed=0):
    return TrainJob(
        request_id=request_id,
        task=task,
        model_card=_card(),
        data_summary=DataSummary(class_count=5, image_count=12000),
        setting=setting,
        seed=seed,
    )


def test_metric_names_cover_every_task():
    assert METRIC_NAMES == {
        Task.CLASSIFICATION: "accuracy",
        Task.DETECTION: "mAP",
        Task.SEGMENTATION: "mIoU",
        Task.KEYPOINT: "OKS-mAP",
    }


class TestSurfaceParams:
    def test_drawn_once_per_request_and_task(self):
        a = surface_params_for_request("crops-demo", Task.CLASSIFICATION)
        b = surface_params_for_request("crops-demo", Task.CLASSIFICATION)
        c = surface_params_for_request("other", Task.CLASSIFICATION)
        d = surface_params_for_request("crops-demo", Task.DETECTION)
        assert a == b
        assert a != c and a != dataclasses.replace(d, task=Task.CLASSIFICATION)

    def test_parameter_ranges(self):
        for i in range(200):
            p = surface_params_for_request(f"req-{i}", Task.SEGMENTATION)
            assert -5.0 <= p.lr_peak <= -2.0
            assert 0.5 <= p.lr_width <= 1.5
            assert -5.0 <= p.wd_anchor <= -1.0
            assert 0.0 <= p.batch_anchor <= 1.0
            assert sorted(p.schedule_offsets) == sorted(SCHEDULE_OFFSET_POOL)
            assert p.noise_amplitude == NOISE_AMPLITUDE

    def test_without_noise_only_zeroes_the_amplitude(self):
        p = surface_params_for_request("x", Task.KEYPOINT)
        q = p.without_noise()
        assert q.noise_amplitude == 0.0
        assert dataclasses.replace(q, noise_amplitude=p.noise_amplitude) == p


class TestSurfaceScore:
    def test_best_setting_tops_out_at_095(self):
        assert surface_score(FLAT_PARAMS, BEST_SETTING) == pytest.approx(0.95)

    def test_each_term_degrades_away_from_its_optimum(self):
        best = surface_score(FLAT_PARAMS, BEST_SETTING)
        worse = [
            dataclasses.replace(BEST_SETTING, optimizer=Optimizer.SGD),
            dataclasses.replace(BEST_SETTING, schedule=Schedule.POLY),
            dataclasses.replace(BEST_SETTING, learning_rate=1e-7),
            dataclasses.replace(BEST_SETTING, weight_decay=0.1),
            dataclasses.replace(BEST_SETTING, iters=2000),
            dataclasses.replace(BEST_SETTING, batch_size=1),
        ]
        for setting in worse:
            assert surface_score(FLAT_PARAMS, setting) < best

    def test_optimizer_ordering_matches_the_offsets(self):
        mid = dataclasses.replace(BEST_SETTING, learning_rate=1e-6, iters=3000)
        scores = {
            o.value: surface_score(FLAT_PARAMS, dataclasses.replace(mid, optimizer=o))
            for o in Optimizer
        }
        assert scores["AdamW"] > scores["Adam"] > scores["RMSprop"] > scores["SGD"]

    def test_score_rises_with_iterations(self):
        params = surface_params_for_request("mono", Task.CLASSIFICATION).without_noise()
        base = dataclasses.replace(BEST_SETTING, learning_rate=1e-6)
        scores = [
            surface_score(params, dataclasses.replace(base, iters=i))
            for i in range(2000, 5001, 250)
        ]
        assert scores == sorted(scores)
        assert scores[-1] > scores[0]

    def test_noise_is_bounded_and_deterministic(self):
        params = surface_params_for_request("noisy", Task.DETECTION)
        batch = sample_batch(space_for_task(Task.DETECTION), np.random.default_rng(4), 200)
        for i in range(200):
            setting = batch.setting(i)
            noisy = surface_score(params, setting)
            assert noisy == surface_score(params, setting)
            clean = surface_score(params.without_noise(), setting)
            assert abs(noisy - clean) <= NOISE_AMPLITUDE + 1e-12

    def test_scores_stay_in_the_unit_interval(self):
        rng = np.random.default_rng(55)
        for task in Task:
            space = space_for_task(task)
            batch = sample_batch(space, rng, 500)
            for i in range(0, 500, 7):
                params = surface_params_for_request(f"fuzz-{i}", task)
                assert 0.0 <= surface_score(params, batch.setting(i)) <= 1.0


class TestOracle:
    def test_oracle_dominates_random_grid_points(self):
        params = surface_params_for_request("crops-demo", Task.CLASSIFICATION)
        best_score, best_setting = oracle_best(params)
        clean = params.without_noise()
        assert surface_score(clean, best_setting) == pytest.approx(best_score)
        grid = default_grid(CLS_SPACE)
        rng = np.random.default_rng(2)
        for _ in range(2000):
            setting = HyperparameterSetting(
                optimizer=CLS_SPACE.optimizers[rng.integers(4)],
                schedule=CLS_SPACE.schedules[rng.integers(4)],
                learning_rate=float(rng.choice(grid.learning_rate)),
                weight_decay=float(rng.choice(grid.weight_decay)),
                iters=int(rng.choice(grid.iters)),
                batch_size=int(rng.choice(grid.batch_size)),
            )
            assert surface_score(clean, setting) <= best_score + 1e-12

    def test_oracle_finds_the_constructed_peak(self):
        score, setting = oracle_best(FLAT_PARAMS)
        assert score == pytest.approx(0.95, abs=1e-3)
        assert setting.optimizer is Optimizer.ADAMW
        assert setting.schedule is Schedule.MULTISTEP
        assert setting.iters == 5000 and setting.batch_size == 64

    def test_grid_task_must_match(self):
        grid = default_grid(space_for_task(Task.DETECTION))
        with pytest.raises(ContractError, match="grid task"):
            oracle_best(FLAT_PARAMS, grid)


class TestSimulatedTrainer:
    def test_reports_the_surface_value_and_task_metric(self):
        trainer = SimulatedTrainer(noise=False)
        job = _job(BEST_SETTING)
        result = trainer.train_and_eval(job)
        params = surface_params_for_request("crops-demo", Task.CLASSIFICATION)
        assert result.status == "ok"
        assert result.metric.name == "accuracy"
        assert result.metric.value == surface_score(params.without_noise(), BEST_SETTING)

    def test_repeat_runs_are_identical(self):
        trainer = SimulatedTrainer()
        job = _job(dataclasses.replace(BEST_SETTING, learning_rate=3e-3))
        assert trainer.train_and_eval(job) == trainer.train_and_eval(job)

    def test_high_learning_rates_sometimes_diverge(self):
        trainer = SimulatedTrainer()
        hot = cold = 0
        for iters in range(2000, 3000):
            setting = dataclasses.replace(
                BEST_SETTING, learning_rate=0.08, iters=iters
            )
            result = trainer.train_and_eval(_job(setting))
            if result.status == "failed":
                hot += 1
                assert result.metric.value == 0.0
                assert "diverged" in result.notes
            setting = dataclasses.replace(setting, learning_rate=0.01)
            if trainer.train_and_eval(_job(setting)).status == "failed":
                cold += 1
        # the gate passes roughly one high-lr job in ten and no safe ones
        assert 0.06 <= hot / 1000 <= 0.14
        assert cold == 0

    def test_failures_can_be_disabled(self):
        trainer = SimulatedTrainer(failures=False)
        for iters in range(2000, 2200):
            setting = dataclasses.replace(BEST_SETTING, learning_rate=0.1, iters=iters)
            assert trainer.train_and_eval(_job(setting)).status == "ok"


class TestTrainResult:
    def test_status_vocabulary_is_closed(self):
        with pytest.raises(ContractError, match="unknown train status"):
            TrainResult("crashed", MetricTarget("accuracy", 0.0))

    def test_failures_must_carry_a_zero_value(self):
        with pytest.raises(ContractError, match="value 0"):
            TrainResult("failed", MetricTarget("accuracy", 0.3))

    def test_wire_round_trip_and_status_default(self):
        result = TrainResult("ok", MetricTarget("mIoU", 0.42), "note")
        assert TrainResult.from_json_dict(result.to_json_dict()) == result
        bare = TrainResult.from_json_dict({"metric": "mAP", "value": 0.5})
        assert bare.status == "ok" and bare.notes == ""

    def test_wire_parse_rejects_non_numeric_values(self):
        with pytest.raises(ValueError, match="must be a number"):
            TrainResult.from_json_dict({"metric": "mAP", "value": True})
        with pytest.raises(ValueError):
            TrainResult.from_json_dict({"metric": "mAP", "value": "0.5"})
        with pytest.raises(KeyError):
            TrainResult.from_json_dict({"metric": "mAP"})


def test_train_job_wire_shape():
    obj = _job(BEST_SETTING).to_json_dict()
    assert obj["request_id"] == "crops-demo"
    assert obj["task"] == "classification"
    assert obj["model"]["name"] == "resnet34_8xb32_in1k"
    assert obj["data"] == {"class_count": 5, "image_count": 12000}
    assert obj["setting"]["batch size"] == 64
    assert json.loads(json.dumps(obj)) == obj


def _subprocess_trainer(body):
    return ExternalTrainer(command=(sys.executable, "-c", body))


class TestExternalTrainer:
    def test_happy_path_parses_the_reply(self):
        body = (
            "import sys, json; sys.stdin.read(); "
            "print(json.dumps({'metric': 'accuracy', 'value': 0.5}))"
        )
        result = _subprocess_trainer(body).train_and_eval(_job(BEST_SETTING))
        assert result == TrainResult("ok", MetricTarget("accuracy", 0.5))

    def test_trainer_sees_the_job_payload(self):
        body = (
            "import sys, json; job = json.load(sys.stdin); "
            "print(json.dumps({'metric': 'accuracy', "
            "'value': job['setting']['batch size'] / 100}))"
        )
        result = _subprocess_trainer(body).train_and_eval(_job(BEST_SETTING))
        assert result.metric.value == pytest.approx(0.64)

    def test_nonzero_exit_becomes_a_failed_result(self):
        result = _subprocess_trainer("import sys; sys.exit(3)").train_and_eval(
            _job(BEST_SETTING)
        )
        assert result.status == "failed"
        assert result.metric.value == 0.0
        assert "exited with 3" in result.notes

    def test_malformed_reply_becomes_a_failed_result(self):
        result = _subprocess_trainer("print('not json')").train_and_eval(
            _job(BEST_SETTING)
        )
        assert result.status == "failed"
        assert "malformed trainer reply" in result.notes

    def test_missing_value_field_becomes_a_failed_result(self):
        body = "import json; print(json.dumps({'metric': 'accuracy'}))"
        result = _subprocess_trainer(body).train_and_eval(_job(BEST_SETTING))
        assert result.status == "failed"

    def test_unrunnable_command_becomes_a_failed_result(self):
        trainer = ExternalTrainer(command=("/no/such/binary",))
        result = trainer.train_and_eval(_job(BEST_SETTING))
        assert result.status == "failed"
        assert "cannot run trainer command" in result.notes

    def test_exactly_one_transport_must_be_configured(self):
        with pytest.raises(ContractError, match="exactly one"):
            ExternalTrainer().train_and_eval(_job(BEST_SETTING))
        with pytest.raises(ContractError, match="exactly one"):
            ExternalTrainer(command=("x",), endpoint="http://localhost").train_and_eval(
                _job(BEST_SETTING)
            )
