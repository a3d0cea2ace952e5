"""
Unit tests for training regimes, triplet sampling and setting selection.

Training runs use tiny dimensions and three epochs so each test takes
seconds; accuracy oracles live in the end-to-end suite.
"""

from dataclasses import replace

import numpy as np
import pytest

from twostage.core.exceptions import ContractViolation, DomainError, InvalidConfigurationError
from twostage.core.graph_data import make_splits
from twostage.core.models import ClassifierConfig, ModelConfig, build_model, parameter_digest
from twostage.core.tensor import constant
from twostage.core.training import (
    HyperparameterGrid,
    TrainConfig,
    hyperparameter_search,
    normalize_mode,
    run_trial,
    sample_triplets,
    select_setting,
    train_original,
    train_stage1,
    train_stage2,
    triplet_loss,
)
from twostage.core.utils import derive_seed

FAST_MODEL = ModelConfig(architecture="graphsage", num_layers=1, input_dim=16, hidden_dim=16, output_dim=16)


def fast_config(mode: str = "2stg", **overrides) -> TrainConfig:
    fields = {
        "mode": mode,
        "lr": 0.01,
        "max_epochs": 3,
        "stage1_max_epochs": 3,
        "patience": 2,
        "model": FAST_MODEL,
        "classifier": ClassifierConfig(num_layers=1),
    }
    fields.update(overrides)
    return TrainConfig(**fields)


def record(setting: str, seed: int, val: float, test: float, mode: str = "2stg") -> dict:
    return {
        "setting_key": setting,
        "seed": seed,
        "mode": mode,
        "architecture": "graphsage",
        "config": {"setting": setting},
        "val_accuracy": val,
        "test_accuracy": test,
    }


@pytest.mark.unit
class TestTrainConfig:
    """Tests for TrainConfig and mode names."""

    def test_mode_aliases(self):
        """Accepted spellings map onto the canonical names."""
        assert normalize_mode("2STG_plus") == "2stg+"
        assert normalize_mode(" original ") == "original"
        with pytest.raises(InvalidConfigurationError):
            normalize_mode("3stg")

    def test_margin_outside_grid(self):
        """Margins come from the search grid."""
        with pytest.raises(InvalidConfigurationError) as exc_info:
            TrainConfig(margin=0.7)
        assert exc_info.value.field == "margin"

    def test_patience_bound(self):
        """Patience must be smaller than the epoch limit."""
        with pytest.raises(InvalidConfigurationError):
            TrainConfig(max_epochs=5, stage1_max_epochs=5, patience=5)

    def test_setting_key_ignores_seed_and_mode(self):
        """The five splits and both two-stage modes share one setting key."""
        base = fast_config()
        assert base.with_seed(3).setting_key() == base.setting_key()
        assert replace(base, mode="2stg+").setting_key() == base.setting_key()
        assert replace(base, margin=2.0).setting_key() != base.setting_key()

    def test_original_setting_key_ignores_margin(self):
        """Margin is irrelevant to end-to-end training."""
        base = fast_config("original")
        assert replace(base, margin=2.0).setting_key() == base.setting_key()

    def test_stage1_key_shared_by_two_stage_modes(self):
        """2stg and 2stg+ of one seed reuse Stage 1; other seeds do not."""
        base = fast_config()
        plus = replace(base, mode="2stg+", classifier=ClassifierConfig(num_layers=2, hidden_dim=4))
        assert plus.stage1_key() == base.stage1_key()
        assert base.with_seed(1).stage1_key() != base.stage1_key()

    def test_dict_round_trip(self):
        """from_dict restores an equal config."""
        config = fast_config("2stg+", seed=4)
        assert TrainConfig.from_dict(config.to_dict()) == config


@pytest.mark.unit
class TestTriplets:
    """Tests for sample_triplets and triplet_loss."""

    def test_forced_choices(self):
        """With two graphs per class the positive is forced."""
        sample = sample_triplets([0, 0, 1, 1], range(4), seed=0)
        assert len(sample) == 4
        first = sample[0]
        assert (first.anchor, first.positive) == (0, 1)
        assert first.negative in (2, 3)

    def test_anchor_without_positive_is_skipped(self):
        """A singleton class member cannot anchor a triplet."""
        sample = sample_triplets([0, 1, 1], range(3), seed=0)
        assert len(sample) == 2
        assert sample.skipped == (0,)

    def test_every_graph_anchors_once(self):
        """A balanced set of 1000 yields 1000 valid triplets."""
        labels = np.arange(1000) % 2
        sample = sample_triplets(labels, range(1000), seed=7)
        assert len(sample) == 1000
        assert sorted(t.anchor for t in sample) == list(range(1000))
        for t in sample:
            assert t.anchor != t.positive
            assert labels[t.anchor] == labels[t.positive]
            assert labels[t.anchor] != labels[t.negative]

    def test_hundred_thousand_triplets(self):
        """Every one of 10^5 sampled triplets satisfies the class constraints."""
        labels = np.arange(100_000) % 3
        sample = sample_triplets(labels, range(100_000), seed=11)
        assert len(sample) == 100_000
        anchors = np.array([t.anchor for t in sample])
        positives = np.array([t.positive for t in sample])
        negatives = np.array([t.negative for t in sample])
        assert np.all(anchors != positives)
        assert np.all(labels[anchors] == labels[positives])
        assert np.all(labels[anchors] != labels[negatives])

    def test_restricted_indices(self):
        """Only the given indices are used."""
        sample = sample_triplets([0, 1, 0, 1, 0, 1], [0, 1, 2, 3], seed=1)
        used = {i for t in sample for i in (t.anchor, t.positive, t.negative)}
        assert used <= {0, 1, 2, 3}

    def test_deterministic(self):
        """Same seed, same triplets."""
        labels = np.arange(50) % 3
        assert sample_triplets(labels, range(50), 3) == sample_triplets(labels, range(50), 3)

    def test_single_class(self):
        """One class cannot form negatives."""
        with pytest.raises(DomainError):
            sample_triplets([1, 1, 1], range(3), seed=0)

    def test_loss_values(self):
        """Satisfied margin, collapsed triplet and a hand-evaluated case."""
        zero = constant([0.0, 0.0])
        assert triplet_loss(zero, zero, constant([2.0, 0.0]), 1.0).item() == 0.0
        assert triplet_loss(zero, zero, zero, 1.5).item() == pytest.approx(1.5)
        assert triplet_loss(zero, constant([1.0, 0.0]), zero, 0.5).item() == pytest.approx(1.5)

    def test_loss_length_mismatch(self):
        """Embeddings must share a length."""
        with pytest.raises(ContractViolation):
            triplet_loss(constant([0.0]), constant([0.0, 1.0]), constant([0.0]), 1.0)


@pytest.mark.unit
class TestStageTraining:
    """Tests for train_stage1, train_stage2 and train_original contracts."""

    @pytest.fixture
    def setup(self, synthetic_dataset):
        config = fast_config()
        split = make_splits(len(synthetic_dataset), config.seed)
        model = build_model(config.model, synthetic_dataset, seed=derive_seed(config.seed, "init"))
        return synthetic_dataset, config, split, model

    def test_stage1_zero_learning_rate(self, setup):
        """lr = 0 leaves parameters unchanged."""
        dataset, config, split, model = setup
        config = replace(config, lr=0.0, stage1_max_epochs=1, patience=1)
        before = parameter_digest(model.parameters())
        result = train_stage1(model, dataset, split, config)
        assert parameter_digest(model.parameters()) == before
        assert len(result.train_losses) == 1

    def test_stage1_history(self, setup):
        """One loss per epoch and a best epoch within range."""
        dataset, config, split, model = setup
        result = train_stage1(model, dataset, split, config)
        assert 1 <= len(result.train_losses) <= config.stage1_max_epochs
        assert len(result.val_losses) == len(result.train_losses)
        assert 0 <= result.best_epoch <= len(result.train_losses)
        assert all(0.0 <= c <= 1.0 for c in result.correlation_trace)

    def test_stage1_steps_every_triplet(self, setup):
        """Adam steps once per sampled triplet, zero-loss triplets included."""
        dataset, config, split, model = setup
        config = replace(config, stage1_max_epochs=4, patience=3)
        per_epoch = len(sample_triplets(dataset.labels, split.train_indices, seed=0))
        result = train_stage1(model, dataset, split, config)
        assert result.optimizer_steps == per_epoch * len(result.train_losses)

    def test_frozen_encoder_in_2stg(self, setup):
        """2stg trains only the head."""
        dataset, config, split, model = setup
        stage1 = train_stage1(model, dataset, split, config)
        before = parameter_digest(model.parameters())
        result = train_stage2(model, dataset, split, config, stage1)
        assert parameter_digest(model.parameters()) == before
        assert result.stage1 is stage1

    def test_best_epoch_selection(self, setup):
        """The selected validation accuracy is never below the starting one."""
        dataset, config, split, model = setup
        stage1 = train_stage1(model, dataset, split, config)
        result = train_stage2(model, dataset, split, replace(config, mode="2stg+"), stage1)
        assert result.val_accuracy >= result.initial_val_accuracy
        assert result.val_accuracy == max(result.val_accuracies)
        assert len(result.val_accuracies) == len(result.train_losses) + 1

    def test_warm_started_fine_tuning(self, setup):
        """2stg+ from the selected 2stg head keeps at least its validation accuracy, less 0.02."""
        dataset, config, split, model = setup
        stage1 = train_stage1(model, dataset, split, config)
        frozen = train_stage2(model, dataset, split, config, stage1)
        frozen_accuracy = frozen.val_accuracy
        tuned = train_stage2(model, dataset, split, replace(config, mode="2stg+"), stage1, head=frozen.head)
        assert tuned.initial_val_accuracy == pytest.approx(frozen_accuracy)
        assert tuned.val_accuracy >= frozen_accuracy - 0.02

    def test_stage2_rejects_original(self, setup):
        """train_stage2 does not run the end-to-end mode."""
        dataset, config, split, model = setup
        with pytest.raises(ContractViolation):
            train_stage2(model, dataset, split, replace(config, mode="original"), None)

    def test_original_rejects_two_stage_mode(self, setup):
        """train_original only runs the end-to-end mode."""
        dataset, config, split, model = setup
        with pytest.raises(ContractViolation):
            train_original(model, dataset, split, config)


@pytest.mark.unit
class TestRunTrial:
    """Tests for run_trial."""

    def test_deterministic_record(self, synthetic_dataset):
        """Repeating a trial reproduces every non-timing field."""
        config = fast_config("original", seed=2)
        first = run_trial(synthetic_dataset, config).to_record()
        second = run_trial(synthetic_dataset, config).to_record()
        first.pop("timing")
        second.pop("timing")
        assert first == second

    def test_shared_stage1(self, synthetic_dataset):
        """2stg and 2stg+ of one seed share a single Stage-1 result."""
        cache: dict = {}
        frozen = run_trial(synthetic_dataset, fast_config("2stg"), cache)
        tuned = run_trial(synthetic_dataset, fast_config("2stg+"), cache)
        assert len(cache) == 1
        assert frozen.stage1 is tuned.stage1
        assert frozen.correlation_trace == frozen.stage1.correlation_trace

    def test_record_fields(self, synthetic_dataset):
        """Records carry accuracies, traces and Stage-1 history."""
        result = run_trial(synthetic_dataset, fast_config("2stg"))
        rec = result.to_record()
        assert rec["mode"] == "2stg"
        assert 0.0 <= rec["test_accuracy"] <= 1.0
        assert rec["setting_key"] == result.config.setting_key()
        assert "stage1_seconds" in rec["timing"]
        assert rec["stage1"]["best_epoch"] >= 0
        assert result.val_embeddings.shape == (len(result.val_indices), 16)


@pytest.mark.unit
class TestGridAndSelection:
    """Tests for HyperparameterGrid and select_setting."""

    def test_expand_filters_wide_classifier(self):
        """Hidden widths above the embedding size are dropped."""
        grid = HyperparameterGrid(output_dim=(16,), classifier_layers=(2,), classifier_hidden=(8, 32))
        configs = grid.expand("2stg", fast_config())
        assert [c.classifier.hidden_dim for c in configs] == [8]

    def test_original_ignores_margin(self):
        """End-to-end settings do not multiply over margins."""
        grid = HyperparameterGrid(
            input_dim=(16,), hidden_dim=(16,), output_dim=(16,), margin=(1.0, 2.0), classifier_layers=(1,)
        )
        assert len(grid.expand("original", fast_config())) == 1
        assert len(grid.expand("2stg", fast_config())) == 2

    def test_invalid_grid_value(self):
        """Values outside the search space are rejected with the grid field."""
        with pytest.raises(InvalidConfigurationError) as exc_info:
            HyperparameterGrid(margin=(0.1,))
        assert exc_info.value.field == "grid.margin"

    def test_single_setting(self):
        """A singleton grid reports that setting's five-split statistics."""
        records = [record("a", s, 0.9, 0.8) for s in range(5)]
        summary = select_setting(records)
        assert summary is not None
        assert summary.setting_key == "a"
        assert summary.test_mean == pytest.approx(0.8)
        assert summary.test_std == pytest.approx(0.0, abs=1e-12)

    def test_dominant_setting_selected(self):
        """The setting with higher validation accuracy wins, whatever its test accuracy."""
        records = [record("a", s, 0.6, 0.9) for s in range(5)] + [record("b", s, 0.8, 0.5) for s in range(5)]
        summary = select_setting(records)
        assert summary is not None
        assert summary.setting_key == "b"
        assert summary.test_accuracies == (0.5,) * 5

    def test_tie_keeps_first(self):
        """Equal validation means keep the first setting seen."""
        records = [record("a", s, 0.7, 0.6) for s in range(5)] + [record("b", s, 0.7, 0.9) for s in range(5)]
        assert select_setting(records).setting_key == "a"

    def test_incomplete_settings_ignored(self):
        """Settings without all five seeds take no part."""
        records = [record("a", s, 0.99, 0.99) for s in range(4)]
        assert select_setting(records) is None


@pytest.mark.unit
class TestHyperparameterSearch:
    """Tests for hyperparameter_search on a two-setting grid."""

    GRID = HyperparameterGrid(
        input_dim=(16,),
        hidden_dim=(16,),
        output_dim=(16,),
        num_layers=(1,),
        global_pool=("mean", "max"),
        classifier_layers=(1,),
    )

    def search(self, dataset, base, records=None):
        def keep(trial):
            if records is not None:
                records.append(trial.to_record())

        return hyperparameter_search(dataset, self.GRID, base, modes=["original"], seeds=(0, 1), on_trial=keep)

    def test_selects_by_validation_accuracy(self, synthetic_dataset):
        """The chosen setting has the best mean validation accuracy, first on ties."""
        records: list[dict] = []
        summary = self.search(synthetic_dataset, fast_config("original"), records)["original"]
        assert len(records) == 4

        means: dict[str, list[float]] = {}
        for rec in records:
            means.setdefault(rec["setting_key"], []).append(rec["val_accuracy"])
        best_key, best_mean = None, -1.0
        for key, values in means.items():
            if np.mean(values) > best_mean:
                best_key, best_mean = key, float(np.mean(values))
        assert summary.setting_key == best_key
        assert summary.val_mean == pytest.approx(best_mean)

    def test_tie_keeps_first_grid_entry(self, synthetic_dataset):
        """With lr = 0 every setting predicts alike, so the first grid point wins."""
        base = fast_config("original", lr=0.0)
        summary = self.search(synthetic_dataset, base)["original"]
        assert summary.setting_key == self.GRID.expand("original", base)[0].setting_key

    def test_reproducible(self, synthetic_dataset):
        """Two searches under fixed seeds agree."""
        base = fast_config("original")
        assert self.search(synthetic_dataset, base) == self.search(synthetic_dataset, base)
